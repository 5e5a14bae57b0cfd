#include <catch2/catch.hpp>

#include "vpsa/types.hpp"

using namespace vpsa;

namespace {
RunConfig valid() {
    RunConfig c;
    c.eta = 0.1;
    c.steps = 5;
    c.particles = 3;
    c.sigma = 1.0;
    c.dim = 2;
    return c;
}
}  // namespace

TEST_CASE("run config validation") {
    REQUIRE_NOTHROW(valid().validate());

    auto c = valid();
    c.eta = 0.0;
    REQUIRE_THROWS_AS(c.validate(), ConfigError);
    c.steps = 0;  // zero steps permit any eta
    REQUIRE_NOTHROW(c.validate());

    c = valid();
    c.sigma = 0.0;
    REQUIRE_THROWS_AS(c.validate(), ConfigError);
    c.deterministic_flow = true;
    REQUIRE_NOTHROW(c.validate());

    c = valid();
    c.dim = 0;
    REQUIRE_THROWS_AS(c.validate(), ConfigError);

    c = valid();
    c.batch_size = 0;
    REQUIRE_THROWS_AS(c.validate(), ConfigError);

    c = valid();
    c.init_mean = Eigen::VectorXd::Zero(3);  // dim is 2
    REQUIRE_THROWS_AS(c.validate(), ConfigError);

    c = valid();
    c.init_scale = -1.0;
    REQUIRE_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("initial mean defaults to zero vector") {
    auto c = valid();
    REQUIRE(c.initial_mean().isZero());
    c.init_mean = Eigen::VectorXd::Constant(2, 1.5);
    REQUIRE(c.initial_mean()[1] == 1.5);
}

TEST_CASE("cloud finiteness guard") {
    ParticleCloud cloud;
    cloud.positions = Eigen::MatrixXd::Zero(2, 3);
    REQUIRE_NOTHROW(cloud.require_finite());
    cloud.positions(1, 2) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(cloud.require_finite(), DivergenceError);
}
