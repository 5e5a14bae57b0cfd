#include <catch2/catch.hpp>

#include <cmath>

#include "vpsa/dynamics.hpp"

using namespace vpsa;

namespace {

RunConfig quad_config(std::uint64_t n, std::uint64_t steps, double eta = 0.05,
                      Eigen::Index dim = 1, std::uint64_t seed = 1234) {
    RunConfig c;
    c.eta = eta;
    c.steps = steps;
    c.particles = n;
    c.sigma = 1.0;
    c.dim = dim;
    c.master_seed = seed;
    return c;
}

}  // namespace

TEST_CASE("evaluation count formula") {
    REQUIRE(eval_count(0, 0, 1) == 0);
    REQUIRE(eval_count(2, 3, 1) == 12);       // nT + T(T+1)/2 = 6 + 6
    REQUIRE(eval_count(1, 2, 2) == 16);       // BnT + B^2 T(T+1)/2 = 4 + 12
    REQUIRE(eval_count(10, 1, 1) == 11);
}

TEST_CASE("measured estimator invocations match the formula") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 2);
    for (std::uint64_t n : {0ull, 1ull, 4ull}) {
        for (std::uint64_t steps : {0ull, 1ull, 6ull}) {
            for (std::uint64_t batch : {1ull, 3ull}) {
                auto cfg = quad_config(n, steps, 0.02, 2);
                cfg.batch_size = batch;
                const auto result = vpsa_run(cfg, spec);
                REQUIRE(result.trace.final_eval_count == eval_count(n, steps, batch));
            }
        }
    }
}

TEST_CASE("single update step") {
    SECTION("zero step size is the identity") {
        auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 2);
        auto cfg = quad_config(1, 0, 0.05, 2);
        cfg.eta = 0.0;
        Eigen::VectorXd x(2), y(2), z(2);
        x << 1.0, -2.0;
        y << 0.5, 0.5;
        z << 3.0, 3.0;
        REQUIRE(vpsa_step(x, y, 0, cfg, spec, z) == x);
    }
    SECTION("pure gradient descent on the external potential") {
        auto spec = PairwiseSpec::quadratic(1.0, 0.0, 0.0, 1);
        auto cfg = quad_config(1, 0, 0.1);
        cfg.sigma = 0.0;
        cfg.deterministic_flow = true;
        Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
        REQUIRE(vpsa_step(x, x, 0, cfg, spec, Eigen::VectorXd::Zero(1))[0] == Approx(0.9));
    }
    SECTION("pure interaction drift toward the witness") {
        auto spec = PairwiseSpec::quadratic(0.0, 1.0, 0.0, 1);
        auto cfg = quad_config(1, 0, 0.1);
        cfg.sigma = 0.0;
        cfg.deterministic_flow = true;
        Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
        Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
        REQUIRE(vpsa_step(x, y, 0, cfg, spec, Eigen::VectorXd::Zero(1))[0] == Approx(0.9));
    }
}

TEST_CASE("zero steps returns the initial samples") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 2);
    auto cfg = quad_config(3, 0, 0.05, 2);
    cfg.init_mean = Eigen::VectorXd::Constant(2, 0.7);
    cfg.init_scale = 2.0;
    const auto result = vpsa_run(cfg, spec);

    REQUIRE(result.cloud.size() == 3);
    REQUIRE(result.trace.final_eval_count == 0);
    REQUIRE(result.witness.diagonal.size() == 1);  // T+1 entries
    REQUIRE(result.witness.xi_draws.empty());
    REQUIRE(result.trace.rows.size() == 1);

    // The initial draws come straight from the per-particle init streams.
    for (std::uint64_t i = 0; i < 3; ++i) {
        const Eigen::VectorXd z = gaussian_vector(cfg.master_seed, {StreamKind::real_init, i, 0}, 2);
        const Eigen::VectorXd expected = cfg.initial_mean() + cfg.init_scale * z;
        REQUIRE(result.cloud.positions.col(static_cast<Eigen::Index>(i)) == expected);
    }
}

TEST_CASE("bit-identical reruns") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 3);
    auto cfg = quad_config(5, 40, 0.05, 3);
    const auto a = vpsa_run(cfg, spec);
    const auto b = vpsa_run(cfg, spec);
    REQUIRE(a.cloud.positions == b.cloud.positions);
    REQUIRE(a.witness.diagonal.size() == b.witness.diagonal.size());
    for (std::size_t i = 0; i < a.witness.diagonal.size(); ++i)
        REQUIRE(a.witness.diagonal[i] == b.witness.diagonal[i]);
}

TEST_CASE("particles are deterministic functions of their substreams") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 2);
    auto cfg = quad_config(2, 30, 0.05, 2);
    const auto joint = vpsa_run(cfg, spec);

    auto cfg1 = cfg;
    cfg1.particles = 1;
    RunOptions first;
    first.substream_offset = 0;
    RunOptions second;
    second.substream_offset = 1;
    const auto run0 = vpsa_run(cfg1, spec, first);
    const auto run1 = vpsa_run(cfg1, spec, second);

    REQUIRE(run0.cloud.positions.col(0) == joint.cloud.positions.col(0));
    REQUIRE(run1.cloud.positions.col(0) == joint.cloud.positions.col(1));
}

TEST_CASE("permuting substream assignments permutes the outputs") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 1);
    auto cfg = quad_config(3, 25);
    RunOptions forward;
    forward.substreams = std::vector<std::uint64_t>{5, 9, 2};
    RunOptions permuted;
    permuted.substreams = std::vector<std::uint64_t>{2, 5, 9};
    const auto a = vpsa_run(cfg, spec, forward);
    const auto b = vpsa_run(cfg, spec, permuted);
    REQUIRE(b.cloud.positions.col(0) == a.cloud.positions.col(2));
    REQUIRE(b.cloud.positions.col(1) == a.cloud.positions.col(0));
    REQUIRE(b.cloud.positions.col(2) == a.cloud.positions.col(1));
}

TEST_CASE("divergence guard aborts on a blown-up step size") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.0, 1.0, 1);
    auto cfg = quad_config(1, 50, 1e7);
    REQUIRE_THROWS_AS(vpsa_run(cfg, spec), DivergenceError);
}

TEST_CASE("trace evaluation counts are nondecreasing and end exact") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 1);
    auto cfg = quad_config(4, 37, 0.02);
    RunOptions options;
    options.trace.stride = 5;
    const auto result = vpsa_run(cfg, spec, options);
    REQUIRE(result.trace.rows.size() > 3);
    std::uint64_t last = 0;
    for (const auto& row : result.trace.rows) {
        REQUIRE(row.eval_count_cumulative >= last);
        last = row.eval_count_cumulative;
    }
    REQUIRE(result.trace.rows.back().step == 37);
    REQUIRE(last == eval_count(4, 37, 1));
}

TEST_CASE("batched runs keep one diagonal per array and count B^2 virtual work") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 1);
    auto cfg = quad_config(2, 6, 0.02);
    cfg.batch_size = 3;
    const auto result = vpsa_run(cfg, spec);
    REQUIRE(result.witness.batch_size == 3);
    REQUIRE(result.witness.diagonal.size() == 7 * 3);
    REQUIRE(result.trace.final_eval_count == eval_count(2, 6, 3));
    const auto again = vpsa_run(cfg, spec);
    REQUIRE(result.cloud.positions == again.cloud.positions);
}

TEST_CASE("config and functional must agree") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 2);
    auto cfg = quad_config(1, 3, 0.05, 3);
    REQUIRE_THROWS_AS(vpsa_run(cfg, spec), ConfigError);  // dim mismatch
    auto cfg2 = quad_config(1, 3, 0.05, 2);
    cfg2.sigma = 0.5;
    REQUIRE_THROWS_AS(vpsa_run(cfg2, spec), ConfigError);  // sigma mismatch
}

TEST_CASE("long run reaches the stationary variance", "[slow]") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 1.0, 1);
    auto cfg = quad_config(2000, 5000, 0.01, 1, 314159);
    const auto result = vpsa_run(cfg, spec);
    const Eigen::VectorXd row = result.cloud.positions.row(0);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().sum() / 1999.0;
    const double target = 1.0 / 3.0;  // sigma^2 / (2 (lambda_v + alpha))
    const double se = var * std::sqrt(2.0 / 1999.0);
    REQUIRE(std::abs(var - target) < 3.0 * se);
}

TEST_CASE("deterministic flow contracts to the origin") {
    auto spec = PairwiseSpec::quadratic(1.0, 0.5, 0.0, 1);
    auto cfg = quad_config(4, 200, 0.05);
    cfg.sigma = 0.0;
    cfg.deterministic_flow = true;
    const auto result = vpsa_run(cfg, spec);
    REQUIRE(result.cloud.positions.cwiseAbs().maxCoeff() < 1e-4);
}
