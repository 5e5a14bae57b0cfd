#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "vpsa/errors.hpp"

namespace vpsa {

// All scalar hyperparameters of a run. init_mean/init_scale parameterize the
// initial Gaussian N(init_mean, init_scale^2 I).
struct RunConfig {
    double eta = 0.0;
    std::uint64_t steps = 0;      // T
    std::uint64_t particles = 0;  // n
    double sigma = 1.0;
    std::uint64_t batch_size = 1;  // B; 1 reproduces the unbatched update exactly
    std::uint64_t master_seed = 0;
    Eigen::VectorXd init_mean;  // empty means zero vector of size dim
    double init_scale = 1.0;
    Eigen::Index dim = 1;
    // sigma = 0 is outside the theory (the dynamics need a diffusion term);
    // permitted only when this flag is set, for debugging deterministic flows.
    bool deterministic_flow = false;

    Eigen::VectorXd initial_mean() const {
        if (init_mean.size() == 0) return Eigen::VectorXd::Zero(dim);
        return init_mean;
    }

    void validate() const {
        if (dim < 1) throw ConfigError("RunConfig: dim must be >= 1");
        if (batch_size < 1) throw ConfigError("RunConfig: batch_size must be >= 1");
        if (steps > 0 && !(eta > 0.0)) throw ConfigError("RunConfig: eta must be > 0 when steps > 0");
        if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("RunConfig: eta must be finite and >= 0");
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("RunConfig: sigma must be finite and >= 0");
        if (sigma == 0.0 && !deterministic_flow)
            throw ConfigError("RunConfig: sigma = 0 requires the deterministic_flow flag");
        if (!(init_scale >= 0.0) || !std::isfinite(init_scale))
            throw ConfigError("RunConfig: init_scale must be finite and >= 0");
        if (init_mean.size() != 0 && init_mean.size() != dim)
            throw ConfigError("RunConfig: init_mean dimension does not match dim");
    }
};

enum class CloudKind { real, virtual_ };

// Positions are columns of a d x n matrix, so particles are contiguous.
struct ParticleCloud {
    Eigen::MatrixXd positions;
    std::uint64_t step_index = 0;
    CloudKind kind = CloudKind::real;

    Eigen::Index dim() const { return positions.rows(); }
    Eigen::Index size() const { return positions.cols(); }

    void require_finite() const {
        if (!positions.allFinite())
            throw DivergenceError("ParticleCloud: non-finite coordinate at step " +
                                  std::to_string(step_index));
    }
};

}  // namespace vpsa
