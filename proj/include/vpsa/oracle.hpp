#pragma once

#include <vector>

#include <Eigen/Core>

#include "vpsa/errors.hpp"
#include "vpsa/gaussian.hpp"
#include "vpsa/pairwise.hpp"
#include "vpsa/types.hpp"

namespace vpsa {

// For the fully quadratic case the stationary law is the Gaussian fixed point
// N(0, s^2 I) with s^2 = sigma^2 / (2 (lambda_v + alpha)): the interaction
// convolved against a centered measure is again quadratic, so the fixed point
// closes among centered isotropic Gaussians.
inline GaussianSummary quadratic_stationary(const PairwiseSpec& spec) {
    if (!spec.is_quadratic()) throw ConfigError("quadratic_stationary: spec is not quadratic");
    const double rate = spec.lambda_v() + spec.alpha();
    if (!(rate > 0.0)) throw ConfigError("quadratic_stationary: lambda_v + alpha must be > 0");
    if (spec.sigma < 0.0) throw ConfigError("quadratic_stationary: sigma must be >= 0");
    const double s2 = spec.sigma * spec.sigma / (2.0 * rate);
    return GaussianSummary::isotropic(Eigen::VectorXd::Zero(spec.dim), s2, spec.dim);
}

// Log-Sobolev constant of the quadratic fixed point under the convention
// KL <= (C/2) FD, which for N(0, s^2 I) is exactly s^2. The two consistency
// bounds Var(pi) <= d*C and C >= 1/L hold with equality here.
inline double quadratic_lsi_constant(const PairwiseSpec& spec) {
    const GaussianSummary pi = quadratic_stationary(spec);
    return pi.covariance(0, 0);
}

// Exact second-order state of the coupled (real, virtual) system at one step
// of the quadratic-case dynamics. All surviving virtual particles are
// exchangeable (the diagonal consumed at each past step never survives), so
// the full joint Gaussian law is captured by these scalars per coordinate
// plus the two mean vectors.
struct AffineMomentState {
    std::uint64_t step = 0;
    Eigen::VectorXd mean_real;
    Eigen::VectorXd mean_virtual;
    double var_real = 0.0;          // per-coordinate Var(X)
    double var_virtual = 0.0;       // per-coordinate Var(Y_j), j surviving
    double cov_real_virtual = 0.0;  // Cov(X, Y_j)
    double cov_virtual_pair = 0.0;  // Cov(Y_j, Y_j'), j != j'
    double cov_real_pair = 0.0;     // Cov(X_i, X_i'), i != i'

    GaussianSummary real_marginal(Eigen::Index dim) const {
        return GaussianSummary::isotropic(mean_real, var_real, dim);
    }
};

// Propagates the exact joint mean and covariance of one real particle and the
// surviving virtual particles through the affine quadratic-case updates
//   X+   = a X + b Y_diag + noise,   a = 1 - eta (lambda_v + alpha), b = eta alpha,
//   Y_j+ = a Y_j + b Y_diag + noise,
// returning the state at every step 0..T. Requires batch size 1.
inline std::vector<AffineMomentState> affine_recursion_moments(const RunConfig& config,
                                                               const PairwiseSpec& spec) {
    if (!spec.is_quadratic()) throw ConfigError("affine_recursion: spec is not quadratic");
    if (config.batch_size != 1) throw ConfigError("affine_recursion: batch size must be 1");
    config.validate();

    const double a = 1.0 - config.eta * (spec.lambda_v() + spec.alpha());
    const double b = config.eta * spec.alpha();
    const double q = config.sigma * config.sigma * config.eta;

    AffineMomentState s;
    s.step = 0;
    s.mean_real = config.initial_mean();
    s.mean_virtual = s.mean_real;
    s.var_real = s.var_virtual = config.init_scale * config.init_scale;
    s.cov_real_virtual = s.cov_virtual_pair = s.cov_real_pair = 0.0;

    std::vector<AffineMomentState> states;
    states.reserve(config.steps + 1);
    states.push_back(s);
    for (std::uint64_t k = 0; k < config.steps; ++k) {
        AffineMomentState t;
        t.step = k + 1;
        t.mean_real = a * s.mean_real + b * s.mean_virtual;
        t.mean_virtual = (a + b) * s.mean_virtual;
        t.var_real = a * a * s.var_real + 2.0 * a * b * s.cov_real_virtual +
                     b * b * s.var_virtual + q;
        t.cov_real_virtual = a * a * s.cov_real_virtual + a * b * s.cov_real_virtual +
                             a * b * s.cov_virtual_pair + b * b * s.var_virtual;
        t.var_virtual = (a * a + b * b) * s.var_virtual + 2.0 * a * b * s.cov_virtual_pair + q;
        t.cov_virtual_pair =
            a * a * s.cov_virtual_pair + 2.0 * a * b * s.cov_virtual_pair + b * b * s.var_virtual;
        t.cov_real_pair =
            a * a * s.cov_real_pair + 2.0 * a * b * s.cov_real_virtual + b * b * s.var_virtual;
        states.push_back(t);
        s = t;
    }
    return states;
}

// The exact unconditional marginal law of a real particle at steps 0..T.
inline std::vector<GaussianSummary> affine_recursion_oracle(const RunConfig& config,
                                                            const PairwiseSpec& spec) {
    const auto states = affine_recursion_moments(config, spec);
    std::vector<GaussianSummary> laws;
    laws.reserve(states.size());
    for (const auto& state : states) laws.push_back(state.real_marginal(config.dim));
    return laws;
}

}  // namespace vpsa
