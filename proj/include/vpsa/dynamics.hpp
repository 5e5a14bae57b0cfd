#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vpsa/errors.hpp"
#include "vpsa/functional.hpp"
#include "vpsa/gaussian.hpp"
#include "vpsa/noise.hpp"
#include "vpsa/types.hpp"
#include "vpsa/witness.hpp"

namespace vpsa {

// Fail fast on a mis-specified step size: any coordinate beyond this (or
// non-finite) aborts the run.
constexpr double kDivergenceBound = 1e12;

// Exact number of single-sample estimator invocations performed by a
// virtual-particle run: B per real update, n real updates per step, and B per
// virtual update over B arrays of T-k virtual particles at step k.
inline std::uint64_t eval_count(std::uint64_t n, std::uint64_t steps, std::uint64_t batch_size) {
    const std::uint64_t virtual_updates = steps * (steps + 1) / 2;
    return batch_size * n * steps + batch_size * batch_size * virtual_updates;
}

struct TraceRow {
    std::uint64_t step = 0;
    double elapsed_wall_s = 0.0;  // never serialized into CSV payloads
    std::uint64_t eval_count_cumulative = 0;
    double empirical_mean_norm = 0.0;
    double empirical_cov_trace = 0.0;
    std::optional<double> energy_a;  // v_part (pairwise) or loss (mfnn)
    std::optional<double> energy_b;  // w_part (pairwise) or ridge (mfnn)
    std::optional<double> entropy_estimate;
    std::optional<double> oracle_kl;
    std::optional<double> oracle_w2;
};

struct DiagnosticsTrace {
    std::vector<TraceRow> rows;
    std::uint64_t final_eval_count = 0;
};

struct TraceOptions {
    std::uint64_t stride = 0;  // 0: record only the final state
    bool record_energy = false;
};

struct RunOptions {
    // Real particle i draws its noise from substream index substream_offset+i,
    // unless an explicit per-particle assignment is given. Substreams are the
    // identity of a particle: matching assignments reproduce particles
    // bit-exactly across runs of different n.
    std::uint64_t substream_offset = 0;
    std::optional<std::vector<std::uint64_t>> substreams;
    TraceOptions trace;
};

struct VpsaResult {
    ParticleCloud cloud;
    WitnessPath witness;
    DiagnosticsTrace trace;
    std::vector<std::uint64_t> substreams;  // per-particle assignment actually used
};

struct PmkvResult {
    ParticleCloud cloud;
    DiagnosticsTrace trace;
};

struct ReplayResult {
    ParticleCloud cloud;
    std::uint64_t eval_count = 0;
};

namespace detail {

inline void guard_column(const Eigen::MatrixXd& m, Eigen::Index col, std::uint64_t step) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double v = m(r, col);
        if (!(std::abs(v) <= kDivergenceBound))
            throw DivergenceError("dynamics: coordinate " + std::to_string(r) + " of particle " +
                                  std::to_string(col) + " diverged at step " + std::to_string(step));
    }
}

inline double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <EstimatorSpec Spec>
void record_row(DiagnosticsTrace& trace, const Eigen::MatrixXd& positions, std::uint64_t step,
                std::uint64_t evals, std::chrono::steady_clock::time_point start,
                const TraceOptions& options, const Spec& spec) {
    TraceRow row;
    row.step = step;
    row.elapsed_wall_s = elapsed_s(start);
    row.eval_count_cumulative = evals;
    if (positions.cols() > 0) {
        const Eigen::VectorXd mean = positions.rowwise().mean();
        row.empirical_mean_norm = mean.norm();
        double trace_sum = 0.0;
        for (Eigen::Index r = 0; r < positions.rows(); ++r)
            trace_sum += (positions.row(r).array() - mean[r]).square().sum();
        const double denom = positions.cols() > 1 ? static_cast<double>(positions.cols() - 1) : 1.0;
        row.empirical_cov_trace = trace_sum / denom;
    }
    if (options.record_energy && positions.cols() > 0) {
        ParticleCloud snapshot{positions, step, CloudKind::real};
        if constexpr (std::is_same_v<Spec, PairwiseSpec>) {
            const auto e = pairwise_energy(spec, snapshot);
            row.energy_a = e.v_part;
            row.energy_b = e.w_part;
        } else {
            const auto e = mfnn_energy(spec, snapshot);
            row.energy_a = e.loss;
            row.energy_b = e.ridge;
        }
        row.entropy_estimate = gaussian_entropy(gaussian_fit(snapshot));
    }
    trace.rows.push_back(std::move(row));
}

inline bool should_record(std::uint64_t step, std::uint64_t total, const TraceOptions& options) {
    if (step == total) return true;
    return options.stride > 0 && step % options.stride == 0;
}

}  // namespace detail

// One Euler-Maruyama update against a frozen witness point:
//   x + eta * G_hat(x, witness, xi) + sigma * sqrt(eta) * noise.
template <EstimatorSpec Spec>
Eigen::VectorXd vpsa_step(const Eigen::VectorXd& x, const Eigen::VectorXd& witness,
                          std::uint64_t xi, const RunConfig& config, const Spec& spec,
                          const Eigen::VectorXd& noise) {
    if (x.size() != witness.size() || x.size() != noise.size())
        throw ConfigError("vpsa_step: dimension mismatch");
    Eigen::VectorXd g(x.size());
    estimate_into(spec, x, witness, xi, g);
    return x + config.eta * g + config.sigma * std::sqrt(config.eta) * noise;
}

// Virtual particle stochastic approximation. Runs steps k = 0..T-1; the
// diagonal entry used at step k was frozen at step k-1 and is never updated
// within step k. With batch_size B, B independent virtual arrays are kept and
// every update averages the estimator over the B frozen diagonals, so the
// output particles stay conditionally i.i.d. given the witness record.
template <EstimatorSpec Spec>
VpsaResult vpsa_run(const RunConfig& config, const Spec& spec, const RunOptions& options = {}) {
    config.validate();
    if constexpr (std::is_same_v<Spec, PairwiseSpec>) {
        if (spec.dim != config.dim) throw ConfigError("vpsa_run: functional dim != config dim");
    } else {
        if (spec.dim() != config.dim) throw ConfigError("vpsa_run: functional dim != config dim");
    }
    if (spec.sigma != config.sigma)
        throw ConfigError("vpsa_run: functional sigma != config sigma");

    const auto start = std::chrono::steady_clock::now();
    const Eigen::Index d = config.dim;
    const std::uint64_t n = config.particles;
    const std::uint64_t T = config.steps;
    const std::uint64_t B = config.batch_size;
    const double root_eta_sigma = config.sigma * std::sqrt(config.eta);

    std::vector<std::uint64_t> substreams;
    if (options.substreams) {
        substreams = *options.substreams;
        if (substreams.size() != n)
            throw ConfigError("vpsa_run: substream assignment size != particle count");
    } else {
        substreams.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) substreams[i] = options.substream_offset + i;
    }

    const Eigen::VectorXd mean0 = config.initial_mean();

    VpsaResult result;
    result.witness.steps = T;
    result.witness.batch_size = B;
    result.witness.dim = d;
    result.witness.master_seed = config.master_seed;
    result.witness.config_hash = config_hash(config, Functional(spec));
    result.witness.diagonal.resize((T + 1) * B);

    // Initial draws: every entity owns its own stream.
    Eigen::MatrixXd reals(d, static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) {
        NoiseStream init(config.master_seed, {StreamKind::real_init, substreams[i], 0});
        Eigen::VectorXd z(d);
        init.fill_gaussian(z);
        reals.col(static_cast<Eigen::Index>(i)) = mean0 + config.init_scale * z;
    }
    // Virtual arrays, flattened entity index b*(T+1)+j.
    std::vector<Eigen::MatrixXd> virtuals(B);
    for (std::uint64_t b = 0; b < B; ++b) {
        virtuals[b].resize(d, static_cast<Eigen::Index>(T + 1));
        for (std::uint64_t j = 0; j <= T; ++j) {
            NoiseStream init(config.master_seed, {StreamKind::virtual_init, b * (T + 1) + j, 0});
            Eigen::VectorXd z(d);
            init.fill_gaussian(z);
            virtuals[b].col(static_cast<Eigen::Index>(j)) = mean0 + config.init_scale * z;
        }
    }

    std::uint64_t evals = 0;
    const bool want_xi = uses_xi(spec);
    if (want_xi) result.witness.xi_draws.resize(T);

    Eigen::VectorXd g(d), g_acc(d), noise(d);
    if (detail::should_record(0, T, options.trace) && T > 0)
        detail::record_row(result.trace, reals, 0, evals, start, options.trace, spec);

    for (std::uint64_t k = 0; k < T; ++k) {
        // Diagonal entries for this step, frozen since step k-1.
        for (std::uint64_t b = 0; b < B; ++b)
            result.witness.diag(k, b) = virtuals[b].col(static_cast<Eigen::Index>(k));

        std::uint64_t xi_k = 0;
        if (want_xi) {
            NoiseStream xi_stream(config.master_seed, {StreamKind::xi, 0, k});
            xi_k = draw_xi(spec, xi_stream);
            result.witness.xi_draws[k] = xi_k;
        }

        auto batched_estimate = [&](Eigen::Ref<const Eigen::VectorXd> x, Eigen::VectorXd& out) {
            out.setZero();
            for (std::uint64_t b = 0; b < B; ++b) {
                estimate_into(spec, x, virtuals[b].col(static_cast<Eigen::Index>(k)), xi_k, g);
                out += g;
                ++evals;
            }
            out /= static_cast<double>(B);
        };

        for (std::uint64_t i = 0; i < n; ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            batched_estimate(reals.col(col), g_acc);
            NoiseStream z(config.master_seed, {StreamKind::real_noise, substreams[i], k});
            z.fill_gaussian(noise);
            reals.col(col) += config.eta * g_acc + root_eta_sigma * noise;
            detail::guard_column(reals, col, k + 1);
        }
        for (std::uint64_t b = 0; b < B; ++b) {
            for (std::uint64_t j = k + 1; j <= T; ++j) {
                const auto col = static_cast<Eigen::Index>(j);
                batched_estimate(virtuals[b].col(col), g_acc);
                NoiseStream w(config.master_seed, {StreamKind::virtual_noise, b * (T + 1) + j, k});
                w.fill_gaussian(noise);
                virtuals[b].col(col) += config.eta * g_acc + root_eta_sigma * noise;
                detail::guard_column(virtuals[b], col, k + 1);
            }
        }

        if (detail::should_record(k + 1, T, options.trace) && k + 1 < T)
            detail::record_row(result.trace, reals, k + 1, evals, start, options.trace, spec);
    }
    // Diagonal entry for step T (present even when it is never applied).
    for (std::uint64_t b = 0; b < B; ++b)
        result.witness.diag(T, b) = virtuals[b].col(static_cast<Eigen::Index>(T));

    detail::record_row(result.trace, reals, T, evals, start, options.trace, spec);
    result.trace.final_eval_count = evals;
    result.cloud = ParticleCloud{std::move(reals), T, CloudKind::real};
    result.substreams = std::move(substreams);
    return result;
}

inline VpsaResult vpsa_run(const RunConfig& config, const Functional& functional,
                           const RunOptions& options = {}) {
    return std::visit([&](const auto& spec) { return vpsa_run(config, spec, options); }, functional);
}

// Fresh conditionally-i.i.d. samples from a stored witness. Costs exactly
// n_extra * T single-sample estimator evaluations per batch slot. Particle p
// uses real substream index seed_offset + p, so replaying at the offset of an
// original particle reproduces it bit-exactly.
template <EstimatorSpec Spec>
ReplayResult replay_from_witness(const WitnessPath& witness, std::uint64_t n_extra,
                                 const RunConfig& config, const Spec& spec,
                                 std::uint64_t seed_offset) {
    config.validate();
    const std::uint64_t expected = config_hash(config, Functional(spec));
    if (witness.config_hash != expected)
        throw WitnessMismatchError("replay: witness config hash " + hash_hex(witness.config_hash) +
                                   " does not match " + hash_hex(expected));
    if (witness.steps != config.steps || witness.dim != config.dim ||
        witness.batch_size != config.batch_size)
        throw WitnessMismatchError("replay: witness header does not match config");
    if (uses_xi(spec) && witness.xi_draws.size() != witness.steps)
        throw WitnessMismatchError("replay: witness lacks estimator randomness records");

    const Eigen::Index d = config.dim;
    const std::uint64_t T = config.steps;
    const std::uint64_t B = config.batch_size;
    const double root_eta_sigma = config.sigma * std::sqrt(config.eta);
    const Eigen::VectorXd mean0 = config.initial_mean();

    ReplayResult result;
    result.cloud.positions.resize(d, static_cast<Eigen::Index>(n_extra));
    result.cloud.step_index = T;

    Eigen::VectorXd x(d), g(d), g_acc(d), noise(d);
    for (std::uint64_t p = 0; p < n_extra; ++p) {
        const std::uint64_t index = seed_offset + p;
        NoiseStream init(config.master_seed, {StreamKind::real_init, index, 0});
        init.fill_gaussian(noise);
        x = mean0 + config.init_scale * noise;
        for (std::uint64_t k = 0; k < T; ++k) {
            const std::uint64_t xi_k = uses_xi(spec) ? witness.xi_draws[k] : 0;
            g_acc.setZero();
            for (std::uint64_t b = 0; b < B; ++b) {
                estimate_into(spec, x, witness.diag(k, b), xi_k, g);
                g_acc += g;
                ++result.eval_count;
            }
            g_acc /= static_cast<double>(B);
            NoiseStream z(config.master_seed, {StreamKind::real_noise, index, k});
            z.fill_gaussian(noise);
            x += config.eta * g_acc + root_eta_sigma * noise;
            if (!(x.array().abs() <= kDivergenceBound).all())
                throw DivergenceError("replay: particle " + std::to_string(p) +
                                      " diverged at step " + std::to_string(k + 1));
        }
        result.cloud.positions.col(static_cast<Eigen::Index>(p)) = x;
    }
    return result;
}

inline ReplayResult replay_from_witness(const WitnessPath& witness, std::uint64_t n_extra,
                                        const RunConfig& config, const Functional& functional,
                                        std::uint64_t seed_offset) {
    return std::visit(
        [&](const auto& spec) { return replay_from_witness(witness, n_extra, config, spec, seed_offset); },
        functional);
}

// Interacting-particle baseline: synchronous Euler-Maruyama where every
// particle descends the exact gradient against the current empirical measure.
// The trace counts the inner kernel evaluations (n per gradient call for the
// pairwise functional, giving n^2 per step).
template <EstimatorSpec Spec>
PmkvResult pmkv_run(const RunConfig& config, const Spec& spec, const RunOptions& options = {}) {
    config.validate();
    if (config.particles < 1) throw ConfigError("pmkv_run: need at least one particle");
    if (spec.sigma != config.sigma)
        throw ConfigError("pmkv_run: functional sigma != config sigma");

    const auto start = std::chrono::steady_clock::now();
    const Eigen::Index d = config.dim;
    const std::uint64_t n = config.particles;
    const std::uint64_t T = config.steps;
    const double root_eta_sigma = config.sigma * std::sqrt(config.eta);
    const Eigen::VectorXd mean0 = config.initial_mean();

    PmkvResult result;
    Eigen::MatrixXd positions(d, static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) {
        NoiseStream init(config.master_seed, {StreamKind::baseline_init, i, 0});
        Eigen::VectorXd z(d);
        init.fill_gaussian(z);
        positions.col(static_cast<Eigen::Index>(i)) = mean0 + config.init_scale * z;
    }

    std::uint64_t evals = 0;
    Eigen::MatrixXd next(d, static_cast<Eigen::Index>(n));
    Eigen::VectorXd grad(d), noise(d);
    if (detail::should_record(0, T, options.trace) && T > 0)
        detail::record_row(result.trace, positions, 0, evals, start, options.trace, spec);

    for (std::uint64_t k = 0; k < T; ++k) {
        const ParticleCloud current{positions, k, CloudKind::real};
        // For the regression functional the per-step predictions are shared
        // across particles, so hoist them out of the particle loop.
        [[maybe_unused]] Eigen::VectorXd predictions;
        if constexpr (std::is_same_v<Spec, MfnnSpec>)
            predictions = mfnn_predictions(spec, current, &evals);
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            if constexpr (std::is_same_v<Spec, MfnnSpec>) {
                exact_gradient_with_predictions_into(spec, positions.col(col), predictions, grad,
                                                     &evals);
            } else {
                exact_gradient_into(spec, positions.col(col), current, grad, &evals);
            }
            NoiseStream z(config.master_seed, {StreamKind::baseline_noise, i, k});
            z.fill_gaussian(noise);
            next.col(col) = positions.col(col) - config.eta * grad + root_eta_sigma * noise;
            detail::guard_column(next, col, k + 1);
        }
        positions.swap(next);
        if (detail::should_record(k + 1, T, options.trace) && k + 1 < T)
            detail::record_row(result.trace, positions, k + 1, evals, start, options.trace, spec);
    }

    detail::record_row(result.trace, positions, T, evals, start, options.trace, spec);
    result.trace.final_eval_count = evals;
    result.cloud = ParticleCloud{std::move(positions), T, CloudKind::real};
    return result;
}

inline PmkvResult pmkv_run(const RunConfig& config, const Functional& functional,
                           const RunOptions& options = {}) {
    return std::visit([&](const auto& spec) { return pmkv_run(config, spec, options); }, functional);
}

}  // namespace vpsa
