#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpsa/dynamics.hpp"
#include "vpsa/functional.hpp"

namespace vpsa {

struct DiagnosticCheck {
    std::string name;
    bool pass = false;
    double statistic = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct DiagnosticReport {
    std::string kind;
    std::vector<DiagnosticCheck> checks;

    bool overall() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = "vpsa-report-v1";
        j["kind"] = kind;
        j["overall_pass"] = overall();
        j["checks"] = nlohmann::json::array();
        for (const auto& c : checks)
            j["checks"].push_back({{"name", c.name},
                                   {"pass", c.pass},
                                   {"statistic", c.statistic},
                                   {"threshold", c.threshold},
                                   {"detail", c.detail}});
        return j;
    }
};

// Mean of the estimator over the full empirical support: every cloud member
// for the pairwise case, every (cloud member, data index) pair for the
// regression case. Equals the negated exact empirical gradient as a finite
// sum, which is the identity the unbiasedness checks assert.
inline Eigen::VectorXd estimator_support_mean(const Functional& functional,
                                              const Eigen::VectorXd& x,
                                              const ParticleCloud& cloud) {
    if (cloud.size() == 0) throw ConfigError("estimator_support_mean: empty cloud");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd g(x.size());
    std::uint64_t terms = 0;
    std::visit([&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, PairwiseSpec>) {
            for (Eigen::Index j = 0; j < cloud.size(); ++j) {
                estimate_into(spec, x, cloud.positions.col(j), 0, g);
                acc += g;
                ++terms;
            }
        } else {
            for (Eigen::Index j = 0; j < cloud.size(); ++j) {
                for (Eigen::Index i = 0; i < spec.data_count(); ++i) {
                    estimate_into(spec, x, cloud.positions.col(j),
                                  static_cast<std::uint64_t>(i), g);
                    acc += g;
                    ++terms;
                }
            }
        }
    }, functional);
    return acc / static_cast<double>(terms);
}

// Structural and statistical checks of the conditional i.i.d. property.
//   - re-derives `repeats` particles from the witness with matching
//     substreams and requires bit-equality;
//   - requires pairwise-distinct particle positions (a reused substream
//     duplicates a particle, which a continuous law cannot produce);
//   - across the particle index, lag-0 and lag-1 sample correlations of
//     coordinates must stay below 4/sqrt(n) for 95% of coordinate pairs.
inline DiagnosticReport independence_report(const VpsaResult& result, const RunConfig& config,
                                            const Functional& functional, std::uint64_t repeats) {
    if (repeats < 2) throw ConfigError("independence_report: repeats must be >= 2");
    if (result.witness.diagonal.empty()) throw ConfigError("independence_report: missing witness");
    DiagnosticReport report;
    report.kind = "independence";

    const Eigen::Index n = result.cloud.size();
    const Eigen::Index d = result.cloud.dim();

    {
        const auto count = std::min<std::uint64_t>(repeats, static_cast<std::uint64_t>(n));
        bool all_equal = true;
        std::string detail = "re-derived " + std::to_string(count) + " particles";
        for (std::uint64_t r = 0; r < count; ++r) {
            const auto replayed =
                replay_from_witness(result.witness, 1, config, functional, result.substreams[r]);
            if (replayed.cloud.positions.col(0) != result.cloud.positions.col(static_cast<Eigen::Index>(r))) {
                all_equal = false;
                detail = "particle " + std::to_string(r) + " does not match its witness replay";
                break;
            }
        }
        report.checks.push_back({"structural_replay_bit_equality", all_equal,
                                 all_equal ? 1.0 : 0.0, 1.0, detail});
    }
    {
        bool distinct = true;
        std::string detail = "all particle positions pairwise distinct";
        for (Eigen::Index i = 0; i + 1 < n && distinct; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j)
                if (result.cloud.positions.col(i) == result.cloud.positions.col(j)) {
                    distinct = false;
                    detail = "particles " + std::to_string(i) + " and " + std::to_string(j) +
                             " are bit-identical (substream reuse?)";
                    break;
                }
        report.checks.push_back({"structural_distinct_particles", distinct, distinct ? 1.0 : 0.0,
                                 1.0, detail});
    }

    if (n >= 8) {
        const double threshold = 4.0 / std::sqrt(static_cast<double>(n));
        const Eigen::MatrixXd& p = result.cloud.positions;
        const Eigen::VectorXd mean = p.rowwise().mean();
        Eigen::VectorXd sd(d);
        for (Eigen::Index r = 0; r < d; ++r)
            sd[r] = std::sqrt((p.row(r).array() - mean[r]).square().sum() /
                              static_cast<double>(n - 1));
        std::uint64_t pairs = 0, below = 0;
        double worst = 0.0;
        auto tally = [&](double corr) {
            ++pairs;
            if (std::abs(corr) < threshold) ++below;
            worst = std::max(worst, std::abs(corr));
        };
        // lag-0 cross-coordinate correlations
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = a + 1; b < d; ++b) {
                const double cov = ((p.row(a).array() - mean[a]) * (p.row(b).array() - mean[b]))
                                       .sum() / static_cast<double>(n - 1);
                tally(cov / (sd[a] * sd[b]));
            }
        // lag-1 correlations across the particle index (all coordinate pairs)
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = 0; b < d; ++b) {
                double cov = 0.0;
                for (Eigen::Index i = 0; i + 1 < n; ++i)
                    cov += (p(a, i) - mean[a]) * (p(b, i + 1) - mean[b]);
                cov /= static_cast<double>(n - 1);
                tally(cov / (sd[a] * sd[b]));
            }
        const double fraction = pairs > 0 ? static_cast<double>(below) / static_cast<double>(pairs)
                                          : 1.0;
        report.checks.push_back({"cross_particle_correlation", fraction >= 0.95, fraction, 0.95,
                                 std::to_string(below) + "/" + std::to_string(pairs) +
                                     " pairs below 4/sqrt(n) = " + std::to_string(threshold) +
                                     ", worst |corr| = " + std::to_string(worst)});
    } else {
        report.checks.push_back({"cross_particle_correlation", true, 1.0, 0.95,
                                 "vacuous for n < 8"});
    }
    return report;
}

// Finite-sum unbiasedness identity at tolerance 1e-12 (scale-relative per
// coordinate) plus Monte-Carlo consistency of the sampled estimator within
// 5 standard errors.
inline DiagnosticReport unbiasedness_report(const Eigen::VectorXd& x, const Functional& functional,
                                            const ParticleCloud& cloud, std::uint64_t draws,
                                            std::uint64_t seed) {
    DiagnosticReport report;
    report.kind = "unbiasedness";
    const Eigen::Index d = x.size();

    const Eigen::VectorXd support_mean = estimator_support_mean(functional, x, cloud);
    Eigen::VectorXd exact(d);
    std::visit([&](const auto& spec) { exact_gradient_into(spec, x, cloud, exact, nullptr); },
               functional);

    double worst_rel = 0.0;
    for (Eigen::Index r = 0; r < d; ++r) {
        const double scale = std::max({1.0, std::abs(exact[r]), std::abs(support_mean[r])});
        worst_rel = std::max(worst_rel, std::abs(support_mean[r] + exact[r]) / scale);
    }
    report.checks.push_back({"finite_sum_identity", worst_rel <= 1e-12, worst_rel, 1e-12,
                             "max per-coordinate relative deviation of mean(G_hat) vs -gradient"});

    if (draws > 1) {
        NoiseStream stream(seed, {StreamKind::probe, 3, 0});
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd g(d);
        const auto n = static_cast<std::uint64_t>(cloud.size());
        for (std::uint64_t t = 0; t < draws; ++t) {
            const auto j = static_cast<Eigen::Index>(stream.next_below(n));
            std::visit([&](const auto& spec) {
                const std::uint64_t xi = draw_xi(spec, stream);
                estimate_into(spec, x, cloud.positions.col(j), xi, g);
            }, functional);
            sum += g;
            sum_sq += g.cwiseProduct(g);
        }
        const double dn = static_cast<double>(draws);
        bool pass = true;
        double worst_z = 0.0;
        for (Eigen::Index r = 0; r < d; ++r) {
            const double mc_mean = sum[r] / dn;
            const double var = std::max(0.0, sum_sq[r] / dn - mc_mean * mc_mean);
            const double se = std::sqrt(var / dn) + 1e-300;
            const double z = std::abs(mc_mean + exact[r]) / se;
            worst_z = std::max(worst_z, z);
            if (z > 5.0) pass = false;
        }
        report.checks.push_back({"monte_carlo_consistency", pass, worst_z, 5.0,
                                 "max |z| over coordinates at " + std::to_string(draws) +
                                     " draws"});
    }
    return report;
}

// Empirical variance (trace over coordinates) of the batch-B estimator at a
// fixed probe point, with witnesses resampled uniformly from the cloud and
// fresh estimator randomness per draw.
inline double batched_estimator_variance(const Functional& functional, const Eigen::VectorXd& x,
                                         const ParticleCloud& cloud, std::uint64_t batch_size,
                                         std::uint64_t draws, std::uint64_t seed) {
    if (cloud.size() == 0) throw ConfigError("batched_estimator_variance: empty cloud");
    if (batch_size < 1 || draws < 2)
        throw ConfigError("batched_estimator_variance: need batch_size >= 1 and draws >= 2");
    const Eigen::Index d = x.size();
    NoiseStream stream(seed, {StreamKind::probe, 4, batch_size});
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd g(d), acc(d);
    const auto n = static_cast<std::uint64_t>(cloud.size());
    for (std::uint64_t t = 0; t < draws; ++t) {
        std::visit([&](const auto& spec) {
            const std::uint64_t xi = draw_xi(spec, stream);  // shared across the batch
            acc.setZero();
            for (std::uint64_t b = 0; b < batch_size; ++b) {
                const auto j = static_cast<Eigen::Index>(stream.next_below(n));
                estimate_into(spec, x, cloud.positions.col(j), xi, g);
                acc += g;
            }
            acc /= static_cast<double>(batch_size);
        }, functional);
        sum += acc;
        sum_sq += acc.cwiseProduct(acc);
    }
    const double dn = static_cast<double>(draws);
    double var_trace = 0.0;
    for (Eigen::Index r = 0; r < d; ++r) {
        const double mean = sum[r] / dn;
        var_trace += std::max(0.0, (sum_sq[r] / dn - mean * mean) * dn / (dn - 1.0));
    }
    return var_trace;
}

}  // namespace vpsa
