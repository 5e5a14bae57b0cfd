#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpsa/functional.hpp"
#include "vpsa/noise.hpp"
#include "vpsa/oracle.hpp"

namespace vpsa {

struct AssumptionCheck {
    std::string name;
    bool pass = false;
    double margin = 0.0;  // slack toward the failure boundary (negative on failure)
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;

    bool overall() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = "vpsa-report-v1";
        j["kind"] = "assumptions";
        j["overall_pass"] = overall();
        j["checks"] = nlohmann::json::array();
        for (const auto& c : checks)
            j["checks"].push_back({{"name", c.name},
                                   {"pass", c.pass},
                                   {"margin", c.margin},
                                   {"detail", c.detail}});
        return j;
    }
};

// Configuration-level checks for the pairwise functional: positive declared
// smoothness, an odd interaction gradient (spot-checked), and the weak
// interaction condition L_W <= sigma^2 / (4 C_LSI). For non-quadratic specs a
// C_LSI estimate must be supplied by the caller; the quadratic one is exact.
inline AssumptionReport check_assumptions(const PairwiseSpec& spec,
                                          std::optional<double> c_lsi = std::nullopt,
                                          std::uint64_t probe_seed = 0) {
    AssumptionReport report;
    const double l_v = spec.l_v();
    const double l_w = spec.l_w();
    report.checks.push_back({"smoothness_declared", l_v >= 0.0 && l_w >= 0.0,
                             std::min(l_v, l_w),
                             "L_V = " + std::to_string(l_v) + ", L_W = " + std::to_string(l_w)});

    // grad W must be odd (W even). Spot-check on random probes.
    {
        NoiseStream probe(probe_seed, {StreamKind::probe, 1, 0});
        double worst = 0.0;
        for (int rep = 0; rep < 16; ++rep) {
            Eigen::VectorXd v(spec.dim);
            probe.fill_gaussian(v);
            Eigen::VectorXd g_plus(spec.dim), g_minus(spec.dim);
            g_plus.setZero();
            g_minus.setZero();
            detail::add_potential_gradient(spec.interaction, v, 1.0, g_plus);
            detail::add_potential_gradient(spec.interaction, -v, 1.0, g_minus);
            worst = std::max(worst, (g_plus + g_minus).norm() / std::max(1.0, g_plus.norm()));
        }
        report.checks.push_back({"interaction_gradient_odd", worst <= 1e-9, 1e-9 - worst,
                                 "max relative asymmetry " + std::to_string(worst)});
    }

    std::optional<double> c = c_lsi;
    if (!c && spec.is_quadratic() && spec.lambda_v() + spec.alpha() > 0.0 && spec.sigma > 0.0)
        c = quadratic_lsi_constant(spec);
    if (c) {
        const double cap = spec.sigma * spec.sigma / (4.0 * *c);
        report.checks.push_back({"weak_interaction", l_w <= cap, cap - l_w,
                                 "L_W = " + std::to_string(l_w) + " vs sigma^2/(4 C_LSI) = " +
                                     std::to_string(cap) + " with C_LSI = " + std::to_string(*c)});
    } else {
        report.checks.push_back({"weak_interaction", false, 0.0,
                                 "no C_LSI estimate available; supply one for non-quadratic specs"});
    }
    return report;
}

// Dataset bounds plus random probes of the declared activation constants:
// |h| <= B and |grad_x h| <= M |z|. The proximal-Gibbs LSI constant is user
// input and only echoed here.
inline AssumptionReport check_assumptions(const MfnnSpec& spec,
                                          std::optional<double> c_lsi = std::nullopt,
                                          std::uint64_t probe_seed = 0) {
    AssumptionReport report;
    double worst_z = 0.0, worst_w = 0.0;
    for (Eigen::Index i = 0; i < spec.data_count(); ++i) {
        worst_z = std::max(worst_z, spec.features.col(i).norm());
        worst_w = std::max(worst_w, std::abs(spec.labels[i]));
    }
    report.checks.push_back({"dataset_feature_bound", worst_z <= spec.radius * (1.0 + 1e-12),
                             spec.radius - worst_z,
                             "max |z| = " + std::to_string(worst_z) + " vs R = " +
                                 std::to_string(spec.radius)});
    report.checks.push_back({"dataset_label_bound", worst_w <= spec.radius * (1.0 + 1e-12),
                             spec.radius - worst_w,
                             "max |w| = " + std::to_string(worst_w) + " vs R = " +
                                 std::to_string(spec.radius)});

    NoiseStream probe(probe_seed, {StreamKind::probe, 2, 0});
    double worst_h = 0.0, worst_grad = 0.0;
    Eigen::VectorXd x(spec.dim()), g(spec.dim());
    for (int rep = 0; rep < 64; ++rep) {
        probe.fill_gaussian(x);
        x *= 3.0;
        const auto i = static_cast<Eigen::Index>(probe.next_below(
            static_cast<std::uint64_t>(spec.data_count())));
        worst_h = std::max(worst_h, std::abs(spec.h(x, i)));
        g.setZero();
        spec.grad_h_into(x, i, 1.0, g);
        const double z_norm = spec.features.col(i).norm();
        if (z_norm > 0.0) worst_grad = std::max(worst_grad, g.norm() / z_norm);
    }
    report.checks.push_back({"activation_bound", worst_h <= spec.bound_b * (1.0 + 1e-12),
                             spec.bound_b - worst_h,
                             "max |h| probed = " + std::to_string(worst_h) + " vs B = " +
                                 std::to_string(spec.bound_b)});
    report.checks.push_back({"activation_gradient_bound",
                             worst_grad <= spec.bound_m * (1.0 + 1e-12), spec.bound_m - worst_grad,
                             "max |grad h|/|z| probed = " + std::to_string(worst_grad) + " vs M = " +
                                 std::to_string(spec.bound_m)});
    report.checks.push_back(
        {"smoothness_declared", spec.smoothness > 0.0, spec.smoothness,
         "L = " + std::to_string(spec.smoothness) + " (tanh default " +
             std::to_string(MfnnSpec::default_smoothness(spec.amplitude, spec.radius)) + ")"});
    if (c_lsi) {
        report.checks.push_back({"proximal_gibbs_lsi_supplied", *c_lsi > 0.0, *c_lsi,
                                 "user-supplied C_LSI = " + std::to_string(*c_lsi) +
                                     " (not verifiable here)"});
    }
    return report;
}

inline AssumptionReport check_assumptions(const Functional& functional,
                                          std::optional<double> c_lsi = std::nullopt,
                                          std::uint64_t probe_seed = 0) {
    return std::visit([&](const auto& spec) { return check_assumptions(spec, c_lsi, probe_seed); },
                      functional);
}

}  // namespace vpsa
