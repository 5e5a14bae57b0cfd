#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <Eigen/Core>

#include "vpsa/errors.hpp"

namespace vpsa {

// Step-size / step-count schedule derived from the convergence-rate
// statements. Absolute iteration counts are convention-dependent (the rate
// bounds hide universal constants); those constants are surfaced as the
// multipliers below, while the scaling in (epsilon, d, sigma, C_LSI) is fixed.
struct PlannerConstants {
    double c0 = 0.1;         // step-size cap multiplier
    double multiplier = 1.0; // absorbed universal constant on the step count
};

struct SchedulePlan {
    double eta = 0.0;
    std::uint64_t steps = 0;  // T
    double epsilon = 0.0;
    double log_factor = 0.0;  // log(3 * initial_gap / epsilon)
    double eta_cap = 0.0;
    double cap_margin = 0.0;  // eta_cap - eta, > 0 by construction
    // echoed inputs
    double c_lsi = 0.0;
    double sigma = 0.0;
    double dim = 0.0;
    double smoothness = 0.0;    // L_V + L_W, or L_u
    double initial_gap = 0.0;   // KL_0, or E_0
    PlannerConstants constants;
};

namespace detail {

inline SchedulePlan finish_plan(double t_formula, double log_factor, double eta_cap,
                                double c_lsi, double sigma, double epsilon,
                                const PlannerConstants& constants) {
    if (!(eta_cap > 0.0)) throw ConfigError("planner: infeasible epsilon, step-size cap is empty");
    // eta * T * sigma^2 / (8 C_LSI) = log_factor exactly; raise T until eta
    // clears the cap.
    const double eta_unit = 8.0 * c_lsi * log_factor / (sigma * sigma);
    double steps = std::ceil(std::max(1.0, constants.multiplier * t_formula * log_factor));
    if (eta_unit / steps >= eta_cap) steps = std::ceil(std::nextafter(eta_unit / eta_cap, 1e300));
    if (eta_unit / steps >= eta_cap) steps += 1.0;
    if (!(steps < 9e15)) throw ConfigError("planner: infeasible epsilon, step count overflows");

    SchedulePlan plan;
    plan.steps = static_cast<std::uint64_t>(steps);
    plan.eta = eta_unit / steps;
    plan.epsilon = epsilon;
    plan.log_factor = log_factor;
    plan.eta_cap = eta_cap;
    plan.cap_margin = eta_cap - plan.eta;
    plan.c_lsi = c_lsi;
    plan.sigma = sigma;
    plan.constants = constants;
    return plan;
}

}  // namespace detail

// Schedule for the pairwise interaction energy: T is the maximum of the three
// rate expressions times log(3 KL_0 / eps), and eta is chosen so that
// eta T sigma^2 / (8 C_LSI) = log(3 KL_0 / eps), subject to the cap
// eta < c0 min(C_LSI / sigma^2, sigma^4 / (C_LSI^2 (L_V + L_W)^3)).
inline SchedulePlan plan_schedule_pairwise(double c_lsi, double l_v, double l_w, double sigma,
                                           Eigen::Index dim, double epsilon, double kl0,
                                           const PlannerConstants& constants = {}) {
    if (!(c_lsi > 0.0) || !(sigma > 0.0) || !(l_v + l_w > 0.0) || dim < 1)
        throw ConfigError("plan_schedule_pairwise: constants must be positive");
    if (!(kl0 > 0.0)) throw ConfigError("plan_schedule_pairwise: KL_0 must be positive");
    if (!(epsilon > 0.0) || !(epsilon < 3.0 * std::min(kl0, 1.0)))
        throw ConfigError("plan_schedule_pairwise: need epsilon in (0, 3 min(KL_0, 1))");

    const double d = static_cast<double>(dim);
    const double l = l_v + l_w;
    const double log_factor = std::log(3.0 * kl0 / epsilon);
    const double t1 = c_lsi * c_lsi * d * d * d * l * l / (epsilon * epsilon);
    const double t2 = c_lsi * c_lsi * d * d * l * l / (sigma * sigma * epsilon);
    const double t3 = c_lsi * c_lsi * c_lsi * l * l * l / std::pow(sigma, 6);
    const double eta_cap = constants.c0 * std::min(c_lsi / (sigma * sigma),
                                                   std::pow(sigma, 4) / (c_lsi * c_lsi * l * l * l));

    SchedulePlan plan = detail::finish_plan(std::max({t1, t2, t3}), log_factor, eta_cap, c_lsi,
                                            sigma, epsilon, constants);
    plan.dim = d;
    plan.smoothness = l;
    plan.initial_gap = kl0;
    return plan;
}

// Schedule for the mean-field regression functional, in terms of the combined
// smoothness L_u = (B + R) L R + lambda + M^2 R^2 and the initial energy gap.
inline SchedulePlan plan_schedule_mfnn(double c_lsi, double l_u, double sigma, Eigen::Index dim,
                                       double epsilon, double e0, double bound_m, double radius,
                                       double bound_b, const PlannerConstants& constants = {}) {
    if (!(c_lsi > 0.0) || !(sigma > 0.0) || !(l_u > 0.0) || dim < 1 || !(bound_m > 0.0) ||
        !(radius > 0.0) || !(bound_b > 0.0))
        throw ConfigError("plan_schedule_mfnn: constants must be positive");
    if (!(e0 > 0.0)) throw ConfigError("plan_schedule_mfnn: E_0 must be positive");
    if (!(epsilon > 0.0) || !(epsilon < 3.0 * std::min(e0, 1.0)))
        throw ConfigError("plan_schedule_mfnn: need epsilon in (0, 3 min(E_0, 1))");

    const double d = static_cast<double>(dim);
    const double s2 = sigma * sigma;
    const double noise2 = bound_m * bound_m * radius * radius * (bound_b + radius) *
                          (bound_b + radius);  // M^2 R^2 (B + R)^2
    const double log_factor = std::log(3.0 * e0 / epsilon);
    const double t1 =
        std::pow(c_lsi, 3) * d * d * l_u * l_u * noise2 / (s2 * s2 * epsilon * epsilon);
    const double t2 =
        c_lsi * c_lsi * (s2 * l_u * l_u * d + l_u * noise2) / (s2 * s2 * epsilon);
    const double t3 = std::pow(l_u, 3) * std::pow(c_lsi, 3) / std::pow(sigma, 6);
    const double eta_cap =
        constants.c0 * std::min(c_lsi / s2, s2 * s2 / (c_lsi * c_lsi * std::pow(l_u, 3)));

    SchedulePlan plan = detail::finish_plan(std::max({t1, t2, t3}), log_factor, eta_cap, c_lsi,
                                            sigma, epsilon, constants);
    plan.dim = d;
    plan.smoothness = l_u;
    plan.initial_gap = e0;
    return plan;
}

// Combined smoothness constant of the regression estimator.
inline double mfnn_combined_smoothness(double bound_b, double radius, double smoothness,
                                       double lambda, double bound_m) {
    return (bound_b + radius) * smoothness * radius + lambda + bound_m * bound_m * radius * radius;
}

}  // namespace vpsa
