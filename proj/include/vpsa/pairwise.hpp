#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>

#include <Eigen/Core>

#include "vpsa/errors.hpp"
#include "vpsa/noise.hpp"
#include "vpsa/types.hpp"

namespace vpsa {

// Pairwise interaction energy: external potential V plus interaction W (even),
//   mean V(x) over the measure + (1/2) double integral of W(x - y).
// The quadratic case V(x) = lambda_v |x|^2 / 2, W(v) = alpha |v|^2 / 2 is the
// exactly solvable one; general smooth potentials come as gradient callables
// with declared smoothness constants.
struct PairwiseSpec {
    struct Quadratic {
        double coeff;  // V = coeff*|x|^2/2, gradient coeff*x
    };
    struct Smooth {
        std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
        std::function<double(const Eigen::VectorXd&)> value;  // optional, needed for energies
        double lipschitz;                                     // declared smoothness constant
    };
    using Potential = std::variant<Quadratic, Smooth>;

    Potential potential;
    Potential interaction;
    double sigma = 1.0;
    Eigen::Index dim = 1;

    static PairwiseSpec quadratic(double lambda_v, double alpha, double sigma, Eigen::Index dim) {
        PairwiseSpec spec;
        spec.potential = Quadratic{lambda_v};
        spec.interaction = Quadratic{alpha};
        spec.sigma = sigma;
        spec.dim = dim;
        spec.validate();
        return spec;
    }

    bool is_quadratic() const {
        return std::holds_alternative<Quadratic>(potential) &&
               std::holds_alternative<Quadratic>(interaction);
    }
    double lambda_v() const {
        if (!std::holds_alternative<Quadratic>(potential))
            throw ConfigError("PairwiseSpec: potential is not quadratic");
        return std::get<Quadratic>(potential).coeff;
    }
    double alpha() const {
        if (!std::holds_alternative<Quadratic>(interaction))
            throw ConfigError("PairwiseSpec: interaction is not quadratic");
        return std::get<Quadratic>(interaction).coeff;
    }

    // Declared smoothness constants L_V, L_W (the quadratic coefficient is its
    // own Lipschitz constant).
    double l_v() const {
        return std::holds_alternative<Quadratic>(potential)
                   ? std::abs(std::get<Quadratic>(potential).coeff)
                   : std::get<Smooth>(potential).lipschitz;
    }
    double l_w() const {
        return std::holds_alternative<Quadratic>(interaction)
                   ? std::abs(std::get<Quadratic>(interaction).coeff)
                   : std::get<Smooth>(interaction).lipschitz;
    }

    void validate() const {
        if (dim < 1) throw ConfigError("PairwiseSpec: dim must be >= 1");
        if (!(sigma >= 0.0)) throw ConfigError("PairwiseSpec: sigma must be >= 0");
        if (const auto* s = std::get_if<Smooth>(&potential)) {
            if (!s->gradient) throw ConfigError("PairwiseSpec: smooth potential needs a gradient");
            if (!(s->lipschitz > 0.0))
                throw ConfigError("PairwiseSpec: declared L_V must be positive");
        }
        if (const auto* s = std::get_if<Smooth>(&interaction)) {
            if (!s->gradient) throw ConfigError("PairwiseSpec: smooth interaction needs a gradient");
            if (!(s->lipschitz > 0.0))
                throw ConfigError("PairwiseSpec: declared L_W must be positive");
        }
    }
};

namespace detail {

inline void add_potential_gradient(const PairwiseSpec::Potential& p,
                                   Eigen::Ref<const Eigen::VectorXd> at, double factor,
                                   Eigen::VectorXd& out) {
    if (const auto* q = std::get_if<PairwiseSpec::Quadratic>(&p)) {
        out.noalias() += (factor * q->coeff) * at;
    } else {
        out.noalias() += factor * std::get<PairwiseSpec::Smooth>(p).gradient(at);
    }
}

inline double potential_value(const PairwiseSpec::Potential& p,
                              Eigen::Ref<const Eigen::VectorXd> at) {
    if (const auto* q = std::get_if<PairwiseSpec::Quadratic>(&p)) {
        return 0.5 * q->coeff * at.squaredNorm();
    }
    const auto& s = std::get<PairwiseSpec::Smooth>(p);
    if (!s.value) throw ConfigError("PairwiseSpec: energy needs a value callable for smooth potentials");
    return s.value(at);
}

}  // namespace detail

// Velocity-field estimator: out = -grad V(x) - grad W(x - y). Needs no
// auxiliary randomness, so the xi argument of the generic contract is unused.
inline void estimate_into(const PairwiseSpec& spec, Eigen::Ref<const Eigen::VectorXd> x,
                          Eigen::Ref<const Eigen::VectorXd> y, std::uint64_t /*xi*/,
                          Eigen::VectorXd& out) {
    out.setZero();
    detail::add_potential_gradient(spec.potential, x, -1.0, out);
    if (const auto* q = std::get_if<PairwiseSpec::Quadratic>(&spec.interaction)) {
        out.noalias() -= q->coeff * (x - y);
    } else {
        out.noalias() -= std::get<PairwiseSpec::Smooth>(spec.interaction).gradient(x - y);
    }
}

inline Eigen::VectorXd pairwise_estimate(const PairwiseSpec& spec, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y) {
    if (x.size() != y.size() || x.size() != spec.dim)
        throw ConfigError("pairwise_estimate: dimension mismatch");
    Eigen::VectorXd out(x.size());
    estimate_into(spec, x, y, 0, out);
    return out;
}

inline std::uint64_t draw_xi(const PairwiseSpec&, NoiseStream&) { return 0; }
inline constexpr bool uses_xi(const PairwiseSpec&) { return false; }

// Gradient of the energy against the empirical measure of the cloud:
//   grad V(x) + mean_j grad W(x - y_j).
// The baseline drift is the negation of this. Counts one interaction-gradient
// evaluation per cloud member when a counter is supplied.
inline void exact_gradient_into(const PairwiseSpec& spec, Eigen::Ref<const Eigen::VectorXd> x,
                                const ParticleCloud& cloud, Eigen::VectorXd& out,
                                std::uint64_t* interaction_evals = nullptr) {
    if (cloud.size() == 0) throw ConfigError("pairwise_exact_gradient: empty cloud");
    const Eigen::Index n = cloud.size();
    out.setZero();
    if (const auto* q = std::get_if<PairwiseSpec::Quadratic>(&spec.interaction)) {
        // grad W(v) = coeff * v, accumulated pair by pair.
        for (Eigen::Index j = 0; j < n; ++j) out.noalias() += x - cloud.positions.col(j);
        out *= q->coeff / static_cast<double>(n);
    } else {
        const auto& grad_w = std::get<PairwiseSpec::Smooth>(spec.interaction).gradient;
        for (Eigen::Index j = 0; j < n; ++j) out.noalias() += grad_w(x - cloud.positions.col(j));
        out /= static_cast<double>(n);
    }
    if (interaction_evals) *interaction_evals += static_cast<std::uint64_t>(n);
    detail::add_potential_gradient(spec.potential, x, 1.0, out);
}

inline Eigen::VectorXd pairwise_exact_gradient(const PairwiseSpec& spec, const Eigen::VectorXd& x,
                                               const ParticleCloud& cloud,
                                               std::uint64_t* interaction_evals = nullptr) {
    Eigen::VectorXd out(x.size());
    exact_gradient_into(spec, x, cloud, out, interaction_evals);
    return out;
}

struct PairwiseEnergy {
    double v_part = 0.0;
    double w_part = 0.0;
    std::optional<double> entropy_estimate;  // filled by callers with a Gaussian plug-in
};

// v_part = mean V(x_i); w_part = (1/2) mean over ordered pairs of W(x_i - x_j),
// diagonal terms included to match the double integral against the empirical
// product measure.
inline PairwiseEnergy pairwise_energy(const PairwiseSpec& spec, const ParticleCloud& cloud) {
    const Eigen::Index n = cloud.size();
    if (n == 0) throw ConfigError("pairwise_energy: empty cloud");
    PairwiseEnergy e;
    for (Eigen::Index i = 0; i < n; ++i)
        e.v_part += detail::potential_value(spec.potential, cloud.positions.col(i));
    e.v_part /= static_cast<double>(n);

    double w_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            w_sum += detail::potential_value(spec.interaction,
                                             cloud.positions.col(i) - cloud.positions.col(j));
    e.w_part = 0.5 * w_sum / static_cast<double>(n * n);
    return e;
}

}  // namespace vpsa
