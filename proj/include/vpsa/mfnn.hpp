#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vpsa/errors.hpp"
#include "vpsa/noise.hpp"
#include "vpsa/types.hpp"

namespace vpsa {

// Two-layer mean-field regression with square loss on an m-point dataset:
// the network output is f(mu; z) = mean over particles of h(x, z) with
// activation h(x, z) = amplitude * tanh(<x, z>), plus a ridge term
// (lambda/2) * mean |x|^2. The estimator randomness is a uniform data index.
//
// Declared constants (per-probe checked, not assumed):
//   bound_b:    |h| <= bound_b                  (= amplitude for tanh)
//   bound_m:    |grad_x h| <= bound_m * |z|     (= amplitude for tanh)
//   radius:     |z_i| <= radius and |w_i| <= radius for all data points
//   smoothness: x -> grad_x h(x, z) is smoothness * |z| Lipschitz
struct MfnnSpec {
    Eigen::MatrixXd features;  // d x m, column i = z_i
    Eigen::VectorXd labels;    // m
    double amplitude = 1.0;    // B0
    double lambda = 0.0;
    double sigma = 1.0;
    double bound_b = 1.0;
    double bound_m = 1.0;
    double radius = 1.0;
    double smoothness = 1.0;

    // For tanh the sharp constant of x -> grad_x h is amplitude * c * |z|^2
    // with c = max |tanh''| = 4/(3 sqrt 3); |z| <= radius gives this default.
    static double default_smoothness(double amplitude, double radius) {
        return amplitude * radius * 4.0 / (3.0 * std::sqrt(3.0));
    }

    static MfnnSpec make(Eigen::MatrixXd features, Eigen::VectorXd labels, double amplitude,
                         double lambda, double sigma, double radius,
                         std::optional<double> smoothness = std::nullopt) {
        MfnnSpec spec;
        spec.features = std::move(features);
        spec.labels = std::move(labels);
        spec.amplitude = amplitude;
        spec.lambda = lambda;
        spec.sigma = sigma;
        spec.bound_b = amplitude;
        spec.bound_m = amplitude;
        spec.radius = radius;
        spec.smoothness = smoothness.value_or(default_smoothness(amplitude, radius));
        spec.validate();
        return spec;
    }

    Eigen::Index dim() const { return features.rows(); }
    Eigen::Index data_count() const { return features.cols(); }

    double h(Eigen::Ref<const Eigen::VectorXd> x, Eigen::Index i) const {
        return amplitude * std::tanh(features.col(i).dot(x));
    }
    void grad_h_into(Eigen::Ref<const Eigen::VectorXd> x, Eigen::Index i, double factor,
                     Eigen::VectorXd& out) const {
        const double t = std::tanh(features.col(i).dot(x));
        out.noalias() += (factor * amplitude * (1.0 - t * t)) * features.col(i);
    }

    void validate() const {
        if (data_count() < 1) throw ConfigError("MfnnSpec: dataset must be nonempty");
        if (labels.size() != data_count())
            throw ConfigError("MfnnSpec: feature/label count mismatch");
        if (!(amplitude > 0.0)) throw ConfigError("MfnnSpec: amplitude must be positive");
        if (!(lambda >= 0.0)) throw ConfigError("MfnnSpec: lambda must be >= 0");
        if (!(radius > 0.0)) throw ConfigError("MfnnSpec: radius must be positive");
        if (!(smoothness > 0.0)) throw ConfigError("MfnnSpec: declared smoothness must be positive");
        std::vector<Eigen::Index> bad;
        for (Eigen::Index i = 0; i < data_count(); ++i) {
            const bool ok = features.col(i).norm() <= radius * (1.0 + 1e-12) &&
                            std::abs(labels[i]) <= radius * (1.0 + 1e-12);
            if (!ok) bad.push_back(i);
        }
        if (!bad.empty()) {
            std::ostringstream msg;
            msg << "MfnnSpec: rows violating |z| <= R or |w| <= R (0-based):";
            for (auto i : bad) msg << ' ' << i;
            throw ConfigError(msg.str());
        }
    }
};

// G_hat(x, y, i) = -2 (h(z_i, y) - w_i) grad_x h(z_i, x) - lambda x.
// The factor 2 makes the expectation over (y, i) equal the negated exact
// empirical gradient as a finite-sum identity.
inline void estimate_into(const MfnnSpec& spec, Eigen::Ref<const Eigen::VectorXd> x,
                          Eigen::Ref<const Eigen::VectorXd> y, std::uint64_t xi,
                          Eigen::VectorXd& out) {
    const auto i = static_cast<Eigen::Index>(xi);
    const double residual = spec.h(y, i) - spec.labels[i];
    out = (-spec.lambda) * x;
    spec.grad_h_into(x, i, -2.0 * residual, out);
}

inline Eigen::VectorXd mfnn_estimate(const MfnnSpec& spec, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y, Eigen::Index i) {
    if (i < 0 || i >= spec.data_count()) throw ConfigError("mfnn_estimate: data index out of range");
    if (x.size() != spec.dim() || y.size() != spec.dim())
        throw ConfigError("mfnn_estimate: dimension mismatch");
    Eigen::VectorXd out(x.size());
    estimate_into(spec, x, y, static_cast<std::uint64_t>(i), out);
    return out;
}

inline std::uint64_t draw_xi(const MfnnSpec& spec, NoiseStream& stream) {
    return stream.next_below(static_cast<std::uint64_t>(spec.data_count()));
}
inline constexpr bool uses_xi(const MfnnSpec&) { return true; }

// Network predictions f(mu_hat; z_i) for every data point. n*m activation
// evaluations, counted when a counter is supplied.
inline Eigen::VectorXd mfnn_predictions(const MfnnSpec& spec, const ParticleCloud& cloud,
                                        std::uint64_t* kernel_evals = nullptr) {
    if (cloud.size() == 0) throw ConfigError("mfnn_predictions: empty cloud");
    const Eigen::Index n = cloud.size();
    const Eigen::Index m = spec.data_count();
    // tanh(z^T x) for the full data-particle grid.
    Eigen::MatrixXd inner = spec.features.transpose() * cloud.positions;  // m x n
    Eigen::VectorXd preds =
        spec.amplitude * inner.array().tanh().rowwise().mean().matrix();
    if (kernel_evals) *kernel_evals += static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(m);
    return preds;
}

// (2/m) sum_i (f(mu_hat; z_i) - w_i) grad_x h(z_i, x) + lambda x, for a
// precomputed prediction vector.
inline void exact_gradient_with_predictions_into(const MfnnSpec& spec,
                                                 Eigen::Ref<const Eigen::VectorXd> x,
                                                 const Eigen::VectorXd& predictions,
                                                 Eigen::VectorXd& out,
                                                 std::uint64_t* kernel_evals = nullptr) {
    const Eigen::Index m = spec.data_count();
    out = spec.lambda * x;
    for (Eigen::Index i = 0; i < m; ++i)
        spec.grad_h_into(x, i, 2.0 * (predictions[i] - spec.labels[i]) / static_cast<double>(m), out);
    if (kernel_evals) *kernel_evals += static_cast<std::uint64_t>(m);
}

inline void exact_gradient_into(const MfnnSpec& spec, Eigen::Ref<const Eigen::VectorXd> x,
                                const ParticleCloud& cloud, Eigen::VectorXd& out,
                                std::uint64_t* kernel_evals = nullptr) {
    const Eigen::VectorXd preds = mfnn_predictions(spec, cloud, kernel_evals);
    exact_gradient_with_predictions_into(spec, x, preds, out, kernel_evals);
}

inline Eigen::VectorXd mfnn_exact_gradient(const MfnnSpec& spec, const Eigen::VectorXd& x,
                                           const ParticleCloud& cloud,
                                           std::uint64_t* kernel_evals = nullptr) {
    Eigen::VectorXd out(x.size());
    exact_gradient_into(spec, x, cloud, out, kernel_evals);
    return out;
}

struct MfnnEnergy {
    double loss = 0.0;   // (1/m) sum_i (f(mu_hat; z_i) - w_i)^2
    double ridge = 0.0;  // (lambda/2) mean |x_j|^2
    std::optional<double> entropy_estimate;
};

inline MfnnEnergy mfnn_energy(const MfnnSpec& spec, const ParticleCloud& cloud) {
    if (cloud.size() == 0) throw ConfigError("mfnn_energy: empty cloud");
    MfnnEnergy e;
    const Eigen::VectorXd preds = mfnn_predictions(spec, cloud);
    e.loss = (preds - spec.labels).squaredNorm() / static_cast<double>(spec.data_count());
    e.ridge = 0.5 * spec.lambda * cloud.positions.colwise().squaredNorm().mean();
    return e;
}

}  // namespace vpsa
