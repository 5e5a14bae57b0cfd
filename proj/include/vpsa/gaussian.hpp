#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "vpsa/errors.hpp"
#include "vpsa/types.hpp"

namespace vpsa {

// Mean and covariance pair. The covariance is symmetrized on construction and
// eigenvalues are required to be >= -1e-10 (then clipped to zero), guarding
// against numerical drift in downstream Cholesky factorizations.
struct GaussianSummary {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    GaussianSummary() = default;
    GaussianSummary(Eigen::VectorXd mean_in, Eigen::MatrixXd cov_in)
        : mean(std::move(mean_in)), covariance(std::move(cov_in)) {
        if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size())
            throw ConfigError("GaussianSummary: shape mismatch");
        covariance = 0.5 * (covariance + covariance.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
        if (eig.eigenvalues().minCoeff() < -1e-10)
            throw ConfigError("GaussianSummary: covariance is not positive semidefinite");
        if (eig.eigenvalues().minCoeff() < 0.0) {
            const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
            covariance =
                eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
        }
    }

    Eigen::Index dim() const { return mean.size(); }

    static GaussianSummary isotropic(Eigen::VectorXd mean, double variance, Eigen::Index dim) {
        return GaussianSummary(std::move(mean),
                               variance * Eigen::MatrixXd::Identity(dim, dim));
    }
};

// Sample mean and covariance of a cloud (denominator n-1; zero covariance for
// a single particle).
inline GaussianSummary gaussian_fit(const ParticleCloud& cloud) {
    const Eigen::Index n = cloud.size();
    if (n == 0) throw ConfigError("gaussian_fit: empty cloud");
    const Eigen::Index d = cloud.dim();
    Eigen::VectorXd mean = cloud.positions.rowwise().mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    if (n > 1) {
        const Eigen::MatrixXd centered = cloud.positions.colwise() - mean;
        cov = centered * centered.transpose() / static_cast<double>(n - 1);
    }
    return GaussianSummary(std::move(mean), std::move(cov));
}

// Differential entropy of the fitted Gaussian; unavailable when the
// covariance is singular.
inline std::optional<double> gaussian_entropy(const GaussianSummary& g) {
    Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
    if (llt.info() != Eigen::Success) return std::nullopt;
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < g.dim(); ++i) {
        const double l = llt.matrixL()(i, i);
        if (!(l > 0.0)) return std::nullopt;
        log_det += 2.0 * std::log(l);
    }
    const double d = static_cast<double>(g.dim());
    return 0.5 * d * (1.0 + std::log(2.0 * M_PI)) + 0.5 * log_det;
}

// KL(a || b) between Gaussians, closed form. The target must be nonsingular;
// a singular source has infinite divergence.
inline double kl_gaussian(const GaussianSummary& a, const GaussianSummary& b) {
    if (a.dim() != b.dim()) throw ConfigError("kl_gaussian: dimension mismatch");
    const Eigen::Index d = a.dim();
    Eigen::LLT<Eigen::MatrixXd> llt_b(b.covariance);
    if (llt_b.info() != Eigen::Success)
        throw ConfigError("kl_gaussian: target covariance is singular");
    double log_det_b = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double l = llt_b.matrixL()(i, i);
        if (!(l > 0.0)) throw ConfigError("kl_gaussian: target covariance is singular");
        log_det_b += 2.0 * std::log(l);
    }

    Eigen::LLT<Eigen::MatrixXd> llt_a(a.covariance);
    double log_det_a;
    if (llt_a.info() != Eigen::Success) {
        log_det_a = -std::numeric_limits<double>::infinity();
    } else {
        log_det_a = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double l = llt_a.matrixL()(i, i);
            if (!(l > 0.0)) return std::numeric_limits<double>::infinity();
            log_det_a += 2.0 * std::log(l);
        }
    }
    if (!std::isfinite(log_det_a)) return std::numeric_limits<double>::infinity();

    const Eigen::MatrixXd b_inv_a = llt_b.solve(a.covariance);
    const Eigen::VectorXd diff = b.mean - a.mean;
    const double quad = diff.dot(llt_b.solve(diff));
    return 0.5 * (b_inv_a.trace() + quad - static_cast<double>(d) + log_det_b - log_det_a);
}

// 2-Wasserstein distance between Gaussians (Bures form).
inline double w2_gaussian(const GaussianSummary& a, const GaussianSummary& b) {
    if (a.dim() != b.dim()) throw ConfigError("w2_gaussian: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_b(b.covariance);
    const Eigen::MatrixXd sqrt_b = eig_b.eigenvectors() *
                                   eig_b.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                   eig_b.eigenvectors().transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_m(sqrt_b * a.covariance * sqrt_b);
    const double cross = eig_m.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double squared = (a.mean - b.mean).squaredNorm() + a.covariance.trace() +
                           b.covariance.trace() - 2.0 * cross;
    return std::sqrt(std::max(0.0, squared));
}

}  // namespace vpsa
