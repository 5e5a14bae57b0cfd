#pragma once

// Test-only oracle: propagates the FULL joint mean and covariance of two real
// particles and every virtual particle through the quadratic-case affine
// updates, with no exchangeability reduction. Deliberately independent of the
// library's recursion so the two can cross-check each other.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "vpsa/pairwise.hpp"
#include "vpsa/types.hpp"

namespace testsupport {

struct JointMoments {
    double var_real = 0.0;
    double cov_real_pair = 0.0;
    double var_virtual = 0.0;       // first surviving virtual particle
    double cov_virtual_pair = 0.0;  // first two surviving virtual particles
    double cov_real_virtual = 0.0;
    double mean_real = 0.0;
    double mean_virtual = 0.0;
};

// Per-coordinate joint state over [X1, X2, Y_0, ..., Y_T] for a scalar (d=1)
// configuration; returns the moments at every step 0..T, where the virtual
// statistics are taken over the particles that survive step k (j >= k).
inline std::vector<JointMoments> bruteforce_moments(const vpsa::RunConfig& config,
                                                    const vpsa::PairwiseSpec& spec) {
    const auto T = static_cast<Eigen::Index>(config.steps);
    const double a = 1.0 - config.eta * (spec.lambda_v() + spec.alpha());
    const double b = config.eta * spec.alpha();
    const double q = config.sigma * config.sigma * config.eta;

    const Eigen::Index size = 2 + (T + 1);  // X1, X2, Y_0..Y_T
    const double m0 = config.initial_mean()[0];
    const double v0 = config.init_scale * config.init_scale;
    Eigen::VectorXd mean = Eigen::VectorXd::Constant(size, m0);
    Eigen::MatrixXd cov = v0 * Eigen::MatrixXd::Identity(size, size);

    auto snapshot = [&](Eigen::Index k) {
        JointMoments m;
        m.var_real = cov(0, 0);
        m.cov_real_pair = cov(0, 1);
        m.mean_real = mean[0];
        const Eigen::Index first = 2 + k;
        m.var_virtual = cov(first, first);
        m.cov_real_virtual = cov(0, first);
        m.mean_virtual = mean[first];
        if (first + 1 < size) m.cov_virtual_pair = cov(first, first + 1);
        return m;
    };

    std::vector<JointMoments> out;
    out.push_back(snapshot(0));
    for (Eigen::Index k = 0; k < T; ++k) {
        Eigen::MatrixXd map = Eigen::MatrixXd::Identity(size, size);
        Eigen::VectorXd noise_diag = Eigen::VectorXd::Zero(size);
        const Eigen::Index diag = 2 + k;
        for (Eigen::Index row = 0; row < size; ++row) {
            const bool is_real = row < 2;
            const bool is_later_virtual = row > diag;
            if (is_real || is_later_virtual) {
                map(row, row) = a;
                map(row, diag) += b;
                noise_diag[row] = q;
            }
        }
        mean = map * mean;
        cov = map * cov * map.transpose() + Eigen::MatrixXd(noise_diag.asDiagonal());
        out.push_back(snapshot(k + 1));
    }
    return out;
}

}  // namespace testsupport
