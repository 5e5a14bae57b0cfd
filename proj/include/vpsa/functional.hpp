#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <variant>

#include "vpsa/mfnn.hpp"
#include "vpsa/pairwise.hpp"
#include "vpsa/types.hpp"

namespace vpsa {

// Estimator contract satisfied by both functionals: an unbiased velocity-field
// estimate against a single witness sample, a sampler for the estimator's own
// randomness, and the exact gradient against an empirical measure.
template <class S>
concept EstimatorSpec = requires(const S& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                 std::uint64_t xi, Eigen::VectorXd& out, NoiseStream& stream,
                                 const ParticleCloud& cloud, std::uint64_t* count) {
    { estimate_into(spec, x, y, xi, out) };
    { draw_xi(spec, stream) } -> std::convertible_to<std::uint64_t>;
    { uses_xi(spec) } -> std::convertible_to<bool>;
    { exact_gradient_into(spec, x, cloud, out, count) };
};

static_assert(EstimatorSpec<PairwiseSpec>);
static_assert(EstimatorSpec<MfnnSpec>);

using Functional = std::variant<PairwiseSpec, MfnnSpec>;

inline Eigen::Index functional_dim(const Functional& f) {
    return std::visit([](const auto& spec) -> Eigen::Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(spec)>, PairwiseSpec>)
            return spec.dim;
        else
            return spec.dim();
    }, f);
}

inline double functional_sigma(const Functional& f) {
    return std::visit([](const auto& spec) { return spec.sigma; }, f);
}

// FNV-1a over a canonical byte serialization of the run parameters; used to
// bind witness files to the (config, functional) pair they were produced by.
namespace detail {

struct Fnv1a {
    std::uint64_t state = 0xcbf29ce484222325ULL;
    void bytes(const void* data, std::size_t size) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state ^= p[i];
            state *= 0x100000001b3ULL;
        }
    }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }
    void vec(const Eigen::VectorXd& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }
    void mat(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) f64(m(r, c));
    }
};

inline void hash_potential(Fnv1a& h, const PairwiseSpec::Potential& p) {
    if (const auto* q = std::get_if<PairwiseSpec::Quadratic>(&p)) {
        h.u64(1);
        h.f64(q->coeff);
    } else {
        // Callable identity is not hashable; the declared constant stands in
        // for it. Replaying against a different callable with the same
        // constant is on the caller.
        h.u64(2);
        h.f64(std::get<PairwiseSpec::Smooth>(p).lipschitz);
    }
}

}  // namespace detail

inline std::uint64_t config_hash(const RunConfig& config, const Functional& functional) {
    detail::Fnv1a h;
    h.f64(config.eta);
    h.u64(config.steps);
    h.f64(config.sigma);
    h.u64(config.batch_size);
    h.u64(config.master_seed);
    h.vec(config.initial_mean());
    h.f64(config.init_scale);
    h.u64(static_cast<std::uint64_t>(config.dim));
    h.u64(config.deterministic_flow ? 1 : 0);
    std::visit([&h](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, PairwiseSpec>) {
            h.u64(0x50);  // pairwise tag
            detail::hash_potential(h, spec.potential);
            detail::hash_potential(h, spec.interaction);
            h.f64(spec.sigma);
            h.u64(static_cast<std::uint64_t>(spec.dim));
        } else {
            h.u64(0x4d);  // mfnn tag
            h.mat(spec.features);
            h.vec(spec.labels);
            h.f64(spec.amplitude);
            h.f64(spec.lambda);
            h.f64(spec.sigma);
            h.f64(spec.radius);
            h.f64(spec.smoothness);
        }
    }, functional);
    return h.state;
}

inline std::string hash_hex(std::uint64_t hash) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace vpsa
