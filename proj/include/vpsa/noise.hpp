#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace vpsa {

// Every random draw in this library is addressed by (master_seed, stream_id,
// counter). Streams are pure functions of their address, so a draw never
// depends on evaluation order or on how work is scheduled across threads:
// serial and parallel runs are bit-identical by construction.
enum class StreamKind : std::uint64_t {
    real_init = 1,      // X_0 of a real particle
    real_noise = 2,     // per-step Gaussian of a real particle
    virtual_init = 3,   // Y_0 of a virtual particle
    virtual_noise = 4,  // per-step Gaussian of a virtual particle
    xi = 5,             // estimator randomness, one stream per step
    baseline_init = 6,  // particle baseline initial draws
    baseline_noise = 7, // particle baseline per-step Gaussians
    probe = 8,          // diagnostics and randomized tests
};

struct StreamId {
    StreamKind kind = StreamKind::probe;
    std::uint64_t index = 0;  // entity index
    std::uint64_t step = 0;   // step index
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t stream_base(std::uint64_t master_seed, const StreamId& id) {
    std::uint64_t s = mix64(master_seed + kGolden);
    s = mix64(s ^ mix64(static_cast<std::uint64_t>(id.kind) + kGolden));
    s = mix64(s ^ mix64(id.index + 2 * kGolden));
    s = mix64(s ^ mix64(id.step + 3 * kGolden));
    return s;
}

}  // namespace detail

class NoiseStream {
public:
    NoiseStream(std::uint64_t master_seed, StreamId id)
        : master_seed_(master_seed), id_(id), base_(detail::stream_base(master_seed, id)) {}

    std::uint64_t master_seed() const { return master_seed_; }
    const StreamId& id() const { return id_; }

    std::uint64_t next_u64() { return detail::mix64(base_ + (counter_++) * detail::kGolden); }

    // Unbiased draw from {0, ..., m-1} by rejection.
    std::uint64_t next_below(std::uint64_t m) {
        const std::uint64_t threshold = (0 - m) % m;
        for (;;) {
            const std::uint64_t w = next_u64();
            if (w >= threshold) return w % m;
        }
    }

    // Standard normal via Box-Muller, two draws per pair of words.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log stays finite; u2 in [0,1).
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    void fill_gaussian(Eigen::Ref<Eigen::VectorXd> out) {
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = gaussian();
    }

private:
    std::uint64_t master_seed_;
    StreamId id_;
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Eigen::VectorXd gaussian_vector(std::uint64_t master_seed, StreamId id, Eigen::Index dim) {
    NoiseStream stream(master_seed, id);
    Eigen::VectorXd v(dim);
    stream.fill_gaussian(v);
    return v;
}

}  // namespace vpsa
