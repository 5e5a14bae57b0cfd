#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vpsa/errors.hpp"

namespace vpsa {

// The stored diagonal trajectory plus the estimator-randomness draws: enough
// to replay sample generation from the same conditional law. For batch size
// B > 1 there are B diagonal trajectories, stored interleaved per step.
struct WitnessPath {
    std::uint64_t steps = 0;       // T
    std::uint64_t batch_size = 1;  // B
    Eigen::Index dim = 0;
    std::vector<Eigen::VectorXd> diagonal;  // (T+1)*B entries, index k*B + b
    std::vector<std::uint64_t> xi_draws;    // size T when the estimator uses xi, else empty
    std::uint64_t master_seed = 0;
    std::uint64_t config_hash = 0;

    const Eigen::VectorXd& diag(std::uint64_t step, std::uint64_t b = 0) const {
        return diagonal[step * batch_size + b];
    }
    Eigen::VectorXd& diag(std::uint64_t step, std::uint64_t b = 0) {
        return diagonal[step * batch_size + b];
    }
};

namespace detail {

constexpr char kWitnessMagic[8] = {'V', 'P', 'S', 'A', 'W', 'P', '0', '1'};
constexpr std::uint32_t kWitnessVersion = 1;

template <class T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T read_pod(std::istream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof value);
    if (!in) throw IoError("witness: truncated file");
    return value;
}

}  // namespace detail

inline void save_witness(const WitnessPath& w, std::ostream& out) {
    out.write(detail::kWitnessMagic, sizeof detail::kWitnessMagic);
    detail::write_pod<std::uint32_t>(out, detail::kWitnessVersion);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(w.dim));
    detail::write_pod<std::uint64_t>(out, w.steps);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(w.batch_size));
    detail::write_pod<std::uint64_t>(out, w.master_seed);
    detail::write_pod<std::uint64_t>(out, w.config_hash);
    detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(w.xi_draws.size()));
    for (const auto& v : w.diagonal)
        for (Eigen::Index i = 0; i < v.size(); ++i) detail::write_pod<double>(out, v[i]);
    for (auto xi : w.xi_draws) detail::write_pod<std::uint64_t>(out, xi);
    if (!out) throw IoError("witness: write failed");
}

inline void save_witness(const WitnessPath& w, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("witness: cannot open " + path + " for writing");
    save_witness(w, out);
}

inline WitnessPath load_witness(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, detail::kWitnessMagic, sizeof magic) != 0)
        throw IoError("witness: bad magic");
    const auto version = detail::read_pod<std::uint32_t>(in);
    if (version != detail::kWitnessVersion)
        throw IoError("witness: unsupported format version " + std::to_string(version));

    WitnessPath w;
    w.dim = static_cast<Eigen::Index>(detail::read_pod<std::uint32_t>(in));
    w.steps = detail::read_pod<std::uint64_t>(in);
    w.batch_size = detail::read_pod<std::uint32_t>(in);
    w.master_seed = detail::read_pod<std::uint64_t>(in);
    w.config_hash = detail::read_pod<std::uint64_t>(in);
    const auto xi_count = detail::read_pod<std::uint64_t>(in);
    if (w.dim < 1 || w.batch_size < 1) throw IoError("witness: corrupt header");
    if (xi_count != 0 && xi_count != w.steps) throw IoError("witness: bad xi record count");

    const std::uint64_t entries = (w.steps + 1) * w.batch_size;
    w.diagonal.resize(entries);
    for (auto& v : w.diagonal) {
        v.resize(w.dim);
        for (Eigen::Index i = 0; i < w.dim; ++i) v[i] = detail::read_pod<double>(in);
    }
    w.xi_draws.resize(xi_count);
    for (auto& xi : w.xi_draws) xi = detail::read_pod<std::uint64_t>(in);
    return w;
}

inline WitnessPath load_witness(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("witness: cannot open " + path);
    return load_witness(in);
}

}  // namespace vpsa
