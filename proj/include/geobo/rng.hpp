#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace geobo {

using Rng = std::mt19937_64;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// splitmix64 finalizer; used to derive independent seeds from a master seed.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive a sub-seed for a named purpose. Streams for distinct (tag, a, b)
// are effectively independent, so components never share an engine.
inline std::uint64_t sub_seed(std::uint64_t master, std::string_view tag,
                              std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ULL;
    return mix64(mix64(mix64(master) ^ h) ^ mix64(a ^ (b << 32 | b >> 32)));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double std_normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline Vec normal_vec(Eigen::Index n, Rng& rng) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = std_normal(rng);
    return v;
}

inline Mat normal_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Mat m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = std_normal(rng);
    return m;
}

}  // namespace geobo
