#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace specflow {

using Rng = std::mt19937_64;

// Independent stream ids so full-path, flash-path and environment randomness
// never share draws.
enum class Stream : std::uint64_t {
    environment = 1,
    full_path = 2,
    verify = 3,
    training = 4,
    teacher = 5,
    diagnostics = 6,
    demonstration = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    return Rng(mix_seed(seed, static_cast<std::uint64_t>(stream), index));
}

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    // Column-major fill order is part of the determinism contract.
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = normal(rng);
        }
    }
    return m;
}

inline double uniform(Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(rng);
}

}  // namespace specflow
