#pragma once

#include <cstdint>

#include "trim/matrix.hpp"

namespace trim {

struct Seed {
    std::uint64_t value = 0;
};

// Algorithmic generator: splitmix64 stream + Box-Muller for gaussians.
// No OS entropy anywhere, so a fixed Seed reproduces identical draws across runs.
class Rng {
public:
    explicit Rng(Seed seed) : state_(seed.value) {}

    std::uint64_t next_u64();

    // Uniform in (0,1), 53-bit mantissa.
    double uniform();

    double gaussian();

    // Uniform integer in [0, n), n >= 1.
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

Matrix gaussian_matrix(Seed seed, std::size_t rows, std::size_t cols, double mean = 0.0,
                       double stddev = 1.0);

} // namespace trim
