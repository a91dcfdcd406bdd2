#pragma once

#include <cstdint>
#include <vector>

#include "trim/matrix.hpp"
#include "trim/scoring.hpp"

namespace trim {

// Ceiling on any single row's sparsity; keeps calibration overfitting from
// eliminating a dimension outright.
constexpr double kDefaultCutoff = 0.95;

// Per-row sparsity targets S with mean pinned to the layer budget T.
class SparsityVector {
public:
    SparsityVector() : s_{0.0}, target_(0.0), cutoff_(kDefaultCutoff) {}
    SparsityVector(std::vector<double> s, double target, double cutoff = kDefaultCutoff);

    static SparsityVector uniform(std::size_t dims, double target,
                                  double cutoff = kDefaultCutoff);

    const std::vector<double>& values() const { return s_; }
    double target() const { return target_; }
    double cutoff() const { return cutoff_; }
    std::size_t dims() const { return s_.size(); }
    bool is_uniform(double tol = 1e-12) const;

private:
    std::vector<double> s_;
    double target_;
    double cutoff_;
};

struct PruneMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> mask; // true = weight removed
    std::size_t pruned_count = 0;

    bool at(std::size_t i, std::size_t j) const { return mask[i * cols + j] != 0; }
};

struct ComparisonGroup {
    enum class Kind { whole_layer, input_block, per_output };

    Kind kind = Kind::per_output;
    std::size_t block_size = 128;

    static ComparisonGroup per_output() { return {Kind::per_output, 0}; }
    static ComparisonGroup whole_layer() { return {Kind::whole_layer, 0}; }
    static ComparisonGroup input_block(std::size_t block = 128) {
        return {Kind::input_block, block};
    }
};

std::string to_token(ComparisonGroup::Kind k);
ComparisonGroup comparison_group_from_token(const std::string& token, std::size_t block = 128);

// Round-half-even; pinned here so every budget in the project rounds the same way.
std::int64_t round_half_even(double x);

// Integer per-row prune counts k_i with |k_i - S_i*N| < 1 and
// sum(k) = round(T*D*N) exactly, by largest-remainder apportionment
// (remainder ties broken by lower row index). No k_i exceeds floor(cutoff*N).
std::vector<std::size_t> round_counts(const SparsityVector& s, std::size_t n_cols);

// Marks the prescribed number of lowest-scoring weights within each comparison
// group; score ties broken by (row, column) order, earlier index pruned first.
// whole_layer and input_block require a uniform S.
PruneMask build_mask(const ScoreMatrix& a, const SparsityVector& s, const ComparisonGroup& group);

// Masked entries zeroed, everything else bit-identical.
Matrix apply_mask(const Matrix& w, const PruneMask& m);

} // namespace trim
