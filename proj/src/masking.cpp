#include "trim/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace trim {

SparsityVector::SparsityVector(std::vector<double> s, double target, double cutoff)
    : s_(std::move(s)), target_(target), cutoff_(cutoff) {
    if (s_.empty()) {
        throw shape_error("sparsity vector must be non-empty");
    }
    if (!(cutoff_ > 0.0 && cutoff_ < 1.0)) {
        throw usage_error("cutoff must lie in (0, 1)");
    }
    if (!(target_ >= 0.0 && target_ < 1.0)) {
        throw usage_error("sparsity target must lie in [0, 1)");
    }
    double sum = 0.0;
    for (double& v : s_) {
        if (!std::isfinite(v)) {
            throw numeric_error("non-finite sparsity entry");
        }
        // Absorb sub-1e-12 float noise from recentering arithmetic.
        if (v < 0.0 && v > -1e-12) v = 0.0;
        if (v > cutoff_ && v < cutoff_ + 1e-12) v = cutoff_;
        if (v < 0.0 || v > cutoff_) {
            throw budget_error("sparsity entry " + std::to_string(v) + " outside [0, " +
                               std::to_string(cutoff_) + "]");
        }
        sum += v;
    }
    const double mean = sum / static_cast<double>(s_.size());
    if (std::abs(mean - target_) > 1e-9) {
        throw budget_error("sparsity vector mean " + std::to_string(mean) +
                           " != target " + std::to_string(target_));
    }
}

SparsityVector SparsityVector::uniform(std::size_t dims, double target, double cutoff) {
    return SparsityVector(std::vector<double>(dims, target), target, cutoff);
}

bool SparsityVector::is_uniform(double tol) const {
    for (double v : s_) {
        if (std::abs(v - s_.front()) > tol) return false;
    }
    return true;
}

std::string to_token(ComparisonGroup::Kind k) {
    switch (k) {
        case ComparisonGroup::Kind::whole_layer: return "whole_layer";
        case ComparisonGroup::Kind::input_block: return "input_block";
        case ComparisonGroup::Kind::per_output: return "per_output";
    }
    return "?";
}

ComparisonGroup comparison_group_from_token(const std::string& token, std::size_t block) {
    if (token == "whole_layer") return ComparisonGroup::whole_layer();
    if (token == "input_block") return ComparisonGroup::input_block(block);
    if (token == "per_output") return ComparisonGroup::per_output();
    throw usage_error("unknown comparison group '" + token + "'");
}

std::int64_t round_half_even(double x) {
    const double f = std::floor(x);
    const double frac = x - f;
    const auto n = static_cast<std::int64_t>(f);
    if (frac > 0.5) return n + 1;
    if (frac < 0.5) return n;
    return (n % 2 == 0) ? n : n + 1;
}

namespace {

// Largest-remainder apportionment of `budget` units over quota[i], capped at
// cap[i]. Remainder ties go to the lower index.
std::vector<std::size_t> largest_remainder(const std::vector<double>& quota,
                                           std::int64_t budget,
                                           const std::vector<std::size_t>& cap) {
    const std::size_t n = quota.size();
    std::int64_t total_cap = 0;
    for (std::size_t c : cap) total_cap += static_cast<std::int64_t>(c);
    if (budget > total_cap) {
        throw budget_error("prune budget " + std::to_string(budget) +
                           " exceeds capacity " + std::to_string(total_cap));
    }

    std::vector<std::size_t> counts(n);
    std::vector<double> rem(n);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double base = std::floor(quota[i]);
        if (base < 0.0) base = 0.0;
        counts[i] = std::min(static_cast<std::size_t>(base), cap[i]);
        rem[i] = quota[i] - static_cast<double>(counts[i]);
        assigned += static_cast<std::int64_t>(counts[i]);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });

    std::int64_t extra = budget - assigned;
    for (std::size_t idx : order) {
        if (extra <= 0) break;
        if (counts[idx] < cap[idx]) {
            ++counts[idx];
            --extra;
        }
    }
    // One increment per row can fall short when caps bind; sweep until placed.
    while (extra > 0) {
        bool placed = false;
        for (std::size_t idx : order) {
            if (extra > 0 && counts[idx] < cap[idx]) {
                ++counts[idx];
                --extra;
                placed = true;
            }
        }
        if (!placed) {
            throw budget_error("cannot place prune budget under per-group caps");
        }
    }
    while (extra < 0) {
        // Float-noise guard; removes from the smallest remainders first.
        bool removed = false;
        for (auto it = order.rbegin(); it != order.rend() && extra < 0; ++it) {
            if (counts[*it] > 0) {
                --counts[*it];
                ++extra;
                removed = true;
            }
        }
        if (!removed) break;
    }
    return counts;
}

void mark_lowest(const Matrix& scores, const std::vector<std::size_t>& flat_indices,
                 std::size_t k, PruneMask& m) {
    // Sort candidate cells by (score, flat index): ties prune the earlier
    // (row, column) first.
    std::vector<std::size_t> order(flat_indices);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const float sa = scores.data()[a];
        const float sb = scores.data()[b];
        if (sa != sb) return sa < sb;
        return a < b;
    });
    for (std::size_t i = 0; i < k && i < order.size(); ++i) {
        m.mask[order[i]] = 1;
    }
    m.pruned_count += std::min(k, order.size());
}

} // namespace

std::vector<std::size_t> round_counts(const SparsityVector& s, std::size_t n_cols) {
    if (n_cols == 0) {
        throw shape_error("round_counts: zero columns");
    }
    const std::size_t d = s.dims();
    const auto cap = static_cast<std::size_t>(std::floor(s.cutoff() * static_cast<double>(n_cols)));
    const std::int64_t budget =
        round_half_even(s.target() * static_cast<double>(d) * static_cast<double>(n_cols));

    std::vector<double> quota(d);
    for (std::size_t i = 0; i < d; ++i) {
        quota[i] = s.values()[i] * static_cast<double>(n_cols);
    }
    return largest_remainder(quota, budget, std::vector<std::size_t>(d, cap));
}

PruneMask build_mask(const ScoreMatrix& a, const SparsityVector& s,
                     const ComparisonGroup& group) {
    const Matrix& scores = a.scores;
    if (scores.rows() != s.dims()) {
        throw shape_error("score matrix has " + std::to_string(scores.rows()) +
                          " rows but sparsity vector has " + std::to_string(s.dims()));
    }
    const std::size_t d = scores.rows();
    const std::size_t n = scores.cols();

    PruneMask m;
    m.rows = d;
    m.cols = n;
    m.mask.assign(d * n, 0);
    m.pruned_count = 0;

    switch (group.kind) {
        case ComparisonGroup::Kind::per_output: {
            const std::vector<std::size_t> counts = round_counts(s, n);
            std::vector<std::size_t> row_cells(n);
            for (std::size_t i = 0; i < d; ++i) {
                std::iota(row_cells.begin(), row_cells.end(), i * n);
                mark_lowest(scores, row_cells, counts[i], m);
            }
            break;
        }
        case ComparisonGroup::Kind::whole_layer: {
            if (!s.is_uniform()) {
                throw usage_error("whole_layer comparison requires a uniform sparsity vector");
            }
            const std::int64_t budget = round_half_even(
                s.target() * static_cast<double>(d) * static_cast<double>(n));
            std::vector<std::size_t> all(d * n);
            std::iota(all.begin(), all.end(), 0);
            mark_lowest(scores, all, static_cast<std::size_t>(budget), m);
            break;
        }
        case ComparisonGroup::Kind::input_block: {
            if (!s.is_uniform()) {
                throw usage_error("input_block comparison requires a uniform sparsity vector");
            }
            if (group.block_size < 1) {
                throw usage_error("block size must be >= 1");
            }
            const std::size_t bs = group.block_size;
            const std::size_t n_blocks = (n + bs - 1) / bs;
            const std::int64_t budget = round_half_even(
                s.target() * static_cast<double>(d) * static_cast<double>(n));

            // Per-block budgets follow the same largest-remainder rule as rows,
            // so the layer total stays exact even with a ragged last block.
            std::vector<double> quota(n_blocks);
            std::vector<std::size_t> caps(n_blocks);
            for (std::size_t g = 0; g < n_blocks; ++g) {
                const std::size_t width = std::min(bs, n - g * bs);
                quota[g] = s.target() * static_cast<double>(d) * static_cast<double>(width);
                caps[g] = d * width;
            }
            const std::vector<std::size_t> counts = largest_remainder(quota, budget, caps);

            for (std::size_t g = 0; g < n_blocks; ++g) {
                const std::size_t c0 = g * bs;
                const std::size_t c1 = std::min(n, c0 + bs);
                std::vector<std::size_t> cells;
                cells.reserve(d * (c1 - c0));
                for (std::size_t i = 0; i < d; ++i) {
                    for (std::size_t j = c0; j < c1; ++j) {
                        cells.push_back(i * n + j);
                    }
                }
                mark_lowest(scores, cells, counts[g], m);
            }
            break;
        }
    }
    return m;
}

Matrix apply_mask(const Matrix& w, const PruneMask& m) {
    if (w.rows() != m.rows || w.cols() != m.cols) {
        throw shape_error("apply_mask: weight/mask shape mismatch");
    }
    Matrix out = w;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (m.mask[i]) out.data()[i] = 0.0f;
    }
    return out;
}

} // namespace trim
