#pragma once

// Test-only oracles, independent of the library's masking/optimizer paths.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "trim/matrix.hpp"
#include "trim/quality.hpp"

namespace trim::oracles {

// Zero the k lowest-scoring weights of each row (ties to the lower column).
inline Matrix prune_rows_by_counts(const Matrix& w, const Matrix& scores,
                                   const std::vector<std::size_t>& counts) {
    Matrix out = w;
    std::vector<std::size_t> order(w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (scores(i, a) != scores(i, b)) return scores(i, a) < scores(i, b);
            return a < b;
        });
        for (std::size_t c = 0; c < counts[i] && c < w.cols(); ++c) {
            out(i, order[c]) = 0.0f;
        }
    }
    return out;
}

// Exhaustive search over every per-row count allocation with sum(k) = budget
// and k_i <= cap. Returns the best layer quality and the counts achieving it.
struct ExhaustiveResult {
    double best_quality = 0.0;
    std::vector<std::size_t> best_counts;
    std::size_t n_allocations = 0;
};

inline ExhaustiveResult exhaustive_best_quality(const Matrix& w, const Matrix& x,
                                                const Matrix& scores, std::int64_t budget,
                                                std::size_t cap, LayerMetric metric) {
    const Matrix y = matmul(w, x);
    ExhaustiveResult res;
    res.best_quality = -1e300;

    std::vector<std::size_t> counts(w.rows(), 0);
    auto recurse = [&](auto&& self, std::size_t row, std::int64_t remaining) -> void {
        if (row + 1 == w.rows()) {
            if (remaining < 0 || remaining > static_cast<std::int64_t>(cap)) return;
            counts[row] = static_cast<std::size_t>(remaining);
            const Matrix yhat = matmul(prune_rows_by_counts(w, scores, counts), x);
            const double q = qmetric(y, yhat, metric).value;
            ++res.n_allocations;
            if (q > res.best_quality) {
                res.best_quality = q;
                res.best_counts = counts;
            }
            return;
        }
        const std::int64_t hi = std::min<std::int64_t>(cap, remaining);
        for (std::int64_t k = 0; k <= hi; ++k) {
            counts[row] = static_cast<std::size_t>(k);
            self(self, row + 1, remaining - k);
        }
    };
    recurse(recurse, 0, budget);
    return res;
}

} // namespace trim::oracles
