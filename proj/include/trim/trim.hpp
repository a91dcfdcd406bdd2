#pragma once

#include <vector>

#include "trim/masking.hpp"
#include "trim/quality.hpp"
#include "trim/scoring.hpp"

namespace trim {

struct TrimConfig {
    std::size_t k_iters = 10;
    std::vector<double> lr_schedule = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
    double epsilon = 1e-8;
    double cutoff = kDefaultCutoff;
    LayerMetric layer_metric = LayerMetric::cosim_flat;
    DimMetric dim_metric = DimMetric::cosine;

    void validate() const;
};

struct TrimResult {
    SparsityVector s_best;
    double q_best = 0.0;
    double q_uniform = 0.0;
    double chosen_lr = 0.0;
    std::vector<double> per_iter_quality;
    DimQualityVector dim_quality_final; // dim qualities seen at the last iteration
    std::vector<double> evaluated_lrs;  // learning rates actually tried, in order
};

// c'_i = (c_i - min_j c_j) / (max_j c_j - min_j c_j + epsilon); constant input
// maps to all-zeros, outputs lie in [0, 1).
std::vector<double> normalize_minmax(const std::vector<double>& c, double epsilon);

// out_i = delta_i - mean(delta) + t; differences preserved, mean pinned to t.
std::vector<double> recenter(const std::vector<double>& delta, double t);

// Clamps entries into [0, cutoff], then redistributes the clipped mass
// proportionally to the remaining headroom until the mean is back at t
// (fixed point in <= dims passes). Throws budget_error when infeasible.
std::vector<double> clamp_recenter(std::vector<double> s, double t, double cutoff);

// One full iterative dimension-wise sparsity adjustment at a fixed learning
// rate: starts from uniform S = t, prunes per-output with the current S each
// iteration, scores layer quality against the dense output, and keeps the
// best sparsity vector seen (strict improvement only).
TrimResult trim_adjust(const Matrix& w, const Matrix& x, const ScoreMatrix& a, double t,
                       double alpha, const TrimConfig& cfg);

// Walks the positive schedule, stopping once a larger rate stops improving;
// falls back to the negated schedule when no positive rate beats uniform, and
// to the uniform result (chosen_lr = 0) when nothing does.
TrimResult lr_search(const Matrix& w, const Matrix& x, const ScoreMatrix& a, double t,
                     const TrimConfig& cfg);

} // namespace trim
