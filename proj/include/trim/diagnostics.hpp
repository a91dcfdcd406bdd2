#pragma once

#include <string>
#include <vector>

#include "trim/pipeline.hpp"

namespace trim {

// Mean-absolute-difference Gini of a nonnegative vector; all-zero input is 0.
double gini(const std::vector<double>& v);

struct GiniReport {
    std::string layer_name;
    std::vector<double> per_row_gini;
    std::vector<double> bin_edges;       // bins + 1 edges over [0, 1]
    std::vector<std::size_t> bin_counts; // sums to the number of rows
};

GiniReport gini_report(const std::string& layer_name, const ScoreMatrix& a,
                       std::size_t bins = 20);

struct DegradationCurve {
    std::vector<double> sparsity_grid;
    std::size_t dims = 0;
    std::vector<double> per_dim_quality; // dims x grid, row-major

    double at(std::size_t dim, std::size_t grid_idx) const {
        return per_dim_quality[dim * sparsity_grid.size() + grid_idx];
    }
};

// Per-dimension cosine after pruning the layer uniformly at each grid value.
DegradationCurve degradation_curve(const Matrix& w, const Matrix& x, const ScoreMatrix& a,
                                   const std::vector<double>& grid,
                                   double cutoff = kDefaultCutoff);

enum class RemovalStrategy { min_norm, max_norm, random };

std::string to_token(RemovalStrategy s);
RemovalStrategy removal_strategy_from_token(const std::string& token);

struct RemovedDim {
    std::string layer;
    std::size_t row = 0;
    double norm = 0.0;
};

struct RemoveOneResult {
    ToyModel model; // one output dimension zeroed per layer
    RemovalStrategy strategy = RemovalStrategy::min_norm;
    std::vector<RemovedDim> removed;
};

RemoveOneResult remove_one_dimension(const ToyModel& model, RemovalStrategy strategy,
                                     Seed seed = {});

struct StressArm {
    std::string arm; // "outlier_dense" or "random"
    ToyModel model;
    std::vector<std::vector<std::size_t>> rows_per_layer;
    std::vector<double> layer_recon_quality; // cosim_flat per layer on calib
    double end_to_end_cosine = 0.0;
    double toy_loss_delta = 0.0;
};

struct StressReport {
    double m = 0.0;
    double top_frac = 0.0;
    double row_sparsity = 0.0;
    StressArm outlier_dense;
    StressArm random_control;
};

// Prunes the most outlier-dense ceil(top_frac * D) rows of every layer at
// row_sparsity (lowest wanda scores first), plus a seeded random-rows control
// with the same counts. x_per_layer[0] doubles as the evaluation input.
StressReport outlier_dense_stress(const ToyModel& model, const std::vector<Matrix>& x_per_layer,
                                  double m, double top_frac, double row_sparsity, Seed seed);

} // namespace trim
