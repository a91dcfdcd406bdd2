#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trim/scoring.hpp"

namespace trim {

struct OwlParams {
    double m = 5.0;    // outlier multiple M, > 1
    double lam = 0.12; // max deviation from the global target
};

struct LayerBudget {
    std::string name;
    double t = 0.0;
    std::uint64_t params = 0;
};

struct LayerAllocation {
    std::string method; // "uniform", "owl", or an imported tag
    double global_t = 0.0;
    std::vector<LayerBudget> layers;
};

// Fraction of score entries above m * mean(A).
double outlier_ratio(const ScoreMatrix& a, double m);

// Per-row counts of entries above m * mean(A); the mean is layer-wide.
std::vector<std::size_t> per_dimension_outlier_counts(const ScoreMatrix& a, double m);

LayerAllocation uniform_allocate(const std::vector<std::string>& names,
                                 const std::vector<std::uint64_t>& sizes, double t);

// Outlier-weighted budgets: layers with more outlier positions get lower
// sparsity, bounded within [t - lam, t + lam], parameter-count-weighted mean
// pinned to t.
LayerAllocation owl_allocate(const std::vector<std::string>& names,
                             const std::vector<std::uint64_t>& sizes,
                             const std::vector<double>& ratios, double t, const OwlParams& p);

LayerAllocation load_allocation(const std::string& path);
void save_allocation(const LayerAllocation& a, const std::string& path);

} // namespace trim
