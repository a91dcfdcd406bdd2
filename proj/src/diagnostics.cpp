#include "trim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace trim {

double gini(const std::vector<double>& v) {
    if (v.empty()) {
        throw shape_error("gini of empty vector");
    }
    double sum = 0.0;
    for (double x : v) {
        if (x < 0.0 || !std::isfinite(x)) {
            throw numeric_error("gini input must be nonnegative and finite");
        }
        sum += x;
    }
    if (sum == 0.0) return 0.0;

    // Mean-absolute-difference form via sorted prefix weights:
    // sum_{ i, j } |v_i - v_j| = 2 * sum_k (2k - n + 1) * x_(k), x ascending.
    std::vector<double> x = v;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        acc += (2.0 * static_cast<double>(k) - n + 1.0) * x[k];
    }
    return acc / (n * sum);
}

GiniReport gini_report(const std::string& layer_name, const ScoreMatrix& a, std::size_t bins) {
    if (bins < 1) {
        throw usage_error("histogram needs at least one bin");
    }
    GiniReport rep;
    rep.layer_name = layer_name;
    rep.per_row_gini.reserve(a.scores.rows());
    std::vector<double> row(a.scores.cols());
    for (std::size_t i = 0; i < a.scores.rows(); ++i) {
        for (std::size_t j = 0; j < a.scores.cols(); ++j) {
            row[j] = a.scores(i, j);
        }
        rep.per_row_gini.push_back(gini(row));
    }

    rep.bin_edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        rep.bin_edges[b] = static_cast<double>(b) / static_cast<double>(bins);
    }
    rep.bin_counts.assign(bins, 0);
    for (double g : rep.per_row_gini) {
        auto b = static_cast<std::size_t>(g * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
        ++rep.bin_counts[b];
    }
    return rep;
}

DegradationCurve degradation_curve(const Matrix& w, const Matrix& x, const ScoreMatrix& a,
                                   const std::vector<double>& grid, double cutoff) {
    if (grid.empty()) {
        throw usage_error("degradation grid must be non-empty");
    }
    double prev = -1.0;
    for (double t : grid) {
        if (!(t >= 0.0 && t <= cutoff) || t <= prev) {
            throw usage_error("degradation grid must increase within [0, cutoff]");
        }
        prev = t;
    }

    const Matrix y = matmul(w, x);
    DegradationCurve curve;
    curve.sparsity_grid = grid;
    curve.dims = w.rows();
    curve.per_dim_quality.resize(w.rows() * grid.size());

    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        // Measurement sweep: every row pruned at the same ratio, independent of
        // the global-budget apportionment used for real allocations.
        const auto k = static_cast<std::size_t>(std::max<std::int64_t>(
            0, round_half_even(grid[gi] * static_cast<double>(w.cols()))));
        Matrix pruned = w;
        std::vector<std::size_t> order(w.cols());
        for (std::size_t i = 0; i < w.rows(); ++i) {
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
                const float sp = a.scores(i, p);
                const float sq = a.scores(i, q);
                if (sp != sq) return sp < sq;
                return p < q;
            });
            for (std::size_t c = 0; c < k && c < w.cols(); ++c) {
                pruned(i, order[c]) = 0.0f;
            }
        }
        const Matrix yhat = matmul(pruned, x);
        const DimQualityVector c = qmetric_dimwise(y, yhat, DimMetric::cosine);
        for (std::size_t i = 0; i < w.rows(); ++i) {
            curve.per_dim_quality[i * grid.size() + gi] = c.c[i];
        }
    }
    return curve;
}

std::string to_token(RemovalStrategy s) {
    switch (s) {
        case RemovalStrategy::min_norm: return "min_norm";
        case RemovalStrategy::max_norm: return "max_norm";
        case RemovalStrategy::random: return "random";
    }
    return "?";
}

RemovalStrategy removal_strategy_from_token(const std::string& token) {
    if (token == "min_norm") return RemovalStrategy::min_norm;
    if (token == "max_norm") return RemovalStrategy::max_norm;
    if (token == "random") return RemovalStrategy::random;
    throw usage_error("unknown removal strategy '" + token + "'");
}

RemoveOneResult remove_one_dimension(const ToyModel& model, RemovalStrategy strategy, Seed seed) {
    model.validate();
    for (const ModelLayer& l : model.layers) {
        if (l.weight.rows() < 2) {
            throw shape_error("remove_one_dimension needs every layer to have >= 2 dimensions");
        }
    }

    RemoveOneResult res;
    res.model = model;
    res.strategy = strategy;
    Rng rng(seed);
    for (ModelLayer& l : res.model.layers) {
        std::size_t pick = 0;
        if (strategy == RemovalStrategy::random) {
            pick = static_cast<std::size_t>(rng.below(l.weight.rows()));
        } else {
            double best = row_l2_norm(l.weight, 0);
            for (std::size_t i = 1; i < l.weight.rows(); ++i) {
                const double norm = row_l2_norm(l.weight, i);
                const bool better =
                    (strategy == RemovalStrategy::min_norm) ? norm < best : norm > best;
                if (better) {
                    best = norm;
                    pick = i;
                }
            }
        }
        res.removed.push_back({l.name, pick, row_l2_norm(l.weight, pick)});
        for (std::size_t j = 0; j < l.weight.cols(); ++j) {
            l.weight(pick, j) = 0.0f;
        }
    }
    return res;
}

namespace {

void prune_rows_at(ToyModel& model, std::size_t layer_idx, const std::vector<std::size_t>& rows,
                   const ScoreMatrix& scores, double row_sparsity) {
    Matrix& w = model.layers[layer_idx].weight;
    const std::size_t n = w.cols();
    const auto k = static_cast<std::size_t>(
        std::max<std::int64_t>(0, round_half_even(row_sparsity * static_cast<double>(n))));
    for (std::size_t row : rows) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const float sa = scores.scores(row, a);
            const float sb = scores.scores(row, b);
            if (sa != sb) return sa < sb;
            return a < b;
        });
        for (std::size_t i = 0; i < k && i < n; ++i) {
            w(row, order[i]) = 0.0f;
        }
    }
}

} // namespace

StressReport outlier_dense_stress(const ToyModel& model, const std::vector<Matrix>& x_per_layer,
                                  double m, double top_frac, double row_sparsity, Seed seed) {
    model.validate();
    if (x_per_layer.size() != model.layers.size()) {
        throw shape_error("outlier_dense_stress: one activation batch per layer required");
    }
    if (!(top_frac > 0.0 && top_frac < 1.0)) {
        throw usage_error("top_frac must lie in (0, 1)");
    }
    if (!(row_sparsity >= 0.0 && row_sparsity <= 1.0)) {
        throw usage_error("row_sparsity must lie in [0, 1]");
    }

    StressReport rep;
    rep.m = m;
    rep.top_frac = top_frac;
    rep.row_sparsity = row_sparsity;
    rep.outlier_dense.arm = "outlier_dense";
    rep.outlier_dense.model = model;
    rep.random_control.arm = "random";
    rep.random_control.model = model;

    Rng rng(seed);
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const Matrix& w = model.layers[li].weight;
        const ScoreMatrix scores = score_wanda(w, x_per_layer[li]);
        const std::vector<std::size_t> counts = per_dimension_outlier_counts(scores, m);

        const auto n_pick = static_cast<std::size_t>(
            std::ceil(top_frac * static_cast<double>(w.rows())));

        // Outlier-dense arm: rows with most outliers, ties to the lower index.
        std::vector<std::size_t> order(w.rows());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
        std::vector<std::size_t> dense_rows(order.begin(), order.begin() + n_pick);
        std::sort(dense_rows.begin(), dense_rows.end());

        // Control arm: same number of rows, seeded draw without replacement.
        std::vector<std::size_t> pool(w.rows());
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t i = 0; i < n_pick; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        std::vector<std::size_t> random_rows(pool.begin(), pool.begin() + n_pick);
        std::sort(random_rows.begin(), random_rows.end());

        prune_rows_at(rep.outlier_dense.model, li, dense_rows, scores, row_sparsity);
        prune_rows_at(rep.random_control.model, li, random_rows, scores, row_sparsity);
        rep.outlier_dense.rows_per_layer.push_back(std::move(dense_rows));
        rep.random_control.rows_per_layer.push_back(std::move(random_rows));
    }

    for (StressArm* arm : {&rep.outlier_dense, &rep.random_control}) {
        const EvalRecord ev = evaluate_models(model, arm->model, x_per_layer.front());
        for (const auto& le : ev.per_layer) arm->layer_recon_quality.push_back(le.recon_quality);
        arm->end_to_end_cosine = ev.end_to_end_cosine;
        arm->toy_loss_delta = ev.toy_loss_delta;
    }
    return rep;
}

} // namespace trim
