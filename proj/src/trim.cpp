#include "trim/trim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace trim {

void TrimConfig::validate() const {
    if (k_iters < 1) {
        throw usage_error("k_iters must be >= 1");
    }
    if (!(cutoff > 0.0 && cutoff < 1.0)) {
        throw usage_error("cutoff must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) {
        throw usage_error("epsilon must be > 0");
    }
    if (lr_schedule.empty()) {
        throw usage_error("lr schedule must be non-empty");
    }
    double prev = 0.0;
    for (double lr : lr_schedule) {
        if (!(lr > prev)) {
            throw usage_error("lr schedule must be strictly increasing and positive");
        }
        prev = lr;
    }
}

std::vector<double> normalize_minmax(const std::vector<double>& c, double epsilon) {
    if (c.empty()) return {};
    const auto [lo_it, hi_it] = std::minmax_element(c.begin(), c.end());
    const double lo = *lo_it;
    const double span = *hi_it - lo + epsilon;
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        out[i] = (c[i] - lo) / span;
    }
    return out;
}

std::vector<double> recenter(const std::vector<double>& delta, double t) {
    std::vector<double> out(delta.size());
    if (delta.empty()) return out;
    const double mean =
        std::accumulate(delta.begin(), delta.end(), 0.0) / static_cast<double>(delta.size());
    for (std::size_t i = 0; i < delta.size(); ++i) {
        out[i] = delta[i] - mean + t;
    }
    // Second pass kills the residual roundoff; subtracting a constant keeps
    // all pairwise differences intact.
    const double resid =
        std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size()) - t;
    for (double& v : out) v -= resid;
    return out;
}

std::vector<double> clamp_recenter(std::vector<double> s, double t, double cutoff) {
    const std::size_t d = s.size();
    if (d == 0) return s;
    if (t < 0.0 || t > cutoff) {
        throw budget_error("target " + std::to_string(t) + " infeasible under cutoff " +
                           std::to_string(cutoff));
    }
    const double want = t * static_cast<double>(d);
    for (std::size_t pass = 0; pass <= d; ++pass) {
        for (double& v : s) v = std::clamp(v, 0.0, cutoff);
        double sum = std::accumulate(s.begin(), s.end(), 0.0);
        const double deficit = want - sum;
        if (std::abs(deficit) <= 1e-12 * static_cast<double>(d)) {
            return s;
        }
        double headroom = 0.0;
        for (double v : s) {
            headroom += (deficit > 0.0) ? (cutoff - v) : v;
        }
        if (headroom < std::abs(deficit) - 1e-12) {
            throw budget_error("sparsity mass cannot be redistributed under the cutoff");
        }
        if (headroom <= 0.0) {
            throw budget_error("all rows saturated while recentering sparsity");
        }
        for (double& v : s) {
            const double cap = (deficit > 0.0) ? (cutoff - v) : v;
            v += deficit * cap / headroom;
        }
    }
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(d);
    if (std::abs(mean - t) > 1e-9) {
        throw budget_error("sparsity recentering did not converge");
    }
    for (double& v : s) v = std::clamp(v, 0.0, cutoff);
    return s;
}

TrimResult trim_adjust(const Matrix& w, const Matrix& x, const ScoreMatrix& a, double t,
                       double alpha, const TrimConfig& cfg) {
    cfg.validate();
    if (!(t >= 0.0 && t < cfg.cutoff)) {
        throw usage_error("target sparsity " + std::to_string(t) + " must lie in [0, cutoff)");
    }
    require_same_shape(w, a.scores, "trim_adjust scores");
    if (w.cols() != x.rows()) {
        throw shape_error("trim_adjust: weights expect " + std::to_string(w.cols()) +
                          " input features, activations have " + std::to_string(x.rows()));
    }

    const std::size_t d = w.rows();
    const Matrix y = matmul(w, x);

    std::vector<double> s(d, t);
    std::vector<double> s_best = s;
    double q_best = -std::numeric_limits<double>::infinity();

    TrimResult res;
    res.s_best = SparsityVector::uniform(d, t, cfg.cutoff);
    res.chosen_lr = alpha;
    res.evaluated_lrs = {alpha};
    res.per_iter_quality.reserve(cfg.k_iters);

    for (std::size_t k = 0; k < cfg.k_iters; ++k) {
        const SparsityVector sv(s, t, cfg.cutoff);
        const PruneMask mask = build_mask(a, sv, ComparisonGroup::per_output());
        const Matrix yhat = matmul(apply_mask(w, mask), x);

        const double q_k = qmetric(y, yhat, cfg.layer_metric).value;
        if (!std::isfinite(q_k)) {
            throw numeric_error("layer quality is not finite at iteration " + std::to_string(k));
        }
        res.per_iter_quality.push_back(q_k);
        if (k == 0) {
            res.q_uniform = q_k; // iteration 0 prunes with the uniform vector
        }
        if (q_k > q_best) {
            q_best = q_k;
            s_best = s;
        }

        res.dim_quality_final = qmetric_dimwise(y, yhat, cfg.dim_metric);
        const std::vector<double> c_norm = normalize_minmax(res.dim_quality_final.c, cfg.epsilon);
        std::vector<double> delta(d);
        for (std::size_t i = 0; i < d; ++i) {
            delta[i] = alpha * c_norm[i];
        }
        s = clamp_recenter(recenter(delta, t), t, cfg.cutoff);
    }

    res.s_best = SparsityVector(s_best, t, cfg.cutoff);
    res.q_best = q_best;
    return res;
}

TrimResult lr_search(const Matrix& w, const Matrix& x, const ScoreMatrix& a, double t,
                     const TrimConfig& cfg) {
    cfg.validate();

    std::vector<double> evaluated;
    auto walk = [&](double sign) -> TrimResult {
        TrimResult best;
        best.s_best = SparsityVector::uniform(w.rows(), t, cfg.cutoff);
        bool have = false;
        for (double lr : cfg.lr_schedule) {
            TrimResult r = trim_adjust(w, x, a, t, sign * lr, cfg);
            evaluated.push_back(sign * lr);
            if (!have || r.q_best > best.q_best) {
                best = std::move(r);
                have = true;
            } else {
                break; // a larger rate stopped improving q_best
            }
        }
        return best;
    };

    TrimResult best = walk(+1.0);
    if (!(best.q_best > best.q_uniform)) {
        TrimResult neg = walk(-1.0);
        if (neg.q_best > neg.q_uniform && neg.q_best > best.q_best) {
            best = std::move(neg);
        }
    }
    if (!(best.q_best > best.q_uniform)) {
        // Nothing beat uniform; the tracked best is the uniform vector itself.
        best.chosen_lr = 0.0;
    }
    best.evaluated_lrs = std::move(evaluated);
    return best;
}

} // namespace trim
