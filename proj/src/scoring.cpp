#include "trim/scoring.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace trim {

std::string to_token(ScoreMetric m) {
    switch (m) {
        case ScoreMetric::magnitude: return "magnitude";
        case ScoreMetric::wanda: return "wanda";
        case ScoreMetric::sparsegpt: return "sparsegpt";
        case ScoreMetric::gblm: return "gblm";
    }
    return "?";
}

ScoreMetric score_metric_from_token(const std::string& token) {
    if (token == "magnitude") return ScoreMetric::magnitude;
    if (token == "wanda") return ScoreMetric::wanda;
    if (token == "sparsegpt") return ScoreMetric::sparsegpt;
    if (token == "gblm") return ScoreMetric::gblm;
    throw usage_error("unknown score metric '" + token + "'");
}

GradientMatrix::GradientMatrix(Matrix g, double blend_coeff)
    : grads_(std::move(g)), blend_(blend_coeff) {
    if (blend_ < 0.0 || !std::isfinite(blend_)) {
        throw usage_error("gblm blend must be finite and >= 0");
    }
    grads_.require_finite("gradient matrix");
    for (float v : grads_.data()) {
        if (v < 0.0f) {
            throw numeric_error("gradient matrix holds a negative magnitude");
        }
    }
}

std::vector<double> feature_norms(const Matrix& x) {
    std::vector<double> norms(x.rows());
    for (std::size_t j = 0; j < x.rows(); ++j) {
        norms[j] = row_l2_norm(x, j);
    }
    return norms;
}

HessianDiag hessian_inv_diag(const Matrix& x, double damping) {
    if (!(damping > 0.0)) {
        throw usage_error("hessian damping must be > 0");
    }
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto l = static_cast<Eigen::Index>(x.cols());

    Eigen::MatrixXd xd(n, l);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < l; ++j) {
            xd(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    Eigen::MatrixXd h = xd * xd.transpose();
    const double mean_diag = h.diagonal().mean();
    h.diagonal().array() += damping * mean_diag;

    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) {
        throw numeric_error("Hessian Cholesky failed (n=" + std::to_string(x.rows()) +
                            ", damping=" + std::to_string(damping) +
                            ", mean diag=" + std::to_string(mean_diag) + ")");
    }
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));

    HessianDiag out;
    out.damping = damping;
    out.inv_diag.resize(x.rows());
    for (Eigen::Index j = 0; j < n; ++j) {
        const double v = inv(j, j);
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw numeric_error("diag(H^-1)[" + std::to_string(j) + "] = " + std::to_string(v) +
                                " is not positive; increase damping");
        }
        out.inv_diag[static_cast<std::size_t>(j)] = v;
    }
    return out;
}

namespace {

void require_feature_count(const Matrix& w, const Matrix& x) {
    if (w.cols() != x.rows()) {
        throw shape_error("weights have " + std::to_string(w.cols()) +
                          " input features but activations have " + std::to_string(x.rows()) +
                          " rows");
    }
    if (x.cols() < 1) {
        throw shape_error("activation batch must hold at least one sample");
    }
}

} // namespace

ScoreMatrix score_magnitude(const Matrix& w) {
    Matrix a(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.size(); ++i) {
        a.data()[i] = std::abs(w.data()[i]);
    }
    return {std::move(a), ScoreMetric::magnitude};
}

ScoreMatrix score_wanda(const Matrix& w, const Matrix& x) {
    require_feature_count(w, x);
    const std::vector<double> norms = feature_norms(x);
    Matrix a(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            a(i, j) = static_cast<float>(std::abs(static_cast<double>(w(i, j))) * norms[j]);
        }
    }
    a.require_finite("wanda scores");
    return {std::move(a), ScoreMetric::wanda};
}

ScoreMatrix score_sparsegpt(const Matrix& w, const Matrix& x, double damping) {
    require_feature_count(w, x);
    const HessianDiag h = hessian_inv_diag(x, damping);
    Matrix a(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            const double wij = w(i, j);
            a(i, j) = static_cast<float>(wij * wij / h.inv_diag[j]);
        }
    }
    a.require_finite("sparsegpt scores");
    return {std::move(a), ScoreMetric::sparsegpt};
}

ScoreMatrix score_gblm(const Matrix& w, const Matrix& x, const GradientMatrix& g) {
    require_feature_count(w, x);
    require_same_shape(w, g.grads(), "gblm gradients");
    const std::vector<double> norms = feature_norms(x);
    Matrix a(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            const double term = norms[j] + g.blend() * static_cast<double>(g.grads()(i, j));
            a(i, j) = static_cast<float>(std::abs(static_cast<double>(w(i, j))) * term);
        }
    }
    a.require_finite("gblm scores");
    return {std::move(a), ScoreMetric::gblm};
}

} // namespace trim
