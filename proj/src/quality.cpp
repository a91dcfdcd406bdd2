#include "trim/quality.hpp"

#include <algorithm>
#include <cmath>

namespace trim {

std::string to_token(LayerMetric m) {
    switch (m) {
        case LayerMetric::cosim_flat: return "cosim_flat";
        case LayerMetric::cosim_sample: return "cosim_sample";
        case LayerMetric::neg_mse: return "neg_mse";
    }
    return "?";
}

std::string to_token(DimMetric m) {
    switch (m) {
        case DimMetric::cosine: return "cosine";
        case DimMetric::psnr: return "psnr";
        case DimMetric::neg_mse: return "neg_mse";
    }
    return "?";
}

LayerMetric layer_metric_from_token(const std::string& token) {
    if (token == "cosim_flat") return LayerMetric::cosim_flat;
    if (token == "cosim_sample") return LayerMetric::cosim_sample;
    if (token == "neg_mse") return LayerMetric::neg_mse;
    throw usage_error("unknown layer metric '" + token + "'");
}

DimMetric dim_metric_from_token(const std::string& token) {
    if (token == "cosine") return DimMetric::cosine;
    if (token == "psnr") return DimMetric::psnr;
    if (token == "neg_mse") return DimMetric::neg_mse;
    throw usage_error("unknown dimension metric '" + token + "'");
}

double cosine_similarity(const float* a, const float* b, std::size_t n, std::size_t stride_a,
                         std::size_t stride_b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i * stride_a];
        const double y = b[i * stride_b];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) {
        return (na == 0.0 && nb == 0.0) ? 1.0 : 0.0;
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

double mse(const Matrix& y, const Matrix& yhat) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = static_cast<double>(y.data()[i]) - static_cast<double>(yhat.data()[i]);
        s += d * d;
    }
    return y.size() > 0 ? s / static_cast<double>(y.size()) : 0.0;
}

double row_mse(const Matrix& y, const Matrix& yhat, std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) {
        const double d = static_cast<double>(y(i, j)) - static_cast<double>(yhat(i, j));
        s += d * d;
    }
    return y.cols() > 0 ? s / static_cast<double>(y.cols()) : 0.0;
}

} // namespace

LayerQuality qmetric(const Matrix& y, const Matrix& yhat, LayerMetric metric) {
    require_same_shape(y, yhat, "qmetric");
    LayerQuality q;
    q.metric = metric;
    switch (metric) {
        case LayerMetric::cosim_flat:
            q.value = cosine_similarity(y.data().data(), yhat.data().data(), y.size());
            break;
        case LayerMetric::cosim_sample: {
            // Per-sample (column) cosine, averaged.
            double s = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j) {
                s += cosine_similarity(y.data().data() + j, yhat.data().data() + j, y.rows(),
                                       y.cols(), y.cols());
            }
            q.value = y.cols() > 0 ? s / static_cast<double>(y.cols()) : 1.0;
            break;
        }
        case LayerMetric::neg_mse:
            q.value = -mse(y, yhat);
            break;
    }
    return q;
}

DimQualityVector qmetric_dimwise(const Matrix& y, const Matrix& yhat, DimMetric metric) {
    require_same_shape(y, yhat, "qmetric_dimwise");
    DimQualityVector out;
    out.metric = metric;
    out.c.resize(y.rows());

    double peak = 0.0; // max |Y| over the whole layer output, PSNR reference
    if (metric == DimMetric::psnr) {
        for (float v : y.data()) peak = std::max(peak, std::abs(static_cast<double>(v)));
    }

    for (std::size_t i = 0; i < y.rows(); ++i) {
        switch (metric) {
            case DimMetric::cosine:
                out.c[i] = cosine_similarity(y.data().data() + i * y.cols(),
                                             yhat.data().data() + i * y.cols(), y.cols());
                break;
            case DimMetric::psnr: {
                const double m = row_mse(y, yhat, i);
                double v;
                if (m == 0.0) {
                    v = kPsnrCapDb;
                } else if (peak == 0.0) {
                    v = -kPsnrCapDb;
                } else {
                    v = 10.0 * std::log10(peak * peak / m);
                }
                out.c[i] = std::clamp(v, -kPsnrCapDb, kPsnrCapDb);
                break;
            }
            case DimMetric::neg_mse:
                out.c[i] = -row_mse(y, yhat, i);
                break;
        }
    }
    return out;
}

} // namespace trim
