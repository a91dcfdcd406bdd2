#pragma once

#include <string>
#include <vector>

#include "trim/matrix.hpp"

namespace trim {

// All metrics are normalized so larger = better; MSE is exposed negated.
enum class LayerMetric { cosim_flat, cosim_sample, neg_mse };
enum class DimMetric { cosine, psnr, neg_mse };

// CLI tokens: cosim_flat, cosim_sample, neg_mse, cosine, psnr.
std::string to_token(LayerMetric m);
std::string to_token(DimMetric m);
LayerMetric layer_metric_from_token(const std::string& token);
DimMetric dim_metric_from_token(const std::string& token);

struct LayerQuality {
    double value = 0.0;
    LayerMetric metric = LayerMetric::cosim_flat;
};

struct DimQualityVector {
    std::vector<double> c;
    DimMetric metric = DimMetric::cosine;
};

// PSNR is clamped to +-120 dB so zero-error rows stay finite.
constexpr double kPsnrCapDb = 120.0;

LayerQuality qmetric(const Matrix& y, const Matrix& yhat, LayerMetric metric);
DimQualityVector qmetric_dimwise(const Matrix& y, const Matrix& yhat, DimMetric metric);

// Cosine of two equal-length vectors with the zero-norm convention: 0 when
// exactly one side is all-zero, 1 when both are. Used by every cosine variant.
double cosine_similarity(const float* a, const float* b, std::size_t n, std::size_t stride_a = 1,
                         std::size_t stride_b = 1);

} // namespace trim
