#pragma once

#include <string>
#include <vector>

#include "trim/matrix.hpp"

namespace trim {

enum class ScoreMetric { magnitude, wanda, sparsegpt, gblm };

std::string to_token(ScoreMetric m);
ScoreMetric score_metric_from_token(const std::string& token);

// Per-weight importance scores A, same shape as W, nonnegative and finite.
struct ScoreMatrix {
    Matrix scores;
    ScoreMetric metric = ScoreMetric::wanda;
};

// Entrywise |dL/dW| magnitudes plus the blend coefficient for gblm.
struct GradientMatrix {
    GradientMatrix(Matrix g, double blend_coeff);
    const Matrix& grads() const { return grads_; }
    double blend() const { return blend_; }

private:
    Matrix grads_;
    double blend_;
};

// diag(H^-1) for H = X X^T + damping * mean(diag) * I over input features.
struct HessianDiag {
    std::vector<double> inv_diag;
    double damping = 0.0;
};

// Damping factor relative to mean(diag(X X^T)).
constexpr double kDefaultHessianDamping = 1e-2;

// L2 norm of each input feature (row of X) across the calibration samples.
std::vector<double> feature_norms(const Matrix& x);

HessianDiag hessian_inv_diag(const Matrix& x, double damping);

// A_ij = |W_ij|
ScoreMatrix score_magnitude(const Matrix& w);

// A_ij = |W_ij| * ||X_{j,:}||_2
ScoreMatrix score_wanda(const Matrix& w, const Matrix& x);

// A_ij = W_ij^2 / (H^-1)_jj
ScoreMatrix score_sparsegpt(const Matrix& w, const Matrix& x, double damping);

// A_ij = |W_ij| * (||X_{j,:}||_2 + blend * G_ij)
ScoreMatrix score_gblm(const Matrix& w, const Matrix& x, const GradientMatrix& g);

} // namespace trim
