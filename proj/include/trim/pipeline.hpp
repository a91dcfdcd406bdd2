#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trim/allocation.hpp"
#include "trim/masking.hpp"
#include "trim/rng.hpp"
#include "trim/trim.hpp"

namespace trim {

enum class Activation { relu, gelu, none };

std::string to_token(Activation a);
Activation activation_from_token(const std::string& token);

struct ModelLayer {
    std::string name;
    Matrix weight; // D x N
    Activation act = Activation::relu;
};

// MLP chain: layer i maps R^N -> R^D, layer i+1 consumes layer i's output.
struct ToyModel {
    std::vector<ModelLayer> layers;
    std::size_t input_dim = 0;

    std::size_t output_dim() const;
    void validate() const;
};

struct CalibrationSet {
    Matrix samples; // input_dim x L
};

CalibrationSet synthetic_calibration(Seed seed, std::size_t input_dim, std::size_t n_samples);

struct ForwardTrace {
    std::vector<Matrix> layer_inputs; // input seen by each layer, pre-multiply
    Matrix output;                    // final post-activation output
};

ForwardTrace forward(const ToyModel& model, const Matrix& input);

// Inputs recorded on the unpruned model, one ActivationBatch per layer.
std::vector<Matrix> capture_activations(const ToyModel& model, const CalibrationSet& calib);

// Signed dL/dW per layer for L = sum of squared errors against targets.
std::vector<Matrix> backprop_weight_grads(const ToyModel& model, const Matrix& input,
                                          const Matrix& targets);

// Entrywise |dL/dW| packaged with the gblm blend coefficient.
std::vector<GradientMatrix> capture_gradients(const ToyModel& model, const CalibrationSet& calib,
                                              const Matrix& targets, double blend);

struct ScoringConfig {
    ScoreMetric metric = ScoreMetric::wanda;
    double damping = kDefaultHessianDamping;
    double gblm_blend = 1.0;
    std::vector<Matrix> grad_magnitudes; // one per layer, required for gblm
};

std::vector<ScoreMatrix> score_layers(const ToyModel& model,
                                      const std::vector<Matrix>& activations,
                                      const ScoringConfig& cfg);

struct LayerRecord {
    std::string layer;
    double t = 0.0;
    TrimResult result;
    PruneMask mask;
};

struct EvalRecord {
    struct LayerEval {
        std::string layer;
        double recon_quality = 0.0; // cosim_flat of pruned vs dense layer output
    };
    std::vector<LayerEval> per_layer;
    double end_to_end_cosine = 0.0;
    double toy_loss_delta = 0.0;
};

struct PruneRun {
    LayerAllocation allocation;
    bool trim_enabled = true;
    bool recalc_enabled = false;
    ScoreMetric metric = ScoreMetric::wanda;
    std::vector<ScoreMatrix> scores; // per layer, always from dense activations
    std::vector<LayerRecord> layers;
    ToyModel pruned;
    EvalRecord calib_eval;
};

// Prunes layer by layer. Importance scores always come from the dense model's
// activations; with recalc on, the activations feeding the quality evaluation
// of layer l flow through the already-pruned layers before it.
PruneRun prune_model(const ToyModel& model, const CalibrationSet& calib,
                     const ScoringConfig& scores_cfg, const LayerAllocation& allocation,
                     const TrimConfig& trim_cfg, bool trim_enabled, bool recalc,
                     const ComparisonGroup& group = ComparisonGroup::per_output());

// End-to-end comparison of two models on a shared sample batch: per-layer
// output quality, final-output cosine, and the loss delta (against `targets`
// when given, else against the dense model's own output).
EvalRecord evaluate_models(const ToyModel& dense, const ToyModel& pruned, const Matrix& samples,
                           const Matrix* targets = nullptr);

EvalRecord evaluate_run(const ToyModel& dense, const PruneRun& run, const CalibrationSet& holdout,
                        const Matrix* targets = nullptr);

// Model container: "layer{i}.weight" tensors plus a JSON sidecar
// {"layers":[{"name","activation"}], "input_dim"}.
void save_model(const ToyModel& model, const std::string& container_path,
                const std::string& sidecar_path);
ToyModel load_model(const std::string& container_path, const std::string& sidecar_path);

} // namespace trim
