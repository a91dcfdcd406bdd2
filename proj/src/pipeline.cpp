#include "trim/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "trim/container.hpp"

namespace trim {

std::string to_token(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::gelu: return "gelu";
        case Activation::none: return "none";
    }
    return "?";
}

Activation activation_from_token(const std::string& token) {
    if (token == "relu") return Activation::relu;
    if (token == "gelu") return Activation::gelu;
    if (token == "none") return Activation::none;
    throw usage_error("unknown activation '" + token + "'");
}

namespace {

double gelu_value(double v) {
    return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
}

double activation_value(Activation a, double v) {
    switch (a) {
        case Activation::relu: return v > 0.0 ? v : 0.0;
        case Activation::gelu: return gelu_value(v);
        case Activation::none: return v;
    }
    return v;
}

double activation_grad(Activation a, double v) {
    switch (a) {
        case Activation::relu: return v > 0.0 ? 1.0 : 0.0;
        case Activation::gelu: {
            const double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
            const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * 3.14159265358979323846);
            return cdf + v * pdf;
        }
        case Activation::none: return 1.0;
    }
    return 1.0;
}

Matrix apply_activation(Activation a, const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out.data()[i] = static_cast<float>(activation_value(a, z.data()[i]));
    }
    return out;
}

} // namespace

std::size_t ToyModel::output_dim() const {
    return layers.empty() ? input_dim : layers.back().weight.rows();
}

void ToyModel::validate() const {
    if (layers.empty()) {
        throw shape_error("model has no layers");
    }
    std::size_t expect = input_dim;
    for (const ModelLayer& l : layers) {
        if (l.weight.cols() != expect) {
            throw shape_error("layer '" + l.name + "' expects " + std::to_string(expect) +
                              " inputs but has " + std::to_string(l.weight.cols()) + " columns");
        }
        if (l.weight.rows() == 0) {
            throw shape_error("layer '" + l.name + "' has no output dimensions");
        }
        expect = l.weight.rows();
    }
}

CalibrationSet synthetic_calibration(Seed seed, std::size_t input_dim, std::size_t n_samples) {
    if (n_samples < 1) {
        throw usage_error("calibration set needs at least one sample");
    }
    return {gaussian_matrix(seed, input_dim, n_samples)};
}

ForwardTrace forward(const ToyModel& model, const Matrix& input) {
    model.validate();
    if (input.rows() != model.input_dim) {
        throw shape_error("forward: input has " + std::to_string(input.rows()) +
                          " rows, model expects " + std::to_string(model.input_dim));
    }
    ForwardTrace trace;
    Matrix h = input;
    for (const ModelLayer& l : model.layers) {
        trace.layer_inputs.push_back(h);
        h = apply_activation(l.act, matmul(l.weight, h));
    }
    trace.output = std::move(h);
    return trace;
}

std::vector<Matrix> capture_activations(const ToyModel& model, const CalibrationSet& calib) {
    return forward(model, calib.samples).layer_inputs;
}

std::vector<Matrix> backprop_weight_grads(const ToyModel& model, const Matrix& input,
                                          const Matrix& targets) {
    model.validate();
    // Forward pass keeping pre-activations.
    std::vector<Matrix> inputs;
    std::vector<Matrix> preacts;
    Matrix h = input;
    for (const ModelLayer& l : model.layers) {
        inputs.push_back(h);
        Matrix z = matmul(l.weight, h);
        preacts.push_back(z);
        h = apply_activation(l.act, z);
    }
    if (!h.same_shape(targets)) {
        throw shape_error("targets shape " + std::to_string(targets.rows()) + "x" +
                          std::to_string(targets.cols()) + " does not match model output " +
                          std::to_string(h.rows()) + "x" + std::to_string(h.cols()));
    }

    // L = sum((output - targets)^2); dL/doutput = 2 * (output - targets).
    Matrix dh(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.size(); ++i) {
        dh.data()[i] = static_cast<float>(
            2.0 * (static_cast<double>(h.data()[i]) - static_cast<double>(targets.data()[i])));
    }

    std::vector<Matrix> grads(model.layers.size());
    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const ModelLayer& l = model.layers[li];
        Matrix dz(dh.rows(), dh.cols());
        for (std::size_t i = 0; i < dz.size(); ++i) {
            dz.data()[i] = static_cast<float>(
                static_cast<double>(dh.data()[i]) *
                activation_grad(l.act, preacts[li].data()[i]));
        }
        grads[li] = matmul(dz, transpose(inputs[li]));
        if (li > 0) {
            dh = matmul(transpose(l.weight), dz);
        }
    }
    return grads;
}

std::vector<GradientMatrix> capture_gradients(const ToyModel& model, const CalibrationSet& calib,
                                              const Matrix& targets, double blend) {
    std::vector<Matrix> signed_grads = backprop_weight_grads(model, calib.samples, targets);
    std::vector<GradientMatrix> out;
    out.reserve(signed_grads.size());
    for (Matrix& g : signed_grads) {
        for (float& v : g.data()) v = std::abs(v);
        out.emplace_back(std::move(g), blend);
    }
    return out;
}

std::vector<ScoreMatrix> score_layers(const ToyModel& model,
                                      const std::vector<Matrix>& activations,
                                      const ScoringConfig& cfg) {
    if (activations.size() != model.layers.size()) {
        throw shape_error("score_layers: one activation batch per layer required");
    }
    if (cfg.metric == ScoreMetric::gblm && cfg.grad_magnitudes.size() != model.layers.size()) {
        throw usage_error("gblm scoring needs one gradient matrix per layer");
    }
    std::vector<ScoreMatrix> scores;
    scores.reserve(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Matrix& w = model.layers[i].weight;
        switch (cfg.metric) {
            case ScoreMetric::magnitude:
                scores.push_back(score_magnitude(w));
                break;
            case ScoreMetric::wanda:
                scores.push_back(score_wanda(w, activations[i]));
                break;
            case ScoreMetric::sparsegpt:
                scores.push_back(score_sparsegpt(w, activations[i], cfg.damping));
                break;
            case ScoreMetric::gblm:
                scores.push_back(score_gblm(w, activations[i],
                                            GradientMatrix(cfg.grad_magnitudes[i],
                                                           cfg.gblm_blend)));
                break;
        }
    }
    return scores;
}

PruneRun prune_model(const ToyModel& model, const CalibrationSet& calib,
                     const ScoringConfig& scores_cfg, const LayerAllocation& allocation,
                     const TrimConfig& trim_cfg, bool trim_enabled, bool recalc,
                     const ComparisonGroup& group) {
    model.validate();
    trim_cfg.validate();
    if (allocation.layers.size() != model.layers.size()) {
        throw usage_error("allocation lists " + std::to_string(allocation.layers.size()) +
                          " layers, model has " + std::to_string(model.layers.size()));
    }
    // Budgets match by name; allocation files may order layers differently.
    std::vector<double> layer_t(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const std::string& name = model.layers[i].name;
        bool found = false;
        for (const LayerBudget& b : allocation.layers) {
            if (b.name == name) {
                layer_t[i] = b.t;
                found = true;
                break;
            }
        }
        if (!found) {
            throw usage_error("allocation has no budget for layer '" + name + "'");
        }
    }
    if (trim_enabled && group.kind != ComparisonGroup::Kind::per_output) {
        throw usage_error("dimension-wise adjustment requires the per_output comparison group");
    }

    // Scores are pinned to the dense model's activation statistics; the recalc
    // option only affects the activations used for quality evaluation.
    const std::vector<Matrix> dense_acts = capture_activations(model, calib);
    const std::vector<ScoreMatrix> scores = score_layers(model, dense_acts, scores_cfg);

    PruneRun run;
    run.allocation = allocation;
    run.trim_enabled = trim_enabled;
    run.recalc_enabled = recalc;
    run.metric = scores_cfg.metric;
    run.scores = scores;
    run.pruned = model;

    Matrix recalc_h = calib.samples;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const ModelLayer& layer = model.layers[li];
        const double t = layer_t[li];
        const Matrix& x_eval = recalc ? recalc_h : dense_acts[li];

        LayerRecord rec;
        rec.layer = layer.name;
        rec.t = t;
        if (trim_enabled) {
            rec.result = lr_search(layer.weight, x_eval, scores[li], t, trim_cfg);
            rec.mask = build_mask(scores[li], rec.result.s_best, group);
        } else {
            // Uniform row budgets under the requested comparison group; the
            // recorded quality reflects that group's mask.
            const SparsityVector uniform_s =
                SparsityVector::uniform(layer.weight.rows(), t, trim_cfg.cutoff);
            rec.mask = build_mask(scores[li], uniform_s, group);
            const Matrix y = matmul(layer.weight, x_eval);
            const Matrix yhat = matmul(apply_mask(layer.weight, rec.mask), x_eval);
            const double q = qmetric(y, yhat, trim_cfg.layer_metric).value;
            rec.result.s_best = uniform_s;
            rec.result.q_best = q;
            rec.result.q_uniform = q;
            rec.result.chosen_lr = 0.0;
            rec.result.per_iter_quality = {q};
            rec.result.dim_quality_final = qmetric_dimwise(y, yhat, trim_cfg.dim_metric);
        }
        run.pruned.layers[li].weight = apply_mask(layer.weight, rec.mask);
        run.layers.push_back(std::move(rec));

        if (recalc) {
            recalc_h = apply_activation(run.pruned.layers[li].act,
                                        matmul(run.pruned.layers[li].weight, recalc_h));
        }
    }

    run.calib_eval = evaluate_models(model, run.pruned, calib.samples);
    return run;
}

EvalRecord evaluate_models(const ToyModel& dense, const ToyModel& pruned, const Matrix& samples,
                           const Matrix* targets) {
    dense.validate();
    pruned.validate();
    if (dense.layers.size() != pruned.layers.size()) {
        throw shape_error("evaluate_models: layer count mismatch");
    }

    EvalRecord rec;
    Matrix h_dense = samples;
    Matrix h_pruned = samples;
    for (std::size_t li = 0; li < dense.layers.size(); ++li) {
        h_dense = apply_activation(dense.layers[li].act, matmul(dense.layers[li].weight, h_dense));
        h_pruned =
            apply_activation(pruned.layers[li].act, matmul(pruned.layers[li].weight, h_pruned));
        rec.per_layer.push_back(
            {dense.layers[li].name, qmetric(h_dense, h_pruned, LayerMetric::cosim_flat).value});
    }
    rec.end_to_end_cosine =
        cosine_similarity(h_dense.data().data(), h_pruned.data().data(), h_dense.size());

    auto mse_vs = [](const Matrix& a, const Matrix& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
            s += d * d;
        }
        return s / static_cast<double>(a.size());
    };
    if (targets != nullptr) {
        if (!targets->same_shape(h_dense)) {
            throw shape_error("evaluate_models: target shape mismatch");
        }
        rec.toy_loss_delta = mse_vs(h_pruned, *targets) - mse_vs(h_dense, *targets);
    } else {
        rec.toy_loss_delta = mse_vs(h_pruned, h_dense);
    }
    return rec;
}

EvalRecord evaluate_run(const ToyModel& dense, const PruneRun& run, const CalibrationSet& holdout,
                        const Matrix* targets) {
    return evaluate_models(dense, run.pruned, holdout.samples, targets);
}

void save_model(const ToyModel& model, const std::string& container_path,
                const std::string& sidecar_path) {
    model.validate();
    TensorContainer c;
    for (const ModelLayer& l : model.layers) {
        c.put_matrix(l.name + ".weight", l.weight);
    }
    save_container(c, container_path);

    nlohmann::json j;
    j["input_dim"] = model.input_dim;
    j["layers"] = nlohmann::json::array();
    for (const ModelLayer& l : model.layers) {
        j["layers"].push_back({{"name", l.name}, {"activation", to_token(l.act)}});
    }
    const std::string tmp = sidecar_path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw format_error("cannot write model sidecar '" + tmp + "'");
        }
        out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, sidecar_path);
}

ToyModel load_model(const std::string& container_path, const std::string& sidecar_path) {
    const TensorContainer c = load_container(container_path);

    std::ifstream in(sidecar_path);
    if (!in) {
        throw format_error("cannot open model sidecar '" + sidecar_path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("model sidecar is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("input_dim") || !j.contains("layers")) {
        throw format_error("model sidecar must carry input_dim and layers");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() != "input_dim" && it.key() != "layers") {
            throw format_error("unknown key '" + it.key() + "' in model sidecar");
        }
    }

    ToyModel model;
    model.input_dim = j["input_dim"].get<std::size_t>();
    for (const auto& lj : j["layers"]) {
        for (auto it = lj.begin(); it != lj.end(); ++it) {
            if (it.key() != "name" && it.key() != "activation") {
                throw format_error("unknown key '" + it.key() + "' in model sidecar layer");
            }
        }
        ModelLayer l;
        l.name = lj.at("name").get<std::string>();
        l.act = activation_from_token(lj.at("activation").get<std::string>());
        l.weight = c.matrix_at(l.name + ".weight");
        model.layers.push_back(std::move(l));
    }
    model.validate();
    return model;
}

} // namespace trim
