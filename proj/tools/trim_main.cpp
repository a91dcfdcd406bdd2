// trim: one-shot pruning experiments with dimension-wise sparsity allocation.
//
// Exit codes: 0 success, 2 usage error, 3 format error, 4 numerical/budget
// error. All outputs are written atomically (temp file + rename) and are a
// pure function of the input files, flags, and seeds.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "trim/allocation.hpp"
#include "trim/container.hpp"
#include "trim/diagnostics.hpp"
#include "trim/pipeline.hpp"
#include "trim/trim.hpp"

namespace {

using nlohmann::json;
using namespace trim;

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw format_error("cannot write '" + tmp + "'");
        }
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string default_sidecar(const std::string& model_path) {
    std::filesystem::path p(model_path);
    p.replace_extension(".json");
    return p.string();
}

double parse_double_token(const std::string& tok, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw usage_error("cannot parse '" + tok + "' in " + what);
    }
}

std::size_t parse_size_token(const std::string& tok, const std::string& what) {
    try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw usage_error("cannot parse '" + tok + "' in " + what);
    }
}

struct CalibOpts {
    std::string file;
    std::uint64_t seed = 0;
    std::size_t samples = 128;
};

void add_calib_options(CLI::App* cmd, CalibOpts& opts) {
    cmd->add_option("--calib", opts.file,
                    "Calibration container holding a 'calib' tensor (input_dim x L); "
                    "synthetic gaussian samples are drawn when omitted")
        ->capture_default_str();
    cmd->add_option("--calib-seed", opts.seed, "Seed for synthetic calibration samples")
        ->capture_default_str();
    cmd->add_option("--calib-samples", opts.samples, "Number of synthetic calibration samples")
        ->capture_default_str();
}

CalibrationSet make_calib(const CalibOpts& opts, std::size_t input_dim) {
    if (!opts.file.empty()) {
        const TensorContainer c = load_container(opts.file);
        Matrix samples = c.matrix_at("calib");
        if (samples.rows() != input_dim) {
            throw shape_error("calibration tensor has " + std::to_string(samples.rows()) +
                              " rows, model expects " + std::to_string(input_dim));
        }
        return {std::move(samples)};
    }
    return synthetic_calibration({opts.seed}, input_dim, opts.samples);
}

struct ScoreOpts {
    std::string metric = "wanda";
    double damping = kDefaultHessianDamping;
    double gblm_blend = 1.0;
    std::string grads_file;
    std::uint64_t targets_seed = 1;
};

void add_score_options(CLI::App* cmd, ScoreOpts& opts) {
    cmd->add_option("--metric", opts.metric, "Importance metric")
        ->check(CLI::IsMember({"magnitude", "wanda", "sparsegpt", "gblm"}))
        ->capture_default_str();
    cmd->add_option("--damping", opts.damping,
                    "Hessian damping (fraction of mean diagonal) for sparsegpt")
        ->capture_default_str();
    cmd->add_option("--gblm-blend", opts.gblm_blend, "Gradient blend coefficient for gblm")
        ->capture_default_str();
    cmd->add_option("--grads", opts.grads_file,
                    "Container with '<layer>.grad' tensors for gblm; gradients against "
                    "seeded synthetic targets are computed when omitted")
        ->capture_default_str();
    cmd->add_option("--targets-seed", opts.targets_seed,
                    "Seed for the synthetic gradient targets used by gblm")
        ->capture_default_str();
}

ScoringConfig make_scoring_config(const ScoreOpts& opts, const ToyModel& model,
                                  const CalibrationSet& calib) {
    ScoringConfig cfg;
    cfg.metric = score_metric_from_token(opts.metric);
    cfg.damping = opts.damping;
    cfg.gblm_blend = opts.gblm_blend;
    if (cfg.metric == ScoreMetric::gblm) {
        if (!opts.grads_file.empty()) {
            const TensorContainer g = load_container(opts.grads_file);
            for (const ModelLayer& l : model.layers) {
                cfg.grad_magnitudes.push_back(g.matrix_at(l.name + ".grad"));
            }
        } else {
            const Matrix targets =
                gaussian_matrix({opts.targets_seed}, model.output_dim(), calib.samples.cols());
            for (const GradientMatrix& g :
                 capture_gradients(model, calib, targets, opts.gblm_blend)) {
                cfg.grad_magnitudes.push_back(g.grads());
            }
        }
    }
    return cfg;
}

json eval_to_json(const EvalRecord& ev) {
    json j;
    j["per_layer"] = json::array();
    for (const auto& le : ev.per_layer) {
        j["per_layer"].push_back({{"layer", le.layer}, {"recon_quality", le.recon_quality}});
    }
    j["end_to_end_cosine"] = ev.end_to_end_cosine;
    j["toy_loss_delta"] = ev.toy_loss_delta;
    return j;
}

// ---------------------------------------------------------------- gen-model

int cmd_gen_model(const std::string& dims_str, const std::string& acts_str, std::uint64_t seed,
                  const std::string& out) {
    std::vector<std::size_t> dims;
    for (const auto& tok : CLI::detail::split(dims_str, ',')) {
        dims.push_back(parse_size_token(tok, "--dims"));
    }
    if (dims.size() < 2) {
        throw usage_error("--dims needs at least an input and one output size");
    }
    const std::size_t n_layers = dims.size() - 1;
    std::vector<std::string> acts = CLI::detail::split(acts_str, ',');
    if (acts.size() == 1) {
        // One token: hidden layers use it, the final layer stays linear.
        acts.assign(n_layers, acts.front());
        acts.back() = "none";
    }
    if (acts.size() != n_layers) {
        throw usage_error("--activations must list one token or one per layer");
    }

    Rng rng({seed});
    ToyModel model;
    model.input_dim = dims.front();
    for (std::size_t li = 0; li < n_layers; ++li) {
        Matrix w(dims[li + 1], dims[li]);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dims[li]));
        for (float& v : w.data()) v = static_cast<float>(scale * rng.gaussian());
        model.layers.push_back(
            {"layer" + std::to_string(li), std::move(w), activation_from_token(acts[li])});
    }
    save_model(model, out, default_sidecar(out));
    std::cout << "wrote " << out << " (" << n_layers << " layers)\n";
    return 0;
}

// --------------------------------------------------------------------- score

int cmd_score(const std::string& model_path, const std::string& meta_path,
              const CalibOpts& calib_opts, const ScoreOpts& score_opts,
              const std::string& inputs_file, const std::string& out) {
    const ToyModel model = load_model(model_path, meta_path);

    std::vector<Matrix> acts;
    CalibrationSet calib{Matrix(model.input_dim, 1)};
    if (!inputs_file.empty()) {
        const TensorContainer c = load_container(inputs_file);
        for (const ModelLayer& l : model.layers) {
            acts.push_back(c.matrix_at(l.name + ".input"));
        }
    } else {
        calib = make_calib(calib_opts, model.input_dim);
        acts = capture_activations(model, calib);
    }

    const ScoringConfig cfg = make_scoring_config(score_opts, model, calib);
    const std::vector<ScoreMatrix> scores = score_layers(model, acts, cfg);

    TensorContainer out_c;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        out_c.put_matrix(model.layers[li].name + ".score", scores[li].scores);
    }
    save_container(out_c, out);
    std::cout << "wrote " << out << " (" << scores.size() << " score tensors)\n";
    return 0;
}

// ------------------------------------------------------------------ allocate

int cmd_allocate(const std::string& scores_path, const std::string& import_path,
                 const std::string& method, double t, double owl_m, double owl_lambda,
                 const std::string& out) {
    LayerAllocation alloc;
    if (!import_path.empty()) {
        alloc = load_allocation(import_path);
    } else {
        if (scores_path.empty()) {
            throw usage_error("allocate needs --scores (or --import)");
        }
        const TensorContainer c = load_container(scores_path);
        std::vector<std::string> names;
        std::vector<std::uint64_t> sizes;
        std::vector<double> ratios;
        for (const auto& [name, entry] : c.entries()) {
            const std::string suffix = ".score";
            if (name.size() <= suffix.size() ||
                name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
                continue;
            }
            names.push_back(name.substr(0, name.size() - suffix.size()));
            std::uint64_t n = 1;
            for (std::uint64_t s : entry.shape) n *= s;
            sizes.push_back(n);
            if (method == "owl") {
                ratios.push_back(outlier_ratio({c.matrix_at(name), ScoreMetric::wanda}, owl_m));
            }
        }
        if (names.empty()) {
            throw format_error("no '<layer>.score' tensors in '" + scores_path + "'");
        }
        alloc = (method == "owl") ? owl_allocate(names, sizes, ratios, t, {owl_m, owl_lambda})
                                  : uniform_allocate(names, sizes, t);
    }
    save_allocation(alloc, out);
    std::cout << "wrote " << out << " (" << alloc.method << ", " << alloc.layers.size()
              << " layers)\n";
    return 0;
}

// --------------------------------------------------------------------- prune

struct PruneOpts {
    double t = 0.5;
    std::string allocation_file;
    bool no_trim = false;
    bool recalc = false;
    std::string group = "per_output";
    std::size_t block_size = 128;
    std::size_t k = 10;
    std::string lr_schedule = "0.01,0.02,0.05,0.1,0.2,0.5";
    double epsilon = 1e-8;
    double cutoff = kDefaultCutoff;
    std::string layer_metric = "cosim_flat";
    std::string dim_metric = "cosine";
};

int cmd_prune(const std::string& model_path, const std::string& meta_path,
              const CalibOpts& calib_opts, const ScoreOpts& score_opts, const PruneOpts& opts,
              const std::string& out_masks, const std::string& report_path) {
    const ToyModel model = load_model(model_path, meta_path);
    const CalibrationSet calib = make_calib(calib_opts, model.input_dim);

    LayerAllocation alloc;
    if (!opts.allocation_file.empty()) {
        alloc = load_allocation(opts.allocation_file);
    } else {
        std::vector<std::string> names;
        std::vector<std::uint64_t> sizes;
        for (const ModelLayer& l : model.layers) {
            names.push_back(l.name);
            sizes.push_back(l.weight.size());
        }
        alloc = uniform_allocate(names, sizes, opts.t);
    }

    TrimConfig cfg;
    cfg.k_iters = opts.k;
    cfg.lr_schedule.clear();
    for (const auto& tok : CLI::detail::split(opts.lr_schedule, ',')) {
        cfg.lr_schedule.push_back(parse_double_token(tok, "--lr-schedule"));
    }
    cfg.epsilon = opts.epsilon;
    cfg.cutoff = opts.cutoff;
    cfg.layer_metric = layer_metric_from_token(opts.layer_metric);
    cfg.dim_metric = dim_metric_from_token(opts.dim_metric);

    const ComparisonGroup group = comparison_group_from_token(opts.group, opts.block_size);
    if (!opts.no_trim && group.kind != ComparisonGroup::Kind::per_output) {
        throw usage_error("--group other than per_output requires --no-trim");
    }

    const ScoringConfig scores_cfg = make_scoring_config(score_opts, model, calib);
    const PruneRun run =
        prune_model(model, calib, scores_cfg, alloc, cfg, !opts.no_trim, opts.recalc, group);

    TensorContainer masks;
    for (std::size_t li = 0; li < run.layers.size(); ++li) {
        const LayerRecord& rec = run.layers[li];
        Matrix m(rec.mask.rows, rec.mask.cols);
        for (std::size_t i = 0; i < rec.mask.mask.size(); ++i) {
            m.data()[i] = rec.mask.mask[i] ? 1.0f : 0.0f;
        }
        masks.put_matrix(rec.layer + ".mask", m);
        masks.put_vector(rec.layer + ".svec", rec.result.s_best.values());
        masks.put_matrix(rec.layer + ".score", run.scores[li].scores);
    }
    save_container(masks, out_masks);

    json rep;
    rep["schema_version"] = 1;
    rep["command"] = "prune";
    rep["global_t"] = alloc.global_t;
    rep["method"] = alloc.method;
    rep["metric"] = to_token(run.metric);
    rep["trim"] = run.trim_enabled;
    rep["recalc"] = run.recalc_enabled;
    rep["group"] = to_token(group.kind);
    rep["calib"] = {{"source", calib_opts.file.empty() ? "synthetic_gaussian" : "container_file"},
                    {"seed", calib_opts.seed},
                    {"samples", calib.samples.cols()}};
    rep["config"] = {{"k", cfg.k_iters},
                     {"lr_schedule", cfg.lr_schedule},
                     {"epsilon", cfg.epsilon},
                     {"cutoff", cfg.cutoff},
                     {"layer_metric", to_token(cfg.layer_metric)},
                     {"dim_metric", to_token(cfg.dim_metric)}};
    rep["layers"] = json::array();
    for (const LayerRecord& rec : run.layers) {
        rep["layers"].push_back({{"layer", rec.layer},
                                 {"t", rec.t},
                                 {"chosen_lr", rec.result.chosen_lr},
                                 {"q_uniform", rec.result.q_uniform},
                                 {"q_best", rec.result.q_best},
                                 {"per_iter_quality", rec.result.per_iter_quality},
                                 {"evaluated_lrs", rec.result.evaluated_lrs},
                                 {"pruned_count", rec.mask.pruned_count},
                                 {"s_vector_ref", rec.layer + ".svec"}});
    }
    rep["eval"] = eval_to_json(run.calib_eval);
    write_text_atomic(report_path, rep.dump(2) + "\n");
    std::cout << "wrote " << out_masks << " and " << report_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------- eval

int cmd_eval(const std::string& model_path, const std::string& meta_path,
             const std::string& masks_path, std::uint64_t holdout_seed,
             std::size_t holdout_samples, const std::string& out) {
    const ToyModel model = load_model(model_path, meta_path);
    const TensorContainer masks = load_container(masks_path);

    ToyModel pruned = model;
    for (ModelLayer& l : pruned.layers) {
        const Matrix m = masks.matrix_at(l.name + ".mask");
        if (!m.same_shape(l.weight)) {
            throw shape_error("mask for '" + l.name + "' does not match the weight shape");
        }
        for (std::size_t i = 0; i < l.weight.size(); ++i) {
            if (m.data()[i] != 0.0f) l.weight.data()[i] = 0.0f;
        }
    }

    const CalibrationSet holdout =
        synthetic_calibration({holdout_seed}, model.input_dim, holdout_samples);
    const EvalRecord ev = evaluate_models(model, pruned, holdout.samples);

    json rep;
    rep["schema_version"] = 1;
    rep["command"] = "eval";
    rep["holdout"] = {{"seed", holdout_seed}, {"samples", holdout_samples}};
    rep.update(eval_to_json(ev));
    write_text_atomic(out, rep.dump(2) + "\n");
    std::cout << "wrote " << out << "\n";
    return 0;
}

// ------------------------------------------------------------------ diagnose

std::vector<double> parse_grid(const std::string& spec) {
    const std::vector<std::string> parts = CLI::detail::split(spec, ':');
    if (parts.size() != 3) {
        throw usage_error("--grid must look like start:stop:step");
    }
    const double start = parse_double_token(parts[0], "--grid");
    const double stop = parse_double_token(parts[1], "--grid");
    const double step = parse_double_token(parts[2], "--grid");
    if (!(step > 0.0) || stop < start) {
        throw usage_error("--grid must have positive step and stop >= start");
    }
    std::vector<double> grid;
    const auto count = static_cast<std::size_t>((stop - start) / step + 0.5) + 1;
    for (std::size_t i = 0; i < count; ++i) {
        grid.push_back(std::min(start + static_cast<double>(i) * step, stop));
    }
    return grid;
}

int cmd_diagnose_gini(const std::string& model_path, const std::string& meta_path,
                      const CalibOpts& calib_opts, const ScoreOpts& score_opts, std::size_t bins,
                      const std::string& out_json, const std::string& out_csv,
                      const std::string& out_hist_csv) {
    const ToyModel model = load_model(model_path, meta_path);
    const CalibrationSet calib = make_calib(calib_opts, model.input_dim);
    const ScoringConfig cfg = make_scoring_config(score_opts, model, calib);
    const std::vector<ScoreMatrix> scores =
        score_layers(model, capture_activations(model, calib), cfg);

    json rep;
    rep["schema_version"] = 1;
    rep["command"] = "diagnose gini";
    rep["metric"] = score_opts.metric;
    rep["layers"] = json::array();
    std::string csv = "layer,dim,gini\n";
    std::string hist_csv = "layer,bin_lo,bin_hi,count\n";
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const GiniReport g = gini_report(model.layers[li].name, scores[li], bins);
        rep["layers"].push_back({{"layer", g.layer_name},
                                 {"per_row_gini", g.per_row_gini},
                                 {"bin_edges", g.bin_edges},
                                 {"bin_counts", g.bin_counts}});
        for (std::size_t i = 0; i < g.per_row_gini.size(); ++i) {
            csv += g.layer_name + "," + std::to_string(i) + "," + fmt_double(g.per_row_gini[i]) +
                   "\n";
        }
        for (std::size_t b = 0; b < g.bin_counts.size(); ++b) {
            hist_csv += g.layer_name + "," + fmt_double(g.bin_edges[b]) + "," +
                        fmt_double(g.bin_edges[b + 1]) + "," + std::to_string(g.bin_counts[b]) +
                        "\n";
        }
    }
    write_text_atomic(out_json, rep.dump(2) + "\n");
    write_text_atomic(out_csv, csv);
    write_text_atomic(out_hist_csv, hist_csv);
    std::cout << "wrote " << out_json << ", " << out_csv << ", " << out_hist_csv << "\n";
    return 0;
}

int cmd_diagnose_curve(const std::string& model_path, const std::string& meta_path,
                       const CalibOpts& calib_opts, const ScoreOpts& score_opts,
                       const std::string& grid_spec, const std::string& out_json,
                       const std::string& out_csv) {
    const ToyModel model = load_model(model_path, meta_path);
    const CalibrationSet calib = make_calib(calib_opts, model.input_dim);
    const ScoringConfig cfg = make_scoring_config(score_opts, model, calib);
    const std::vector<Matrix> acts = capture_activations(model, calib);
    const std::vector<ScoreMatrix> scores = score_layers(model, acts, cfg);
    const std::vector<double> grid = parse_grid(grid_spec);

    json rep;
    rep["schema_version"] = 1;
    rep["command"] = "diagnose curve";
    rep["sparsity_grid"] = grid;
    rep["layers"] = json::array();
    std::string csv = "layer,dim";
    for (double g : grid) csv += ",s=" + fmt_double(g);
    csv += "\n";
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const DegradationCurve c =
            degradation_curve(model.layers[li].weight, acts[li], scores[li], grid);
        json rows = json::array();
        for (std::size_t i = 0; i < c.dims; ++i) {
            json row = json::array();
            csv += model.layers[li].name + "," + std::to_string(i);
            for (std::size_t gi = 0; gi < grid.size(); ++gi) {
                row.push_back(c.at(i, gi));
                csv += "," + fmt_double(c.at(i, gi));
            }
            csv += "\n";
            rows.push_back(std::move(row));
        }
        rep["layers"].push_back(
            {{"layer", model.layers[li].name}, {"per_dim_quality", std::move(rows)}});
    }
    write_text_atomic(out_json, rep.dump(2) + "\n");
    write_text_atomic(out_csv, csv);
    std::cout << "wrote " << out_json << " and " << out_csv << "\n";
    return 0;
}

int cmd_diagnose_remove_one(const std::string& model_path, const std::string& meta_path,
                            const CalibOpts& calib_opts, const std::string& strategy,
                            std::uint64_t seed, const std::string& out_json,
                            const std::string& out_model) {
    const ToyModel model = load_model(model_path, meta_path);
    const CalibrationSet calib = make_calib(calib_opts, model.input_dim);
    const RemoveOneResult res =
        remove_one_dimension(model, removal_strategy_from_token(strategy), {seed});

    json rep;
    rep["schema_version"] = 1;
    rep["command"] = "diagnose remove-one";
    rep["strategy"] = strategy;
    rep["seed"] = seed;
    rep["removed"] = json::array();
    for (const RemovedDim& r : res.removed) {
        rep["removed"].push_back({{"layer", r.layer}, {"row", r.row}, {"norm", r.norm}});
    }
    rep["eval"] = eval_to_json(evaluate_models(model, res.model, calib.samples));
    write_text_atomic(out_json, rep.dump(2) + "\n");
    if (!out_model.empty()) {
        save_model(res.model, out_model, default_sidecar(out_model));
    }
    std::cout << "wrote " << out_json << "\n";
    return 0;
}

int cmd_diagnose_stress(const std::string& model_path, const std::string& meta_path,
                        const CalibOpts& calib_opts, double m, double top_frac,
                        double row_sparsity, std::uint64_t seed, const std::string& out_json) {
    const ToyModel model = load_model(model_path, meta_path);
    const CalibrationSet calib = make_calib(calib_opts, model.input_dim);
    const StressReport res = outlier_dense_stress(model, capture_activations(model, calib), m,
                                                  top_frac, row_sparsity, {seed});

    json rep;
    rep["schema_version"] = 1;
    rep["command"] = "diagnose outlier-stress";
    rep["m"] = m;
    rep["top_frac"] = top_frac;
    rep["row_sparsity"] = row_sparsity;
    rep["seed"] = seed;
    rep["arms"] = json::array();
    for (const StressArm* arm : {&res.outlier_dense, &res.random_control}) {
        json aj;
        aj["arm"] = arm->arm;
        aj["rows_per_layer"] = json::object();
        aj["layer_recon_quality"] = json::object();
        for (std::size_t li = 0; li < model.layers.size(); ++li) {
            aj["rows_per_layer"][model.layers[li].name] = arm->rows_per_layer[li];
            aj["layer_recon_quality"][model.layers[li].name] = arm->layer_recon_quality[li];
        }
        aj["end_to_end_cosine"] = arm->end_to_end_cosine;
        aj["toy_loss_delta"] = arm->toy_loss_delta;
        rep["arms"].push_back(std::move(aj));
    }
    write_text_atomic(out_json, rep.dump(2) + "\n");
    std::cout << "wrote " << out_json << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"one-shot pruning with dimension-wise sparsity allocation"};
    app.require_subcommand(1);

    int rc = 0;
    // gen-model ----------------------------------------------------------
    {
        auto* cmd = app.add_subcommand("gen-model", "Generate a synthetic MLP model");
        auto dims = std::make_shared<std::string>("32,16,8");
        auto acts = std::make_shared<std::string>("relu");
        auto seed = std::make_shared<std::uint64_t>(0);
        auto out = std::make_shared<std::string>("model.tnsr");
        cmd->add_option("--dims", *dims, "Comma list: input_dim,layer sizes...")
            ->capture_default_str();
        cmd->add_option("--activations", *acts,
                        "Single token (hidden layers; final stays linear) or one per layer")
            ->capture_default_str();
        cmd->add_option("--seed", *seed, "Weight init seed")->capture_default_str();
        cmd->add_option("--out,-o", *out, "Output container (sidecar gets .json)")
            ->capture_default_str();
        cmd->callback([=, &rc]() { rc = cmd_gen_model(*dims, *acts, *seed, *out); });
    }
    // score ----------------------------------------------------------------
    {
        auto* cmd = app.add_subcommand("score", "Compute per-weight importance scores");
        auto model = std::make_shared<std::string>();
        auto meta = std::make_shared<std::string>();
        auto inputs = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>("scores.tnsr");
        auto calib = std::make_shared<CalibOpts>();
        auto sopts = std::make_shared<ScoreOpts>();
        cmd->add_option("--model", *model, "Model container")->required();
        cmd->add_option("--model-meta", *meta, "Model sidecar (defaults to <model>.json)")
            ->capture_default_str();
        cmd->add_option("--inputs", *inputs,
                        "Container with '<layer>.input' activation tensors; captured from a "
                        "calibration forward pass when omitted")
            ->capture_default_str();
        cmd->add_option("--out,-o", *out, "Output score container")->capture_default_str();
        add_calib_options(cmd, *calib);
        add_score_options(cmd, *sopts);
        cmd->callback([=, &rc]() {
            rc = cmd_score(*model, meta->empty() ? default_sidecar(*model) : *meta, *calib,
                           *sopts, *inputs, *out);
        });
    }
    // allocate ---------------------------------------------------------------
    {
        auto* cmd = app.add_subcommand("allocate", "Compute layer-wise sparsity budgets");
        auto scores = std::make_shared<std::string>();
        auto import = std::make_shared<std::string>();
        auto method = std::make_shared<std::string>("uniform");
        auto t = std::make_shared<double>(0.7);
        auto owl_m = std::make_shared<double>(5.0);
        auto owl_lambda = std::make_shared<double>(0.12);
        auto out = std::make_shared<std::string>("allocation.json");
        cmd->add_option("--scores", *scores, "Score container from the score command")
            ->capture_default_str();
        cmd->add_option("--import", *import,
                        "Re-emit an externally produced allocation file unchanged")
            ->capture_default_str();
        cmd->add_option("--method", *method, "Allocation method")
            ->check(CLI::IsMember({"uniform", "owl"}))
            ->capture_default_str();
        cmd->add_option("--t", *t, "Global sparsity target")->capture_default_str();
        cmd->add_option("--owl-m", *owl_m, "Outlier multiple M")->capture_default_str();
        cmd->add_option("--owl-lambda", *owl_lambda, "Max deviation from the target")
            ->capture_default_str();
        cmd->add_option("--out,-o", *out, "Output allocation JSON")->capture_default_str();
        cmd->callback([=, &rc]() {
            rc = cmd_allocate(*scores, *import, *method, *t, *owl_m, *owl_lambda, *out);
        });
    }
    // prune ------------------------------------------------------------------
    {
        auto* cmd = app.add_subcommand("prune", "Prune a model with dimension-wise budgets");
        auto model = std::make_shared<std::string>();
        auto meta = std::make_shared<std::string>();
        auto calib = std::make_shared<CalibOpts>();
        auto sopts = std::make_shared<ScoreOpts>();
        auto popts = std::make_shared<PruneOpts>();
        auto out_masks = std::make_shared<std::string>("masks.tnsr");
        auto report = std::make_shared<std::string>("report.json");
        cmd->add_option("--model", *model, "Model container")->required();
        cmd->add_option("--model-meta", *meta, "Model sidecar (defaults to <model>.json)")
            ->capture_default_str();
        add_calib_options(cmd, *calib);
        add_score_options(cmd, *sopts);
        cmd->add_option("--t", popts->t, "Global sparsity target (ignored with --allocation)")
            ->capture_default_str();
        cmd->add_option("--allocation", popts->allocation_file,
                        "Layer-wise allocation JSON from the allocate command")
            ->capture_default_str();
        cmd->add_flag("--no-trim", popts->no_trim,
                      "Uniform per-row sparsity instead of the iterative adjustment");
        cmd->add_flag("--recalc", popts->recalc,
                      "Recalculate evaluation inputs through already-pruned layers");
        cmd->add_option("--group", popts->group, "Comparison group (non-per_output needs --no-trim)")
            ->check(CLI::IsMember({"per_output", "whole_layer", "input_block"}))
            ->capture_default_str();
        cmd->add_option("--block-size", popts->block_size, "Columns per input_block group")
            ->capture_default_str();
        cmd->add_option("--k", popts->k, "Adjustment iterations per learning rate")
            ->capture_default_str();
        cmd->add_option("--lr-schedule", popts->lr_schedule,
                        "Comma list of increasing positive learning rates")
            ->capture_default_str();
        cmd->add_option("--epsilon", popts->epsilon, "Min-max normalization epsilon")
            ->capture_default_str();
        cmd->add_option("--cutoff", popts->cutoff, "Per-row sparsity ceiling")
            ->capture_default_str();
        cmd->add_option("--layer-metric", popts->layer_metric, "Layer quality metric")
            ->check(CLI::IsMember({"cosim_flat", "cosim_sample", "neg_mse"}))
            ->capture_default_str();
        cmd->add_option("--dim-metric", popts->dim_metric, "Dimension quality metric")
            ->check(CLI::IsMember({"cosine", "psnr", "neg_mse"}))
            ->capture_default_str();
        cmd->add_option("--out-masks", *out_masks, "Output container with masks + svecs")
            ->capture_default_str();
        cmd->add_option("--report", *report, "Output JSON run report")->capture_default_str();
        cmd->callback([=, &rc]() {
            rc = cmd_prune(*model, meta->empty() ? default_sidecar(*model) : *meta, *calib,
                           *sopts, *popts, *out_masks, *report);
        });
    }
    // eval -------------------------------------------------------------------
    {
        auto* cmd = app.add_subcommand("eval", "Evaluate a prune run on a holdout set");
        auto model = std::make_shared<std::string>();
        auto meta = std::make_shared<std::string>();
        auto masks = std::make_shared<std::string>();
        auto seed = std::make_shared<std::uint64_t>(1);
        auto samples = std::make_shared<std::size_t>(128);
        auto out = std::make_shared<std::string>("eval.json");
        cmd->add_option("--model", *model, "Model container")->required();
        cmd->add_option("--model-meta", *meta, "Model sidecar (defaults to <model>.json)")
            ->capture_default_str();
        cmd->add_option("--masks", *masks, "Mask container from the prune command")->required();
        cmd->add_option("--holdout-seed", *seed,
                        "Holdout sample seed (use a seed disjoint from calibration)")
            ->capture_default_str();
        cmd->add_option("--holdout-samples", *samples, "Holdout sample count")
            ->capture_default_str();
        cmd->add_option("--out,-o", *out, "Output evaluation JSON")->capture_default_str();
        cmd->callback([=, &rc]() {
            rc = cmd_eval(*model, meta->empty() ? default_sidecar(*model) : *meta, *masks, *seed,
                          *samples, *out);
        });
    }
    // diagnose ----------------------------------------------------------------
    {
        auto* diag = app.add_subcommand("diagnose", "Concentration and sensitivity analyses");
        diag->require_subcommand(1);

        auto model = std::make_shared<std::string>();
        auto meta = std::make_shared<std::string>();
        auto calib = std::make_shared<CalibOpts>();
        auto sopts = std::make_shared<ScoreOpts>();
        auto add_common = [&](CLI::App* cmd) {
            cmd->add_option("--model", *model, "Model container")->required();
            cmd->add_option("--model-meta", *meta, "Model sidecar (defaults to <model>.json)")
                ->capture_default_str();
            add_calib_options(cmd, *calib);
        };

        {
            auto* cmd = diag->add_subcommand("gini", "Per-dimension score concentration");
            add_common(cmd);
            add_score_options(cmd, *sopts);
            auto bins = std::make_shared<std::size_t>(20);
            auto out_json = std::make_shared<std::string>("gini.json");
            auto out_csv = std::make_shared<std::string>("gini.csv");
            auto out_hist = std::make_shared<std::string>("gini_hist.csv");
            cmd->add_option("--bins", *bins, "Histogram bins")->capture_default_str();
            cmd->add_option("--out-json", *out_json, "Output JSON")->capture_default_str();
            cmd->add_option("--out-csv", *out_csv, "Per-dimension CSV")->capture_default_str();
            cmd->add_option("--out-hist-csv", *out_hist, "Histogram CSV")->capture_default_str();
            cmd->callback([=, &rc]() {
                rc = cmd_diagnose_gini(*model, meta->empty() ? default_sidecar(*model) : *meta,
                                       *calib, *sopts, *bins, *out_json, *out_csv, *out_hist);
            });
        }
        {
            auto* cmd = diag->add_subcommand("curve", "Per-dimension quality vs sparsity");
            add_common(cmd);
            add_score_options(cmd, *sopts);
            auto grid = std::make_shared<std::string>("0:0.95:0.05");
            auto out_json = std::make_shared<std::string>("curve.json");
            auto out_csv = std::make_shared<std::string>("curve.csv");
            cmd->add_option("--grid", *grid, "start:stop:step sparsity grid")
                ->capture_default_str();
            cmd->add_option("--out-json", *out_json, "Output JSON")->capture_default_str();
            cmd->add_option("--out-csv", *out_csv, "D x grid CSV")->capture_default_str();
            cmd->callback([=, &rc]() {
                rc = cmd_diagnose_curve(*model, meta->empty() ? default_sidecar(*model) : *meta,
                                        *calib, *sopts, *grid, *out_json, *out_csv);
            });
        }
        {
            auto* cmd = diag->add_subcommand("remove-one", "Zero one output dimension per layer");
            add_common(cmd);
            auto strategy = std::make_shared<std::string>("min_norm");
            auto seed = std::make_shared<std::uint64_t>(0);
            auto out_json = std::make_shared<std::string>("remove_one.json");
            auto out_model = std::make_shared<std::string>();
            cmd->add_option("--strategy", *strategy, "Row selection rule")
                ->check(CLI::IsMember({"min_norm", "max_norm", "random"}))
                ->capture_default_str();
            cmd->add_option("--seed", *seed, "Seed for the random strategy")
                ->capture_default_str();
            cmd->add_option("--out-json", *out_json, "Output JSON")->capture_default_str();
            cmd->add_option("--out-model", *out_model, "Optional pruned model container")
                ->capture_default_str();
            cmd->callback([=, &rc]() {
                rc = cmd_diagnose_remove_one(*model,
                                             meta->empty() ? default_sidecar(*model) : *meta,
                                             *calib, *strategy, *seed, *out_json, *out_model);
            });
        }
        {
            auto* cmd = diag->add_subcommand("outlier-stress",
                                             "Heavily prune outlier-dense rows vs a random control");
            add_common(cmd);
            auto m = std::make_shared<double>(5.0);
            auto top_frac = std::make_shared<double>(0.1);
            auto row_sparsity = std::make_shared<double>(0.9);
            auto seed = std::make_shared<std::uint64_t>(0);
            auto out_json = std::make_shared<std::string>("outlier_stress.json");
            cmd->add_option("--m", *m, "Outlier multiple M")->capture_default_str();
            cmd->add_option("--top-frac", *top_frac, "Fraction of rows to select")
                ->capture_default_str();
            cmd->add_option("--row-sparsity", *row_sparsity, "Sparsity for selected rows")
                ->capture_default_str();
            cmd->add_option("--seed", *seed, "Seed for the random control arm")
                ->capture_default_str();
            cmd->add_option("--out-json", *out_json, "Output JSON")->capture_default_str();
            cmd->callback([=, &rc]() {
                rc = cmd_diagnose_stress(*model, meta->empty() ? default_sidecar(*model) : *meta,
                                         *calib, *m, *top_frac, *row_sparsity, *seed, *out_json);
            });
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const shape_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const budget_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
