#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "trim/container.hpp"
#include "trim/pipeline.hpp"

#ifndef TRIM_CLI_PATH
#define TRIM_CLI_PATH "trim"
#endif

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / "trim_cli_test";
        fs::remove_all(path);
        fs::create_directories(path);
    }
};

int run(const std::string& args) {
    const std::string cmd = std::string(TRIM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string capture(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "trim_cli_capture.txt";
    const std::string cmd =
        std::string(TRIM_CLI_PATH) + " " + args + " >" + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    (void)status; // help/usage output is captured regardless of the exit code
    return slurp(out);
}

} // namespace

TEST_CASE("cli end-to-end flow with exit code contract") {
    TempDir tmp;
    const std::string d = tmp.path.string() + "/";

    CHECK(run("gen-model --dims 16,12,8 --seed 1 --out " + d + "model.tnsr") == 0);
    CHECK(run("score --model " + d + "model.tnsr --calib-seed 3 --calib-samples 24 --out " + d +
              "scores.tnsr") == 0);
    CHECK(run("allocate --scores " + d + "scores.tnsr --method uniform --t 0.7 --out " + d +
              "alloc.json") == 0);
    CHECK(run("prune --model " + d + "model.tnsr --allocation " + d +
              "alloc.json --calib-seed 3 --calib-samples 24 --out-masks " + d +
              "masks.tnsr --report " + d + "report.json") == 0);
    CHECK(run("eval --model " + d + "model.tnsr --masks " + d +
              "masks.tnsr --holdout-seed 9 --out " + d + "eval.json") == 0);

    // Usage errors exit 2, format errors 3, infeasible budgets 4.
    CHECK(run("score --model " + d + "model.tnsr --metric nope") == 2);
    CHECK(run("bogus-command") == 2);
    CHECK(run("eval --model " + d + "model.tnsr --masks " + d + "nothere.tnsr") == 3);
    CHECK(run("prune --model " + d + "model.tnsr --t 0.94 --cutoff 0.5 --calib-samples 8") == 4);

    std::ofstream(tmp.path / "bad.tnsr") << "JUNKJUNKJUNKJUNKJUNK";
    CHECK(run("score --model " + d + "bad.tnsr") == 3);
}

TEST_CASE("every command is byte-deterministic across reruns") {
    TempDir tmp;
    const std::string d = tmp.path.string() + "/";

    for (int seed : {1, 2, 3}) {
        const std::string s = std::to_string(seed);
        const std::string model = d + "m" + s + ".tnsr";

        auto files_for = [&](const std::string& tag) {
            return std::vector<std::string>{d + "scores_" + tag + ".tnsr",
                                            d + "alloc_" + tag + ".json",
                                            d + "masks_" + tag + ".tnsr",
                                            d + "report_" + tag + ".json",
                                            d + "eval_" + tag + ".json",
                                            d + "gini_" + tag + ".csv"};
        };
        auto run_all = [&](const std::string& tag) {
            const auto f = files_for(tag);
            CHECK(run("gen-model --dims 12,10,6 --seed " + s + " --out " + model) == 0);
            CHECK(run("score --model " + model + " --calib-seed " + s + " --calib-samples 16 " +
                      "--out " + f[0]) == 0);
            CHECK(run("allocate --scores " + f[0] + " --method owl --t 0.6 --owl-m 3 " +
                      "--owl-lambda 0.1 --out " + f[1]) == 0);
            CHECK(run("prune --model " + model + " --allocation " + f[1] + " --calib-seed " + s +
                      " --calib-samples 16 --lr-schedule 0.1,0.2,0.5 --out-masks " + f[2] +
                      " --report " + f[3]) == 0);
            CHECK(run("eval --model " + model + " --masks " + f[2] + " --holdout-seed 7 --out " +
                      f[4]) == 0);
            CHECK(run("diagnose gini --model " + model + " --calib-seed " + s +
                      " --calib-samples 16 --out-json " + d + "g_" + tag + ".json --out-csv " +
                      f[5] + " --out-hist-csv " + d + "gh_" + tag + ".csv") == 0);
        };

        run_all("a");
        run_all("b");
        const auto fa = files_for("a");
        const auto fb = files_for("b");
        for (std::size_t i = 0; i < fa.size(); ++i) {
            CHECK(slurp(fa[i]) == slurp(fb[i]));
        }
    }
}

TEST_CASE("score accepts activation and gradient containers directly") {
    TempDir tmp;
    const std::string d = tmp.path.string() + "/";
    REQUIRE(run("gen-model --dims 10,8,6 --seed 4 --out " + d + "model.tnsr") == 0);

    const trim::ToyModel model = trim::load_model(d + "model.tnsr", d + "model.json");
    const trim::CalibrationSet calib = trim::synthetic_calibration({77}, 10, 12);
    const std::vector<trim::Matrix> acts = trim::capture_activations(model, calib);

    // '<layer>.input' tensors override the internal forward capture.
    trim::TensorContainer inputs;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        inputs.put_matrix(model.layers[li].name + ".input", acts[li]);
    }
    trim::save_container(inputs, d + "inputs.tnsr");
    REQUIRE(run("score --model " + d + "model.tnsr --inputs " + d +
                "inputs.tnsr --metric wanda --out " + d + "s_inputs.tnsr") == 0);
    REQUIRE(run("score --model " + d + "model.tnsr --calib-seed 77 --calib-samples 12 "
                "--metric wanda --out " + d + "s_forward.tnsr") == 0);
    CHECK(slurp(tmp.path / "s_inputs.tnsr") == slurp(tmp.path / "s_forward.tnsr"));

    // '<layer>.grad' tensors feed gblm.
    const trim::Matrix targets = trim::gaussian_matrix({78}, model.output_dim(), 12);
    const auto grads = trim::capture_gradients(model, calib, targets, 1.0);
    trim::TensorContainer gradc;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        gradc.put_matrix(model.layers[li].name + ".grad", grads[li].grads());
    }
    trim::save_container(gradc, d + "grads.tnsr");
    REQUIRE(run("score --model " + d + "model.tnsr --calib-seed 77 --calib-samples 12 "
                "--metric gblm --grads " + d + "grads.tnsr --out " + d + "s_gblm.tnsr") == 0);
    const trim::TensorContainer sg = trim::load_container(d + "s_gblm.tnsr");
    CHECK(sg.contains("layer0.score"));
    CHECK(sg.contains("layer1.score"));
}

TEST_CASE("owl allocation flags produce bounded, centered budgets") {
    TempDir tmp;
    const std::string d = tmp.path.string() + "/";
    REQUIRE(run("gen-model --dims 24,20,16,12 --seed 6 --out " + d + "model.tnsr") == 0);
    REQUIRE(run("score --model " + d + "model.tnsr --calib-seed 6 --calib-samples 24 --out " +
                d + "scores.tnsr") == 0);
    REQUIRE(run("allocate --scores " + d + "scores.tnsr --method owl --t 0.7 --owl-m 5 "
                "--owl-lambda 0.12 --out " + d + "alloc.json") == 0);

    nlohmann::json alloc;
    std::ifstream(tmp.path / "alloc.json") >> alloc;
    double wsum = 0.0, acc = 0.0;
    for (const auto& l : alloc["layers"]) {
        const double t = l["t"].get<double>();
        const double params = l["params"].get<double>();
        CHECK(t >= 0.58 - 1e-9);
        CHECK(t <= 0.82 + 1e-9);
        wsum += params;
        acc += params * t;
    }
    CHECK(acc / wsum == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("externally produced allocations import and re-emit faithfully") {
    TempDir tmp;
    const std::string d = tmp.path.string() + "/";
    // Hand-written file, e.g. from an external layer-wise allocator.
    std::ofstream(tmp.path / "ext.json") << R"({
      "method": "external_tau_sweep",
      "global_t": 0.65,
      "layers": [
        {"name": "layer0", "t": 0.6, "params": 120},
        {"name": "layer1", "t": 0.72, "params": 80}
      ]
    })";
    REQUIRE(run("allocate --import " + d + "ext.json --out " + d + "alloc.json") == 0);
    nlohmann::json a;
    std::ifstream(tmp.path / "alloc.json") >> a;
    CHECK(a["method"] == "external_tau_sweep");
    CHECK(a["global_t"].get<double>() == 0.65);
    CHECK(a["layers"][1]["t"].get<double>() == 0.72);

    // Re-importing the emitted file reproduces it byte for byte.
    REQUIRE(run("allocate --import " + d + "alloc.json --out " + d + "alloc2.json") == 0);
    CHECK(slurp(tmp.path / "alloc.json") == slurp(tmp.path / "alloc2.json"));

    // The imported budgets drive a prune run end to end.
    REQUIRE(run("gen-model --dims 10,12,8 --seed 2 --out " + d + "model.tnsr") == 0);
    REQUIRE(run("prune --model " + d + "model.tnsr --allocation " + d +
                "alloc.json --calib-seed 2 --calib-samples 16 --out-masks " + d +
                "masks.tnsr --report " + d + "report.json") == 0);
    nlohmann::json rep;
    std::ifstream(tmp.path / "report.json") >> rep;
    CHECK(rep["layers"][0]["t"].get<double>() == 0.6);
    CHECK(rep["layers"][1]["t"].get<double>() == 0.72);
}

TEST_CASE("trim beats or matches the uniform arm layer by layer") {
    TempDir tmp;
    const std::string d = tmp.path.string() + "/";
    REQUIRE(run("gen-model --dims 16,14,10 --seed 8 --out " + d + "model.tnsr") == 0);
    const std::string common = "prune --model " + d + "model.tnsr --calib-seed 8 "
                               "--calib-samples 24 --t 0.7 --lr-schedule 0.05,0.1,0.2,0.4 ";
    REQUIRE(run(common + "--out-masks " + d + "m_trim.tnsr --report " + d + "r_trim.json") == 0);
    REQUIRE(run(common + "--no-trim --out-masks " + d + "m_uni.tnsr --report " + d +
                "r_uni.json") == 0);

    nlohmann::json rt, ru;
    std::ifstream(tmp.path / "r_trim.json") >> rt;
    std::ifstream(tmp.path / "r_uni.json") >> ru;
    REQUIRE(rt["layers"].size() == ru["layers"].size());
    for (std::size_t li = 0; li < rt["layers"].size(); ++li) {
        CHECK(rt["layers"][li]["q_best"].get<double>() >=
              ru["layers"][li]["q_best"].get<double>());
        CHECK(ru["layers"][li]["chosen_lr"].get<double>() == 0.0);
    }

    // Recalculation must not change the emitted score tensors.
    REQUIRE(run(common + "--recalc --out-masks " + d + "m_rc.tnsr --report " + d +
                "r_rc.json") == 0);
    const trim::TensorContainer a = trim::load_container(d + "m_trim.tnsr");
    const trim::TensorContainer b = trim::load_container(d + "m_rc.tnsr");
    for (const auto& [name, entry] : a.entries()) {
        if (name.size() > 6 && name.compare(name.size() - 6, 6, ".score") == 0) {
            CHECK(entry.data == b.at(name).data);
        }
    }
    CHECK(a.at("layer0.mask").data == b.at("layer0.mask").data);
}

TEST_CASE("help text lists the documented defaults") {
    const std::string prune_help = capture("prune --help");
    CHECK(prune_help.find("--k") != std::string::npos);
    CHECK(prune_help.find("10") != std::string::npos);
    CHECK(prune_help.find("--cutoff") != std::string::npos);
    CHECK(prune_help.find("0.95") != std::string::npos);
    CHECK(prune_help.find("0.01,0.02,0.05,0.1,0.2,0.5") != std::string::npos);
    CHECK(prune_help.find("cosim_flat") != std::string::npos);
    CHECK(prune_help.find("cosine") != std::string::npos);

    const std::string alloc_help = capture("allocate --help");
    CHECK(alloc_help.find("--owl-m") != std::string::npos);
    CHECK(alloc_help.find("--owl-lambda") != std::string::npos);
    CHECK(alloc_help.find("0.12") != std::string::npos);

    CHECK(run("--help") == 0);
    CHECK(run("prune --help") == 0);
}
