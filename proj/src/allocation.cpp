#include "trim/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "trim/masking.hpp"

namespace trim {

double outlier_ratio(const ScoreMatrix& a, double m) {
    const Matrix& s = a.scores;
    if (s.size() == 0) {
        throw shape_error("outlier_ratio: empty score matrix");
    }
    double mean = 0.0;
    for (float v : s.data()) mean += v;
    mean /= static_cast<double>(s.size());
    const double threshold = m * mean;
    std::size_t count = 0;
    for (float v : s.data()) {
        if (static_cast<double>(v) > threshold) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(s.size());
}

std::vector<std::size_t> per_dimension_outlier_counts(const ScoreMatrix& a, double m) {
    const Matrix& s = a.scores;
    if (s.size() == 0) {
        throw shape_error("per_dimension_outlier_counts: empty score matrix");
    }
    double mean = 0.0;
    for (float v : s.data()) mean += v;
    mean /= static_cast<double>(s.size());
    const double threshold = m * mean;

    std::vector<std::size_t> counts(s.rows(), 0);
    for (std::size_t i = 0; i < s.rows(); ++i) {
        for (std::size_t j = 0; j < s.cols(); ++j) {
            if (static_cast<double>(s(i, j)) > threshold) ++counts[i];
        }
    }
    return counts;
}

LayerAllocation uniform_allocate(const std::vector<std::string>& names,
                                 const std::vector<std::uint64_t>& sizes, double t) {
    if (names.empty() || names.size() != sizes.size()) {
        throw shape_error("uniform_allocate: names/sizes mismatch");
    }
    if (!(t >= 0.0 && t < 1.0)) {
        throw usage_error("global sparsity target must lie in [0, 1)");
    }
    LayerAllocation out;
    out.method = "uniform";
    out.global_t = t;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out.layers.push_back({names[i], t, sizes[i]});
    }
    return out;
}

LayerAllocation owl_allocate(const std::vector<std::string>& names,
                             const std::vector<std::uint64_t>& sizes,
                             const std::vector<double>& ratios, double t, const OwlParams& p) {
    const std::size_t n = ratios.size();
    if (n == 0 || names.size() != n || sizes.size() != n) {
        throw shape_error("owl_allocate: names/sizes/ratios length mismatch");
    }
    if (!(p.m > 1.0)) {
        throw usage_error("owl outlier multiple M must be > 1");
    }
    const double lam_max = std::min(t, kDefaultCutoff - t);
    if (p.lam < 0.0 || p.lam >= lam_max) {
        throw budget_error("owl lambda " + std::to_string(p.lam) + " infeasible for target " +
                           std::to_string(t) + " (must lie in [0, " + std::to_string(lam_max) +
                           "))");
    }

    double wsum = 0.0, wmean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wsum += static_cast<double>(sizes[i]);
        wmean += static_cast<double>(sizes[i]) * ratios[i];
    }
    if (wsum <= 0.0) {
        throw shape_error("owl_allocate: total parameter count is zero");
    }
    wmean /= wsum;

    double spread = 0.0;
    for (double r : ratios) spread = std::max(spread, std::abs(r - wmean));
    spread = std::max(spread, 1e-12);

    // Affine anti-monotone map: more outliers -> lower sparsity, scaled so the
    // extreme layer sits exactly lam away from the target.
    std::vector<double> tl(n);
    for (std::size_t i = 0; i < n; ++i) {
        tl[i] = t + p.lam * (wmean - ratios[i]) / spread;
    }

    // Weighted recenter + clip to [t - lam, t + lam], redistributing clipped
    // mass proportionally to weighted headroom.
    const double lo = t - p.lam, hi = t + p.lam;
    bool converged = false;
    for (std::size_t pass = 0; pass <= n && !converged; ++pass) {
        for (double& v : tl) v = std::clamp(v, lo, hi);
        double got = 0.0;
        for (std::size_t i = 0; i < n; ++i) got += static_cast<double>(sizes[i]) * tl[i];
        const double deficit = t * wsum - got;
        if (std::abs(deficit) <= 1e-12 * wsum) {
            converged = true;
            break;
        }
        double headroom = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            headroom += static_cast<double>(sizes[i]) * ((deficit > 0.0) ? (hi - tl[i]) : (tl[i] - lo));
        }
        if (headroom < std::abs(deficit)) {
            throw budget_error("owl_allocate: clipped budgets cannot reach the global target");
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double cap = (deficit > 0.0) ? (hi - tl[i]) : (tl[i] - lo);
            tl[i] += deficit * cap / headroom;
        }
    }
    if (!converged) {
        double got = 0.0;
        for (std::size_t i = 0; i < n; ++i) got += static_cast<double>(sizes[i]) * tl[i];
        if (std::abs(got - t * wsum) > 1e-9 * wsum) {
            throw budget_error("owl_allocate: recentering did not converge");
        }
    }

    LayerAllocation out;
    out.method = "owl";
    out.global_t = t;
    for (std::size_t i = 0; i < n; ++i) {
        out.layers.push_back({names[i], tl[i], sizes[i]});
    }
    return out;
}

namespace {

const char* kAllowedKeys[] = {"schema_version", "method", "global_t", "layers"};
const char* kAllowedLayerKeys[] = {"name", "t", "params"};

void reject_unknown_keys(const nlohmann::json& obj, const char* const* allowed,
                         std::size_t n_allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (std::size_t i = 0; i < n_allowed; ++i) {
            if (it.key() == allowed[i]) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw format_error("unknown key '" + it.key() + "' in " + where);
        }
    }
}

} // namespace

LayerAllocation load_allocation(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw format_error("cannot open allocation file '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("allocation file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("method") || !j.contains("global_t") ||
        !j.contains("layers")) {
        throw format_error("allocation file must carry method, global_t and layers");
    }
    reject_unknown_keys(j, kAllowedKeys, 4, "allocation file");

    LayerAllocation out;
    out.method = j["method"].get<std::string>();
    out.global_t = j["global_t"].get<double>();
    for (const auto& lj : j["layers"]) {
        reject_unknown_keys(lj, kAllowedLayerKeys, 3, "allocation layer entry");
        LayerBudget b;
        b.name = lj.at("name").get<std::string>();
        b.t = lj.at("t").get<double>();
        b.params = lj.at("params").get<std::uint64_t>();
        if (!(b.t >= 0.0 && b.t < 1.0)) {
            throw format_error("layer '" + b.name + "' sparsity " + std::to_string(b.t) +
                               " outside [0, 1)");
        }
        out.layers.push_back(std::move(b));
    }
    if (out.layers.empty()) {
        throw format_error("allocation file lists no layers");
    }
    return out;
}

void save_allocation(const LayerAllocation& a, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["method"] = a.method;
    j["global_t"] = a.global_t;
    j["layers"] = nlohmann::json::array();
    for (const LayerBudget& b : a.layers) {
        j["layers"].push_back({{"name", b.name}, {"t", b.t}, {"params", b.params}});
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw format_error("cannot write allocation file '" + tmp + "'");
        }
        out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

} // namespace trim
