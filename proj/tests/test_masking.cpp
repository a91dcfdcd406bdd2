#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <vector>

#include "trim/masking.hpp"
#include "trim/rng.hpp"
#include "trim/trim.hpp"

using namespace trim;

namespace {

ScoreMatrix as_scores(Matrix m) { return {std::move(m), ScoreMetric::wanda}; }

// Oracle: independently sort the given cells and mark the k smallest,
// breaking score ties by flat index.
std::vector<std::uint8_t> sort_oracle_mask(const Matrix& scores,
                                           const std::vector<std::vector<std::size_t>>& groups,
                                           const std::vector<std::size_t>& k_per_group) {
    std::vector<std::uint8_t> mask(scores.size(), 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<std::size_t> cells = groups[g];
        std::sort(cells.begin(), cells.end(), [&](std::size_t a, std::size_t b) {
            if (scores.data()[a] != scores.data()[b]) return scores.data()[a] < scores.data()[b];
            return a < b;
        });
        for (std::size_t i = 0; i < k_per_group[g] && i < cells.size(); ++i) {
            mask[cells[i]] = 1;
        }
    }
    return mask;
}

SparsityVector random_sparsity(Rng& rng, std::size_t d, double t, double cutoff) {
    std::vector<double> s(d);
    for (double& v : s) v = rng.uniform() * cutoff;
    return SparsityVector(clamp_recenter(recenter(s, t), t, cutoff), t, cutoff);
}

} // namespace

TEST_CASE("round_counts hand cases") {
    CHECK(round_counts(SparsityVector({0.5, 0.75}, 0.625), 4) ==
          std::vector<std::size_t>{2, 3});
    // round(0.5 * 9) = 4 under half-even rounding; the remainder tie goes to row 0.
    CHECK(round_counts(SparsityVector({0.5, 0.5, 0.5}, 0.5), 3) ==
          std::vector<std::size_t>{2, 1, 1});
    CHECK(round_counts(SparsityVector({0.0, 0.0}, 0.0), 7) == std::vector<std::size_t>{0, 0});
}

TEST_CASE("round_half_even matches ties-to-even") {
    CHECK(round_half_even(4.5) == 4);
    CHECK(round_half_even(5.5) == 6);
    CHECK(round_half_even(4.4) == 4);
    CHECK(round_half_even(4.6) == 5);
    CHECK(round_half_even(0.0) == 0);
}

TEST_CASE("round_counts apportionment properties on random vectors") {
    Rng rng({7});
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t d = 2 + rng.below(6);
        const std::size_t n = 4 + rng.below(16);
        const double t = 0.3 + 0.4 * rng.uniform();
        const SparsityVector s = random_sparsity(rng, d, t, 0.95);
        const std::vector<std::size_t> k = round_counts(s, n);

        const std::int64_t want_total =
            round_half_even(t * static_cast<double>(d) * static_cast<double>(n));
        std::int64_t total = 0;
        for (std::size_t i = 0; i < d; ++i) {
            total += static_cast<std::int64_t>(k[i]);
            CHECK(std::abs(static_cast<double>(k[i]) - s.values()[i] * static_cast<double>(n)) <
                  1.0);
            CHECK(k[i] <= static_cast<std::size_t>(0.95 * static_cast<double>(n)));
        }
        CHECK(total == want_total);
    }
}

TEST_CASE("round_counts rejects infeasible budgets") {
    // cap = floor(0.5 * 3) = 1 per row, budget = 3 > 2.
    CHECK_THROWS_AS(round_counts(SparsityVector({0.5, 0.5}, 0.5, 0.5), 3), budget_error);
}

TEST_CASE("per_output mask hand case") {
    const ScoreMatrix a = as_scores(Matrix::from_rows({{1, 2, 3, 4}}));
    const PruneMask m = build_mask(a, SparsityVector({0.5}, 0.5), ComparisonGroup::per_output());
    CHECK(m.at(0, 0));
    CHECK(m.at(0, 1));
    CHECK_FALSE(m.at(0, 2));
    CHECK_FALSE(m.at(0, 3));
    CHECK(m.pruned_count == 2);
}

TEST_CASE("whole_layer mask hand case") {
    const ScoreMatrix a = as_scores(Matrix::from_rows({{1, 4}, {2, 3}}));
    const PruneMask m =
        build_mask(a, SparsityVector::uniform(2, 0.5), ComparisonGroup::whole_layer());
    CHECK(m.at(0, 0));
    CHECK_FALSE(m.at(0, 1));
    CHECK(m.at(1, 0));
    CHECK_FALSE(m.at(1, 1));
}

TEST_CASE("input_block mask equals the per-block sort oracle") {
    Rng rng({17});
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 2 + rng.below(5);
        const std::size_t n = 4 + rng.below(12);
        const std::size_t bs = 1 + rng.below(5);
        const Matrix scores = gaussian_matrix({rng.next_u64()}, d, n);
        ScoreMatrix a = as_scores(scores);
        for (float& v : a.scores.data()) v = std::abs(v);

        const double t = 0.5;
        const PruneMask m =
            build_mask(a, SparsityVector::uniform(d, t), ComparisonGroup::input_block(bs));

        const std::size_t n_blocks = (n + bs - 1) / bs;
        std::vector<std::vector<std::size_t>> groups(n_blocks);
        std::vector<double> quota(n_blocks);
        for (std::size_t g = 0; g < n_blocks; ++g) {
            const std::size_t c1 = std::min(n, (g + 1) * bs);
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = g * bs; j < c1; ++j) groups[g].push_back(i * n + j);
            }
            quota[g] = t * static_cast<double>(groups[g].size());
        }
        // Reproduce the documented largest-remainder block budgets.
        std::vector<std::size_t> kg(n_blocks);
        std::vector<std::pair<double, std::size_t>> rem;
        std::int64_t assigned = 0;
        for (std::size_t g = 0; g < n_blocks; ++g) {
            kg[g] = static_cast<std::size_t>(quota[g]);
            rem.push_back({quota[g] - static_cast<double>(kg[g]), g});
            assigned += static_cast<std::int64_t>(kg[g]);
        }
        std::stable_sort(rem.begin(), rem.end(),
                         [](const auto& x, const auto& y) { return x.first > y.first; });
        std::int64_t extra =
            round_half_even(t * static_cast<double>(d) * static_cast<double>(n)) - assigned;
        for (const auto& [r, g] : rem) {
            if (extra-- <= 0) break;
            ++kg[g];
        }
        CHECK(m.mask == sort_oracle_mask(a.scores, groups, kg));
    }
}

TEST_CASE("per_output mask with uniform S equals the per-row sort oracle") {
    Rng rng({27});
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 2 + rng.below(6);
        const std::size_t n = 4 + rng.below(12);
        Matrix scores = gaussian_matrix({rng.next_u64()}, d, n);
        for (float& v : scores.data()) v = std::abs(v);
        const double t = 0.25 + 0.5 * rng.uniform();
        const SparsityVector s = SparsityVector::uniform(d, t);
        const PruneMask m = build_mask(as_scores(scores), s, ComparisonGroup::per_output());

        std::vector<std::vector<std::size_t>> groups(d);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < n; ++j) groups[i].push_back(i * n + j);
        }
        CHECK(m.mask == sort_oracle_mask(scores, groups, round_counts(s, n)));
    }
}

TEST_CASE("non-uniform S is rejected outside per_output") {
    const ScoreMatrix a = as_scores(Matrix::from_rows({{1, 2}, {3, 4}}));
    const SparsityVector s({0.25, 0.75}, 0.5);
    CHECK_THROWS_AS(build_mask(a, s, ComparisonGroup::whole_layer()), usage_error);
    CHECK_THROWS_AS(build_mask(a, s, ComparisonGroup::input_block(2)), usage_error);
    CHECK_NOTHROW(build_mask(a, s, ComparisonGroup::per_output()));
}

TEST_CASE("apply_mask basics") {
    const Matrix w = gaussian_matrix({37}, 3, 5);

    PruneMask none{3, 5, std::vector<std::uint8_t>(15, 0), 0};
    CHECK(apply_mask(w, none).data() == w.data());

    PruneMask all{3, 5, std::vector<std::uint8_t>(15, 1), 15};
    const Matrix zeroed = apply_mask(w, all);
    for (float v : zeroed.data()) CHECK(v == 0.0f);

    Rng rng({38});
    PruneMask some{3, 5, std::vector<std::uint8_t>(15, 0), 0};
    for (auto& b : some.mask) {
        b = rng.below(2) ? 1 : 0;
        some.pruned_count += b;
    }
    const Matrix out = apply_mask(w, some);
    std::size_t nonzero = 0;
    for (float v : out.data()) nonzero += (v != 0.0f);
    CHECK(nonzero == 15 - some.pruned_count);
}

TEST_CASE("total pruned fraction is budget-exact for any sparsity split") {
    Rng rng({47});
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 3 + rng.below(6);
        const std::size_t n = 6 + rng.below(20);
        const double t = 0.3 + 0.5 * rng.uniform();
        Matrix scores = gaussian_matrix({rng.next_u64()}, d, n);
        for (float& v : scores.data()) v = std::abs(v);
        const SparsityVector s = random_sparsity(rng, d, t, 0.95);
        const PruneMask m = build_mask(as_scores(scores), s, ComparisonGroup::per_output());
        CHECK(static_cast<std::int64_t>(m.pruned_count) ==
              round_half_even(t * static_cast<double>(d) * static_cast<double>(n)));
    }
}

TEST_CASE("raising one row's sparsity never unprunes weights in that row") {
    Rng rng({57});
    const std::size_t d = 4, n = 12;
    Matrix scores = gaussian_matrix({58}, d, n);
    for (float& v : scores.data()) v = std::abs(v);
    std::vector<double> s = {0.2, 0.4, 0.6, 0.3};
    for (int step = 0; step < 5; ++step) {
        std::vector<double> s2 = s;
        s2[1] = std::min(0.9, s2[1] + 0.1 * (step + 1));
        const double t1 = std::accumulate(s.begin(), s.end(), 0.0) / d;
        const double t2 = std::accumulate(s2.begin(), s2.end(), 0.0) / d;
        const PruneMask m1 =
            build_mask(as_scores(scores), SparsityVector(s, t1), ComparisonGroup::per_output());
        const PruneMask m2 =
            build_mask(as_scores(scores), SparsityVector(s2, t2), ComparisonGroup::per_output());
        for (std::size_t j = 0; j < n; ++j) {
            if (m1.at(1, j)) CHECK(m2.at(1, j));
        }
    }
    (void)rng;
}

TEST_CASE("the top-scoring weight of a row always survives per_output pruning") {
    Rng rng({67});
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 3 + rng.below(4);
        const std::size_t n = 5 + rng.below(10);
        Matrix scores = gaussian_matrix({rng.next_u64()}, d, n);
        for (float& v : scores.data()) v = std::abs(v);
        const double t = 0.5 + 0.4 * rng.uniform();
        const SparsityVector s = random_sparsity(rng, d, t, 0.95);
        const PruneMask m = build_mask(as_scores(scores), s, ComparisonGroup::per_output());
        for (std::size_t i = 0; i < d; ++i) {
            std::size_t arg = 0;
            for (std::size_t j = 1; j < n; ++j) {
                if (scores(i, j) > scores(i, arg)) arg = j;
            }
            CHECK_FALSE(m.at(i, arg));
        }
    }
}

TEST_CASE("sparsity vector validates its invariants") {
    CHECK_THROWS_AS(SparsityVector({0.2, 0.3}, 0.5), budget_error);       // mean != target
    CHECK_THROWS_AS(SparsityVector({0.97, 0.03}, 0.5), budget_error);     // above cutoff
    CHECK_THROWS_AS(SparsityVector({-0.2, 1.0}, 0.4), budget_error);      // below zero
    CHECK_THROWS_AS(SparsityVector({0.5}, 0.5, 1.5), usage_error);        // bad cutoff
    CHECK_NOTHROW(SparsityVector({0.25, 0.75}, 0.5));
}
