#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "ada/density.hpp"
#include "ada/simulate.hpp"
#include "doctest.h"

using namespace ada;

namespace {

// Two-sample energy statistic with a permutation p-value.
double energy_test_p(const std::vector<Vector>& a, const std::vector<Vector>& b, int permutations, std::uint64_t seed) {
    std::vector<Vector> all = a;
    all.insert(all.end(), b.begin(), b.end());
    const std::size_t n = all.size(), na = a.size();
    std::vector<float> dist(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            double d = 0.0;
            for (std::size_t j = 0; j < all[i].size(); ++j) d += (all[i][j] - all[k][j]) * (all[i][j] - all[k][j]);
            dist[i * n + k] = static_cast<float>(std::sqrt(d));
        }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    auto stat = [&] {
        double xy = 0.0, xx = 0.0, yy = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                const double d = dist[idx[i] * n + idx[k]];
                const bool xi = i < na, xk = k < na;
                if (xi && xk) xx += d;
                else if (!xi && !xk) yy += d;
                else xy += d;
            }
        const double nb = double(n - na);
        return xy / (na * nb) - xx / (double(na) * na) - yy / (nb * nb);
    };
    const double observed = stat();
    std::mt19937_64 rng(seed);
    int exceed = 0;
    for (int p = 0; p < permutations; ++p) {
        std::shuffle(idx.begin(), idx.end(), rng);
        exceed += stat() >= observed;
    }
    return (exceed + 1.0) / (permutations + 1.0);
}

std::vector<Vector> features_of(const DomainPool& pool) {
    std::vector<Vector> out;
    for (const auto& s : pool.samples()) out.push_back(s.feature);
    return out;
}

ShiftLayout small_layout() {
    ShiftLayout l = shift_bench_v1();
    l.samples_per_domain = 1200;
    return l;
}

}  // namespace

TEST_CASE("shift-bench-v1 defaults") {
    auto l = shift_bench_v1();
    CHECK(l.class_count == 6);
    CHECK(l.feature_dim == 8);
    CHECK(l.components_per_class == 2);
    CHECK(l.shift_magnitude == 2.5);
    CHECK(l.novel_mode_classes.size() == 2);
    CHECK(l.samples_per_domain == 6000);
    auto pools = generate(make_shift_spec(l, 5, 0));
    CHECK(pools.source.total_px() == 6000);
    CHECK(pools.target_train.total_px() == 6000);
    CHECK(pools.target_eval.total_px() == 3000);
    CHECK(pools.source.max_region_px() == 5);
    CHECK(pools.source.labeled_px() == 6000);
    CHECK(pools.target_train.labeled_px() == 0);
}

TEST_CASE("zero shift without novel modes gives identical domains") {
    auto l = small_layout();
    l.shift_magnitude = 0.0;
    l.novel_mode_classes.clear();
    l.samples_per_domain = 2000;
    // Single-sample regions keep the draws independent, as the test assumes.
    auto spec = make_shift_spec(l, 1, 3);
    auto target = effective_target_components(spec);
    for (int c = 0; c < l.class_count; ++c) {
        REQUIRE(target[c].size() == spec.source_components[c].size());
        for (std::size_t k = 0; k < target[c].size(); ++k) {
            CHECK(target[c][k].mean == spec.source_components[c][k].mean);
            CHECK(target[c][k].weight == spec.source_components[c][k].weight);
        }
    }
    auto pools = generate(spec);
    const double p = energy_test_p(features_of(pools.source), features_of(pools.target_train), 99, 1);
    CHECK(p > 0.01);
}

TEST_CASE("shifted domains are distinguishable") {
    auto l = small_layout();
    l.samples_per_domain = 600;
    auto pools = generate(make_shift_spec(l, 1, 3));
    const double p = energy_test_p(features_of(pools.source), features_of(pools.target_train), 99, 1);
    CHECK(p <= 0.01);
}

TEST_CASE("generation is deterministic and seed dependent") {
    auto spec = make_shift_spec(small_layout(), 5, 42);
    auto dump = [](const DomainPool& p) {
        std::ostringstream o;
        write_pool_csv(o, p);
        return o.str();
    };
    auto a = generate(spec), b = generate(spec);
    CHECK(dump(a.source) == dump(b.source));
    CHECK(dump(a.target_train) == dump(b.target_train));
    CHECK(dump(a.target_eval) == dump(b.target_eval));
    CHECK(a.novel_mode_regions == b.novel_mode_regions);
    auto c = generate(make_shift_spec(small_layout(), 5, 43));
    CHECK(dump(a.target_train) != dump(c.target_train));
}

TEST_CASE("target displacement and novel mode") {
    auto l = small_layout();
    l.novel_mode_classes = {2};
    auto spec = make_shift_spec(l, 5, 0);
    auto target = effective_target_components(spec);
    for (int c = 0; c < l.class_count; ++c) {
        const auto u = shift_direction(c, l.feature_dim);
        double norm = 0.0;
        for (double v : u) norm += v * v;
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
        const std::size_t base = spec.source_components[c].size();
        for (std::size_t k = 0; k < base; ++k)
            for (int j = 0; j < l.feature_dim; ++j)
                CHECK(target[c][k].mean[j] ==
                      doctest::Approx(spec.source_components[c][k].mean[j] + l.shift_magnitude * u[j]).epsilon(1e-12));
        double w = 0.0;
        for (const auto& g : target[c]) w += g.weight;
        CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
        if (c == 2) {
            REQUIRE(target[c].size() == base + 1);
            CHECK(target[c].back().weight == doctest::Approx(0.3).epsilon(1e-12));
        } else {
            CHECK(target[c].size() == base);
        }
    }
}

TEST_CASE("novel-mode regions are far less likely under the source density") {
    auto l = small_layout();
    l.novel_mode_classes = {2};
    l.samples_per_domain = 6000;
    auto pools = generate(make_shift_spec(l, 5, 1));
    REQUIRE_FALSE(pools.novel_mode_regions.empty());
    // Source estimator on raw region means, grouped by ground truth.
    auto src = build_estimators(pools.source.regions(), Domain::Source, 200, 7);
    const GmmModel* m = src.find(2);
    REQUIRE(m != nullptr);
    double worst_source_mode = 0.0, best_novel = LOG_FLOOR * 2;
    double novel_sum = 0.0, covered_sum = 0.0;
    int novel_n = 0, covered_n = 0;
    for (const auto& r : pools.target_train.regions()) {
        if (r.majority_class != 2) continue;
        const double ld = log_density(*m, r.feature_z);
        if (pools.novel_mode_regions.contains(r.id)) {
            best_novel = std::max(best_novel, ld);
            novel_sum += ld, ++novel_n;
        } else {
            covered_sum += ld, ++covered_n;
        }
    }
    for (const auto& r : pools.source.regions())
        if (r.majority_class == 2) worst_source_mode = std::min(worst_source_mode, log_density(*m, r.feature_z));
    REQUIRE(novel_n > 0);
    // Every target-only region sits below every same-class source region.
    CHECK(best_novel < worst_source_mode);
    CHECK(novel_sum / novel_n < covered_sum / covered_n - 20.0);
}

TEST_CASE("class priors match the layout") {
    auto l = small_layout();
    l.samples_per_domain = 6000;
    auto pools = generate(make_shift_spec(l, 5, 11));
    std::vector<double> count(l.class_count, 0.0);
    for (const auto& s : pools.target_train.samples()) count[s.true_class] += 1.0;
    for (int c = 0; c < l.class_count; ++c) {
        const double p = l.class_priors[c];
        const double se = std::sqrt(p * (1 - p) / (6000.0 / 5.0));  // regions are the sampling unit
        CHECK(std::abs(count[c] / 6000.0 - p) < 4.0 * se);
    }
}

TEST_CASE("eval split is disjoint from train") {
    auto pools = generate(make_shift_spec(small_layout(), 5, 2));
    std::set<std::vector<double>> train;
    for (const auto& s : pools.target_train.samples()) train.insert(s.feature);
    for (const auto& s : pools.target_eval.samples()) CHECK_FALSE(train.contains(s.feature));
}

TEST_CASE("oracle_label") {
    auto pools = generate(make_shift_spec(small_layout(), 5, 4));
    auto& pool = pools.target_train;
    CHECK(oracle_label(pool, std::vector<RegionId>{}).empty());
    CHECK(pool.labeled_px() == 0);

    std::vector<RegionId> two{pool.regions()[0].id, pool.regions()[3].id};
    auto labels = oracle_label(pool, two);
    REQUIRE(labels.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& r = pool.region(two[i]);
        REQUIRE(labels[i].size() == r.sample_ids.size());
        for (std::size_t j = 0; j < labels[i].size(); ++j) CHECK(labels[i][j] == pool.sample(r.sample_ids[j]).true_class);
    }
    CHECK_THROWS_AS(oracle_label(pool, two), InvalidInput);

    std::vector<RegionId> rest;
    for (const auto& r : pool.regions())
        if (r.label_state == LabelState::Unlabeled) rest.push_back(r.id);
    oracle_label(pool, rest);
    CHECK(pool.labeled_px() == pool.total_px());
}

TEST_CASE("invalid layouts and mixtures are rejected") {
    auto l = small_layout();
    l.eval_fraction = 1.0;
    CHECK_THROWS_AS(l.validate(), InvalidInput);
    l = small_layout();
    l.class_priors = {0.5, 0.5};
    CHECK_THROWS_AS(l.validate(), InvalidInput);
    l = small_layout();
    l.novel_mode_classes = {9};
    CHECK_THROWS_AS(l.validate(), InvalidInput);
    l = small_layout();
    l.shift_magnitude = -1.0;
    CHECK_THROWS_AS(l.validate(), InvalidInput);

    auto spec = make_shift_spec(small_layout(), 5, 0);
    spec.source_components[0][0].weight = 0.9;
    CHECK_THROWS_AS(generate(spec), InvalidInput);
}
