#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "ada/model.hpp"
#include "doctest.h"

using namespace ada;

namespace {

DomainPool pool_from(const LabeledData& data, Domain domain, int classes, int region_size = 1) {
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < data.size(); ++i) samples.push_back({SampleId(i), data.x[i], data.y[i], 0});
    auto regions = build_regions(samples, region_size, 0);
    return DomainPool(domain, std::move(samples), std::move(regions), classes, int(data.x.front().size()));
}

LabeledData separable(std::uint64_t seed, int n) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.5);
    LabeledData d;
    for (int i = 0; i < n; ++i) {
        const int c = i % 2;
        d.append({(c ? 2.0 : -2.0) + g(rng), (c ? 1.0 : -1.0) + g(rng)}, c);
    }
    return d;
}

double accuracy(const Classifier& m, const LabeledData& d) {
    int hit = 0;
    for (std::size_t i = 0; i < d.size(); ++i) hit += m.predict(d.x[i]) == d.y[i];
    return double(hit) / d.size();
}

}  // namespace

TEST_CASE("zero weights give uniform probabilities") {
    for (auto arch : {ArchitectureSpec{Architecture::Linear, 0}, ArchitectureSpec{Architecture::OneHidden, 4}}) {
        Classifier m(arch, 3, 5);
        auto p = m.predict_proba(Vector{1.0, -2.0, 0.5});
        for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
    }
}

TEST_CASE("Linear feature extraction is the identity") {
    auto m = Classifier::initialized({Architecture::Linear, 0}, 3, 2, 7);
    const Vector x{0.3, -1.0, 2.5};
    CHECK(m.extract_feature(x) == x);
    auto h = Classifier::initialized({Architecture::OneHidden, 6}, 3, 2, 7);
    auto z = h.extract_feature(x);
    CHECK(z.size() == 6);
    for (double v : z) CHECK(std::abs(v) < 1.0);
}

TEST_CASE("probabilities are normalized for any input") {
    auto m = Classifier::initialized({Architecture::OneHidden, 8}, 4, 6, 3);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 50.0);
    for (int t = 0; t < 200; ++t) {
        Vector x{n(rng), n(rng), n(rng), n(rng)};
        auto p = m.predict_proba(x);
        double s = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    CHECK_THROWS_AS(m.predict_proba(Vector{1.0}), InvalidInput);
    CHECK_THROWS_AS(m.extract_feature(Vector{1.0, 2.0, 3.0, 4.0, 5.0}), InvalidInput);
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, 2);
    LabeledData data;
    for (int i = 0; i < 12; ++i) data.append({n(rng), n(rng), n(rng), n(rng)}, cls(rng));
    for (auto arch : {ArchitectureSpec{Architecture::Linear, 0}, ArchitectureSpec{Architecture::OneHidden, 5}}) {
        double worst = 0.0;
        for (int probe = 0; probe < 100; ++probe) {
            auto m = Classifier::initialized(arch, 4, 3, probe);
            auto params = m.parameters();
            for (auto& p : params) p += 0.3 * n(rng);
            Vector grad;
            m.loss_and_gradient(data, {}, grad);
            const std::size_t k = std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng);
            const double h = 1e-5, saved = params[k];
            params[k] = saved + h;
            const double up = m.loss(data);
            params[k] = saved - h;
            const double down = m.loss(data);
            params[k] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double rel = std::abs(numeric - grad[k]) / std::max({std::abs(numeric), std::abs(grad[k]), 1e-6});
            worst = std::max(worst, rel);
        }
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("gradient over a row subset equals the gradient of that subset") {
    auto data = separable(3, 20);
    auto m = Classifier::initialized({Architecture::OneHidden, 4}, 2, 2, 1);
    std::vector<std::size_t> rows{1, 4, 7};
    LabeledData sub;
    for (auto r : rows) sub.append(data.x[r], data.y[r]);
    Vector g1, g2;
    const double l1 = m.loss_and_gradient(data, rows, g1);
    const double l2 = m.loss_and_gradient(sub, {}, g2);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-14));
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-12));
}

TEST_CASE("warmup learns a linearly separable source") {
    auto data = separable(5, 400);
    auto pool = pool_from(data, Domain::Source, 2);
    TrainSpec spec{0.1, 200, 32, 9};
    auto m = warmup(pool, {Architecture::Linear, 0}, spec);
    CHECK(accuracy(m, data) >= 0.99);
}

TEST_CASE("one sample per class is memorized") {
    LabeledData d;
    d.append({0.0, 1.0}, 0);
    d.append({1.0, 0.0}, 1);
    d.append({-1.0, -1.0}, 2);
    auto pool = pool_from(d, Domain::Source, 3);
    auto m = warmup(pool, {Architecture::OneHidden, 8}, {0.5, 300, 3, 0});
    CHECK(accuracy(m, d) == 1.0);
}

TEST_CASE("warmup is deterministic and validates input") {
    auto pool = pool_from(separable(1, 60), Domain::Source, 2);
    TrainSpec spec{0.05, 5, 8, 123};
    auto a = warmup(pool, {}, spec), b = warmup(pool, {}, spec);
    REQUIRE(a.parameters().size() == b.parameters().size());
    CHECK(std::memcmp(a.parameters().data(), b.parameters().data(), a.parameters().size() * sizeof(double)) == 0);
    CHECK_THROWS_AS(warmup(DomainPool{}, {}, spec), InvalidInput);
    CHECK_THROWS_AS(warmup(pool, {}, TrainSpec{0.0, 5, 8, 0}), InvalidInput);
    CHECK_THROWS_AS(warmup(pool, {}, TrainSpec{0.1, 5, 0, 0}), InvalidInput);
}

TEST_CASE("training loss does not increase at a small learning rate") {
    auto data = separable(8, 200);
    auto m = Classifier::initialized({Architecture::OneHidden, 8}, 2, 2, 4);
    auto losses = train(m, data, {0.05, 40, 200, 1});  // full batch
    for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1] + 1e-12);
}

TEST_CASE("finetune edge cases") {
    auto src_data = separable(2, 100);
    auto source = pool_from(src_data, Domain::Source, 2);
    auto target = pool_from(separable(6, 20), Domain::Target, 2);

    auto m = warmup(source, {}, {0.1, 5, 16, 1});
    auto before = std::vector<double>(m.parameters().begin(), m.parameters().end());
    finetune(m, source, target, {0.1, 0, 16, 1});
    CHECK(std::equal(before.begin(), before.end(), m.parameters().begin()));

    // With nothing labeled in the target, finetuning equals more source-only training.
    auto a = m, b = m;
    finetune(a, source, target, {0.1, 3, 16, 2});
    train(b, source_training_data(source), {0.1, 3, 16, 2});
    CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
}

TEST_CASE("finetuning on a contradicting target region improves accuracy there") {
    auto source = pool_from(separable(2, 200), Domain::Source, 2);
    // Target samples sit on the class-0 side of the source boundary but are class 1.
    LabeledData tdata;
    for (int i = 0; i < 10; ++i) tdata.append({-1.5 + 0.05 * i, -1.5}, 1);
    auto target = pool_from(tdata, Domain::Target, 2, 10);
    auto m = warmup(source, {Architecture::OneHidden, 8}, {0.1, 30, 16, 3});
    const double before = accuracy(m, tdata);
    acquire_labels(target, std::vector<RegionId>{target.regions()[0].id});
    CHECK(union_training_data(source, target).size() == 210);
    finetune(m, source, target, {0.1, 60, 16, 4});
    CHECK(accuracy(m, tdata) > before);
}

TEST_CASE("evaluate_predictions") {
    std::vector<ClassId> truth{0, 1, 2, 0};
    auto perfect = evaluate_predictions(truth, truth, 3);
    CHECK(perfect.miou == 1.0);
    CHECK(perfect.accuracy == 1.0);
    for (double v : perfect.iou) CHECK(v == 1.0);

    // TP0 = 3, FP0 = 1, FN0 = 2.
    std::vector<ClassId> t{0, 0, 0, 0, 0, 1, 1, 1};
    std::vector<ClassId> p{0, 0, 0, 1, 1, 0, 1, 1};
    auto m = evaluate_predictions(t, p, 2);
    CHECK(m.tp[0] == 3);
    CHECK(m.fp[0] == 1);
    CHECK(m.fn[0] == 2);
    CHECK(m.iou[0] == doctest::Approx(0.5));
    CHECK(m.iou[1] == doctest::Approx(2.0 / 5.0));
    CHECK(m.miou == doctest::Approx(0.45));
    CHECK(m.accuracy == doctest::Approx(5.0 / 8.0));

    auto absent = evaluate_predictions(std::vector<ClassId>{0, 1}, std::vector<ClassId>{0, 0}, 3);
    CHECK(std::isnan(absent.iou[2]));
    CHECK(absent.miou == doctest::Approx((0.5 + 0.0) / 2.0));

    CHECK_THROWS_AS(evaluate_predictions(std::vector<ClassId>{0}, std::vector<ClassId>{0, 1}, 2), InvalidInput);
}

TEST_CASE("checkpoint round trip and header layout") {
    auto m = Classifier::initialized({Architecture::OneHidden, 5}, 3, 4, 77);
    std::ostringstream out(std::ios::binary);
    save_checkpoint(out, m);
    const std::string bytes = out.str();
    REQUIRE(bytes.size() == 16 + 8 * m.parameters().size());
    CHECK(bytes.substr(0, 4) == "ADAC");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[6]) == 5);
    CHECK(static_cast<unsigned char>(bytes[8]) == 3);
    CHECK(static_cast<unsigned char>(bytes[12]) == 4);

    std::istringstream in(bytes, std::ios::binary);
    auto back = load_checkpoint(in);
    CHECK(back.architecture() == m.architecture());
    CHECK(std::equal(m.parameters().begin(), m.parameters().end(), back.parameters().begin()));

    auto lin = Classifier::initialized({Architecture::Linear, 0}, 2, 3, 1);
    std::ostringstream lo(std::ios::binary);
    save_checkpoint(lo, lin);
    std::istringstream li(lo.str(), std::ios::binary);
    CHECK(load_checkpoint(li).architecture().kind == Architecture::Linear);

    std::istringstream truncated(bytes.substr(0, 30), std::ios::binary);
    CHECK_THROWS(load_checkpoint(truncated));
    std::string corrupt = bytes;
    corrupt[0] = 'X';
    std::istringstream bad(corrupt, std::ios::binary);
    CHECK_THROWS(load_checkpoint(bad));
}

TEST_CASE("architecture names") {
    CHECK(parse_architecture(to_string(Architecture::Linear)) == Architecture::Linear);
    CHECK(parse_architecture(to_string(Architecture::OneHidden)) == Architecture::OneHidden);
    CHECK_THROWS_AS(parse_architecture("Deep"), InvalidInput);
}
