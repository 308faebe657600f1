#include "ada/simulate.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ada {
namespace {

constexpr double kNovelMass = 0.3;

Vector random_unit(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = normal(rng);
            norm += x * x;
        }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

void validate_components(const std::vector<std::vector<GaussianComponent>>& comps, int c_count,
                         int d, const char* what) {
    if (static_cast<int>(comps.size()) != c_count)
        throw InvalidInput(std::string(what) + ": one mixture per class required");
    for (const auto& mix : comps) {
        if (mix.empty()) throw InvalidInput(std::string(what) + ": empty class mixture");
        double sum = 0.0;
        for (const auto& g : mix) {
            if (static_cast<int>(g.mean.size()) != d || static_cast<int>(g.variance.size()) != d)
                throw InvalidInput(std::string(what) + ": component dimension mismatch");
            for (double v : g.variance)
                if (!(v > 0.0)) throw InvalidInput(std::string(what) + ": variance must be positive");
            if (!(g.weight >= 0.0)) throw InvalidInput(std::string(what) + ": negative weight");
            sum += g.weight;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw InvalidInput(std::string(what) + ": component weights must sum to 1");
    }
}

struct Patch {
    ClassId cls;
    std::size_t component;
};

// Draws `n` samples as class-pure patches; returns samples and the patch
// component of each sample.
std::vector<Sample> draw_patches(const std::vector<std::vector<GaussianComponent>>& mixtures,
                                 const Vector& priors, std::int64_t n, int region_size,
                                 std::uint64_t seed, std::vector<Patch>& patch_of_sample) {
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> pick_class(priors.begin(), priors.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Sample> samples;
    samples.reserve(n);
    patch_of_sample.clear();
    std::int64_t next_id = 0;
    while (next_id < n) {
        const ClassId c = pick_class(rng);
        const auto& mix = mixtures[c];
        std::vector<double> w;
        for (const auto& g : mix) w.push_back(g.weight);
        std::discrete_distribution<std::size_t> pick_comp(w.begin(), w.end());
        const std::size_t k = pick_comp(rng);
        const auto& g = mix[k];
        const std::int64_t len = std::min<std::int64_t>(region_size, n - next_id);
        for (std::int64_t i = 0; i < len; ++i) {
            Sample s;
            s.id = next_id++;
            s.true_class = c;
            s.feature.resize(g.mean.size());
            for (std::size_t j = 0; j < g.mean.size(); ++j)
                s.feature[j] = g.mean[j] + std::sqrt(g.variance[j]) * normal(rng);
            samples.push_back(std::move(s));
            patch_of_sample.push_back({c, k});
        }
    }
    return samples;
}

}  // namespace

void ShiftSpec::validate() const {
    if (class_count < 1) throw InvalidInput("shift: class_count must be >= 1");
    if (feature_dim < 1) throw InvalidInput("shift: feature_dim must be >= 1");
    validate_components(source_components, class_count, feature_dim, "shift.source_components");
    if (!target_components.empty())
        validate_components(target_components, class_count, feature_dim, "shift.target_components");
    if (!class_priors.empty()) {
        if (static_cast<int>(class_priors.size()) != class_count)
            throw InvalidInput("shift: class_priors length must equal class_count");
        double sum = 0.0;
        for (double p : class_priors) {
            if (!(p >= 0.0)) throw InvalidInput("shift: negative class prior");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("shift: class_priors must sum to 1");
    }
    if (!(shift_magnitude >= 0.0)) throw InvalidInput("shift: shift_magnitude must be >= 0");
    for (ClassId c : novel_mode_classes)
        if (c < 0 || c >= class_count) throw InvalidInput("shift: novel mode class out of range");
    if (samples_per_domain < 1) throw InvalidInput("shift: samples_per_domain must be >= 1");
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
        throw InvalidInput("shift: eval_fraction must lie in (0, 1)");
    if (region_size < 1) throw InvalidInput("shift: region_size must be >= 1");
}

void ShiftLayout::validate() const {
    if (class_count < 1 || feature_dim < 1 || components_per_class < 1)
        throw InvalidInput("shift: classes, dim and components_per_class must be >= 1");
    if (!(class_separation >= 0.0) || !(component_offset >= 0.0) || !(component_variance > 0.0))
        throw InvalidInput("shift: separation/offset must be >= 0 and variance > 0");
    if (!(shift_magnitude >= 0.0)) throw InvalidInput("shift: shift_magnitude must be >= 0");
    if (!(novel_mode_distance >= 0.0)) throw InvalidInput("shift: novel_mode_distance must be >= 0");
    for (ClassId c : novel_mode_classes)
        if (c < 0 || c >= class_count) throw InvalidInput("shift: novel mode class out of range");
    if (!class_priors.empty()) {
        if (static_cast<int>(class_priors.size()) != class_count)
            throw InvalidInput("shift: class_priors length must equal classes");
        double sum = 0.0;
        for (double p : class_priors) {
            if (!(p >= 0.0)) throw InvalidInput("shift: negative class prior");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("shift: class_priors must sum to 1");
    }
    if (samples_per_domain < 1) throw InvalidInput("shift: samples_per_domain must be >= 1");
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
        throw InvalidInput("shift: eval_fraction must lie in (0, 1)");
}

ShiftLayout shift_bench_v1() { return ShiftLayout{}; }

ShiftSpec make_shift_spec(const ShiftLayout& layout, int region_size, std::uint64_t seed) {
    layout.validate();
    ShiftSpec spec;
    spec.class_count = layout.class_count;
    spec.feature_dim = layout.feature_dim;
    spec.class_priors = layout.class_priors;
    spec.shift_magnitude = layout.shift_magnitude;
    spec.novel_mode_classes = layout.novel_mode_classes;
    spec.novel_mode_distance = layout.novel_mode_distance;
    spec.samples_per_domain = layout.samples_per_domain;
    spec.eval_fraction = layout.eval_fraction;
    spec.region_size = region_size;
    spec.seed = seed;

    std::mt19937_64 rng(layout.geometry_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = layout.feature_dim;
    for (int c = 0; c < layout.class_count; ++c) {
        Vector centroid(d);
        for (auto& v : centroid) v = layout.class_separation * normal(rng);
        std::vector<GaussianComponent> mix;
        for (int k = 0; k < layout.components_per_class; ++k) {
            const Vector dir = random_unit(rng, d);
            GaussianComponent g;
            g.mean = centroid;
            if (layout.components_per_class > 1)
                for (int j = 0; j < d; ++j) g.mean[j] += layout.component_offset * dir[j];
            g.variance.assign(d, layout.component_variance);
            g.weight = 1.0 / layout.components_per_class;
            mix.push_back(std::move(g));
        }
        spec.source_components.push_back(std::move(mix));
    }
    return spec;
}

Vector shift_direction(ClassId c, int feature_dim) {
    std::mt19937_64 rng(mix_seed(0x5417, static_cast<std::uint64_t>(c)));
    return random_unit(rng, feature_dim);
}

Vector novel_mode_direction(ClassId c, int feature_dim) {
    std::mt19937_64 rng(mix_seed(0x90e1, static_cast<std::uint64_t>(c)));
    return random_unit(rng, feature_dim);
}

std::vector<std::vector<GaussianComponent>> effective_target_components(const ShiftSpec& spec) {
    auto target = spec.target_components.empty() ? spec.source_components : spec.target_components;
    const int d = spec.feature_dim;
    for (ClassId c = 0; c < spec.class_count; ++c) {
        auto& mix = target[c];
        const Vector dir = shift_direction(c, d);
        for (auto& g : mix)
            for (int j = 0; j < d; ++j) g.mean[j] += spec.shift_magnitude * dir[j];
        if (!spec.novel_mode_classes.contains(c)) continue;

        // The novel mode sits away from the source centroid of its class.
        const auto& src = spec.source_components[c];
        GaussianComponent novel;
        novel.mean.assign(d, 0.0);
        novel.variance.assign(d, 0.0);
        for (const auto& g : src)
            for (int j = 0; j < d; ++j) {
                novel.mean[j] += g.weight * g.mean[j];
                novel.variance[j] += g.weight * g.variance[j];
            }
        const Vector away = novel_mode_direction(c, d);
        for (int j = 0; j < d; ++j) novel.mean[j] += spec.novel_mode_distance * away[j];
        novel.weight = kNovelMass;
        for (auto& g : mix) g.weight *= 1.0 - kNovelMass;
        mix.push_back(std::move(novel));
    }
    return target;
}

GeneratedPools generate(const ShiftSpec& spec) {
    spec.validate();
    const Vector priors = spec.class_priors.empty()
                              ? Vector(spec.class_count, 1.0 / spec.class_count)
                              : spec.class_priors;
    const auto target_mix = effective_target_components(spec);
    const auto eval_count = static_cast<std::int64_t>(std::llround(
        static_cast<double>(spec.samples_per_domain) * spec.eval_fraction / (1.0 - spec.eval_fraction)));

    std::vector<Patch> patches;
    auto make_pool = [&](Domain domain, const std::vector<std::vector<GaussianComponent>>& mix,
                         std::int64_t n, std::uint64_t salt, std::vector<Patch>& patch_out) {
        auto samples = draw_patches(mix, priors, std::max<std::int64_t>(n, 1), spec.region_size,
                                    mix_seed(spec.seed, salt), patch_out);
        auto regions = build_regions(samples, spec.region_size, mix_seed(spec.seed, salt + 100));
        return DomainPool(domain, std::move(samples), std::move(regions), spec.class_count,
                          spec.feature_dim);
    };

    GeneratedPools out;
    out.source = make_pool(Domain::Source, spec.source_components, spec.samples_per_domain, 1, patches);
    out.target_train = make_pool(Domain::Target, target_mix, spec.samples_per_domain, 2, patches);
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const auto& p = patches[i];
        const bool novel = spec.novel_mode_classes.contains(p.cls) &&
                           p.component + 1 == target_mix[p.cls].size();
        if (novel) out.novel_mode_regions.insert(out.target_train.samples()[i].region_id);
    }
    std::vector<Patch> eval_patches;
    out.target_eval = make_pool(Domain::Target, target_mix, eval_count, 3, eval_patches);
    return out;
}

std::vector<std::vector<ClassId>> oracle_label(DomainPool& pool, std::span<const RegionId> region_ids) {
    acquire_labels(pool, region_ids);
    std::vector<std::vector<ClassId>> labels;
    labels.reserve(region_ids.size());
    for (RegionId id : region_ids) {
        std::vector<ClassId> cls;
        for (SampleId sid : pool.region(id).sample_ids) cls.push_back(pool.sample(sid).true_class);
        labels.push_back(std::move(cls));
    }
    return labels;
}

}  // namespace ada
