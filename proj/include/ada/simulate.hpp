#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "ada/common.hpp"
#include "ada/pool.hpp"

namespace ada {

struct GaussianComponent {
    Vector mean;
    Vector variance;
    double weight = 1.0;
};

/// Class-conditional mixtures for both domains. Empty `target_components`
/// means the target reuses the source mixtures before displacement.
struct ShiftSpec {
    int class_count = 0;
    int feature_dim = 0;
    std::vector<std::vector<GaussianComponent>> source_components;
    std::vector<std::vector<GaussianComponent>> target_components;
    Vector class_priors;  // empty -> uniform
    double shift_magnitude = 0.0;
    std::set<ClassId> novel_mode_classes;
    double novel_mode_distance = 6.0;
    std::int64_t samples_per_domain = 0;
    double eval_fraction = 1.0 / 3.0;
    int region_size = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Compact description of a synthetic benchmark; `make_shift_spec` expands it.
/// Class centroids are drawn from `geometry_seed`, so the problem geometry is
/// independent of the sampling seed.
struct ShiftLayout {
    int class_count = 6;
    int feature_dim = 8;
    int components_per_class = 2;
    double class_separation = 1.5;
    double component_offset = 1.5;
    double component_variance = 2.0;
    double shift_magnitude = 2.5;
    std::set<ClassId> novel_mode_classes{4, 5};
    double novel_mode_distance = 6.0;
    Vector class_priors{0.25, 0.2, 0.2, 0.15, 0.1, 0.1};
    std::int64_t samples_per_domain = 6000;
    double eval_fraction = 1.0 / 3.0;
    std::uint64_t geometry_seed = 20220705;

    void validate() const;
    bool operator==(const ShiftLayout&) const = default;
};

/// The "shift-bench-v1" benchmark layout.
ShiftLayout shift_bench_v1();

ShiftSpec make_shift_spec(const ShiftLayout& layout, int region_size, std::uint64_t seed);

/// Fixed unit direction along which class `c` target means are displaced.
Vector shift_direction(ClassId c, int feature_dim);
/// Fixed unit direction locating the target-only mode of class `c`.
Vector novel_mode_direction(ClassId c, int feature_dim);

/// Target mixtures after displacement and novel-mode insertion. The novel
/// component, when present, is the last one of its class and carries 30% of the mass.
std::vector<std::vector<GaussianComponent>> effective_target_components(const ShiftSpec& spec);

struct GeneratedPools {
    DomainPool source;
    DomainPool target_train;
    DomainPool target_eval;
    std::set<RegionId> novel_mode_regions;  // target_train regions drawn from a target-only mode
};

/// Draws every domain as class-pure patches of `region_size` samples; the
/// target split into train and eval sets sized so that eval is `eval_fraction`
/// of all target samples and train holds `samples_per_domain`.
GeneratedPools generate(const ShiftSpec& spec);

/// Reveals the members' true classes and marks the regions labeled (all-or-nothing).
std::vector<std::vector<ClassId>> oracle_label(DomainPool& pool, std::span<const RegionId> region_ids);

}  // namespace ada
