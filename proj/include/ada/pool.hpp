#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ada/common.hpp"

namespace ada {

struct Sample {
    SampleId id = 0;
    Vector feature;
    ClassId true_class = 0;  // hidden from selection; oracle and metrics only
    RegionId region_id = 0;
};

enum class LabelState { Unlabeled, Labeled };

/// The atomic acquisition unit. `feature_z`, `predicted_class` and
/// `mean_probs` are refreshed from the current model every round;
/// `majority_class` is ground truth and is only read for source-domain
/// density estimation, oracle labeling and histograms.
struct Region {
    RegionId id = 0;
    std::vector<SampleId> sample_ids;
    std::int64_t size_px = 0;
    Vector feature_z;
    ClassId predicted_class = 0;
    Vector mean_probs;
    ClassId majority_class = 0;
    LabelState label_state = LabelState::Unlabeled;
};

struct RegionAggregate {
    Vector feature_z;
    ClassId predicted_class = 0;
    Vector mean_probs;
};

class DomainPool {
public:
    DomainPool() = default;
    DomainPool(Domain domain, std::vector<Sample> samples, std::vector<Region> regions,
               int class_count, int feature_dim);

    Domain domain() const { return domain_; }
    int class_count() const { return class_count_; }
    int feature_dim() const { return feature_dim_; }

    const std::vector<Sample>& samples() const { return samples_; }
    const std::vector<Region>& regions() const { return regions_; }
    std::vector<Region>& regions() { return regions_; }

    const Sample& sample(SampleId id) const;
    const Region& region(RegionId id) const;
    Region& region(RegionId id);
    bool has_region(RegionId id) const;

    std::int64_t total_px() const { return static_cast<std::int64_t>(samples_.size()); }
    std::int64_t labeled_px() const;
    std::int64_t unlabeled_px() const { return total_px() - labeled_px(); }
    std::int64_t max_region_px() const;

    /// Marks every region labeled; used for the fully annotated source pool.
    void label_all();

private:
    Domain domain_ = Domain::Source;
    std::vector<Sample> samples_;
    std::vector<Region> regions_;
    int class_count_ = 0;
    int feature_dim_ = 0;
    std::unordered_map<SampleId, std::size_t> sample_index_;
    std::unordered_map<RegionId, std::size_t> region_index_;
};

/// Groups `samples` into contiguous blocks of `region_size` in input order
/// (the final block may be smaller). The seed permutes which region id each
/// block receives. Sample region ids are rewritten to match.
std::vector<Region> build_regions(std::vector<Sample>& samples, int region_size,
                                  std::uint64_t seed);

/// Groups samples by their existing `region_id` (as read from a dataset file).
std::vector<Region> regions_from_assignment(std::span<const Sample> samples);

RegionAggregate aggregate_region(std::span<const Vector> member_features,
                                 std::span<const Vector> member_probs);

/// Labels the listed unlabeled target regions. All-or-nothing: any unknown,
/// duplicated or already-labeled id throws InvalidInput and leaves the pool
/// untouched. Returns the number of newly labeled pixels.
std::int64_t acquire_labels(DomainPool& pool, std::span<const RegionId> region_ids);

// Dataset CSV: header `id,region_id,class,f0,...,f{d-1}`, LF line endings.
void write_pool_csv(std::ostream& out, const DomainPool& pool);
/// `class_count` 0 infers C as max(class) + 1. Source pools come back fully labeled.
DomainPool read_pool_csv(std::istream& in, Domain domain, int class_count = 0);

}  // namespace ada
