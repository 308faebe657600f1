#include "ada/pool.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <unordered_set>

#include "ada/csv.hpp"

namespace ada {

DomainPool::DomainPool(Domain domain, std::vector<Sample> samples, std::vector<Region> regions,
                       int class_count, int feature_dim)
    : domain_(domain),
      samples_(std::move(samples)),
      regions_(std::move(regions)),
      class_count_(class_count),
      feature_dim_(feature_dim) {
    if (class_count_ < 1) throw InvalidInput("class_count must be >= 1");
    if (feature_dim_ < 1) throw InvalidInput("feature_dim must be >= 1");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (static_cast<int>(s.feature.size()) != feature_dim_)
            throw InvalidInput("sample feature dimension mismatch");
        if (s.true_class < 0 || s.true_class >= class_count_)
            throw InvalidInput("sample class out of range");
        if (!sample_index_.emplace(s.id, i).second) throw InvalidInput("duplicate sample id");
    }
    std::unordered_set<SampleId> assigned;
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        auto& r = regions_[i];
        if (!region_index_.emplace(r.id, i).second) throw InvalidInput("duplicate region id");
        if (r.sample_ids.empty()) throw InvalidInput("empty region");
        if (r.size_px != static_cast<std::int64_t>(r.sample_ids.size()))
            throw InvalidInput("region size_px does not match its member count");
        std::vector<std::int64_t> votes(class_count_, 0);
        // Until a model refreshes it, the region feature is the raw input mean.
        const bool fill_feature = r.feature_z.empty();
        if (fill_feature) r.feature_z.assign(feature_dim_, 0.0);
        for (SampleId sid : r.sample_ids) {
            auto it = sample_index_.find(sid);
            if (it == sample_index_.end()) throw InvalidInput("region references unknown sample");
            if (!assigned.insert(sid).second) throw InvalidInput("sample in more than one region");
            const Sample& s = samples_[it->second];
            if (s.region_id != r.id) throw InvalidInput("sample region_id disagrees with region membership");
            ++votes[s.true_class];
            if (fill_feature)
                for (int j = 0; j < feature_dim_; ++j) r.feature_z[j] += s.feature[j];
        }
        if (fill_feature)
            for (auto& v : r.feature_z) v /= static_cast<double>(r.size_px);
        r.majority_class = static_cast<ClassId>(
            std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    if (assigned.size() != samples_.size()) throw InvalidInput("sample without a region");
    if (domain_ == Domain::Source) label_all();
}

const Sample& DomainPool::sample(SampleId id) const {
    auto it = sample_index_.find(id);
    if (it == sample_index_.end()) throw InvalidInput("unknown sample id " + std::to_string(id));
    return samples_[it->second];
}

const Region& DomainPool::region(RegionId id) const {
    auto it = region_index_.find(id);
    if (it == region_index_.end()) throw InvalidInput("unknown region id " + std::to_string(id));
    return regions_[it->second];
}

Region& DomainPool::region(RegionId id) {
    return const_cast<Region&>(static_cast<const DomainPool&>(*this).region(id));
}

bool DomainPool::has_region(RegionId id) const { return region_index_.contains(id); }

std::int64_t DomainPool::labeled_px() const {
    std::int64_t n = 0;
    for (const auto& r : regions_)
        if (r.label_state == LabelState::Labeled) n += r.size_px;
    return n;
}

std::int64_t DomainPool::max_region_px() const {
    std::int64_t m = 0;
    for (const auto& r : regions_) m = std::max(m, r.size_px);
    return m;
}

void DomainPool::label_all() {
    for (auto& r : regions_) r.label_state = LabelState::Labeled;
}

std::vector<Region> build_regions(std::vector<Sample>& samples, int region_size,
                                  std::uint64_t seed) {
    if (samples.empty()) throw InvalidInput("build_regions: empty sample list");
    if (region_size < 1) throw InvalidInput("build_regions: region_size must be >= 1");

    const std::size_t n_blocks = (samples.size() + region_size - 1) / region_size;
    std::vector<RegionId> ids(n_blocks);
    std::iota(ids.begin(), ids.end(), RegionId{0});
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    std::vector<Region> regions(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        Region& r = regions[b];
        r.id = ids[b];
        const std::size_t lo = b * region_size;
        const std::size_t hi = std::min(samples.size(), lo + region_size);
        for (std::size_t i = lo; i < hi; ++i) {
            samples[i].region_id = r.id;
            r.sample_ids.push_back(samples[i].id);
        }
        r.size_px = static_cast<std::int64_t>(r.sample_ids.size());
    }
    std::sort(regions.begin(), regions.end(),
              [](const Region& a, const Region& b) { return a.id < b.id; });
    return regions;
}

std::vector<Region> regions_from_assignment(std::span<const Sample> samples) {
    std::map<RegionId, Region> by_id;
    for (const auto& s : samples) {
        Region& r = by_id[s.region_id];
        r.id = s.region_id;
        r.sample_ids.push_back(s.id);
        ++r.size_px;
    }
    std::vector<Region> out;
    out.reserve(by_id.size());
    for (auto& [id, r] : by_id) out.push_back(std::move(r));
    return out;
}

RegionAggregate aggregate_region(std::span<const Vector> member_features,
                                 std::span<const Vector> member_probs) {
    if (member_features.empty()) throw InvalidInput("aggregate_region: empty region");
    if (member_features.size() != member_probs.size())
        throw InvalidInput("aggregate_region: one probability vector per member required");
    const std::size_t d = member_features.front().size();
    const std::size_t c = member_probs.front().size();
    RegionAggregate agg;
    agg.feature_z.assign(d, 0.0);
    agg.mean_probs.assign(c, 0.0);
    for (std::size_t i = 0; i < member_features.size(); ++i) {
        if (member_features[i].size() != d || member_probs[i].size() != c)
            throw InvalidInput("aggregate_region: dimension mismatch");
        check_probability_vector(member_probs[i]);
        for (std::size_t j = 0; j < d; ++j) agg.feature_z[j] += member_features[i][j];
        for (std::size_t j = 0; j < c; ++j) agg.mean_probs[j] += member_probs[i][j];
    }
    const double n = static_cast<double>(member_features.size());
    for (auto& v : agg.feature_z) v /= n;
    for (auto& v : agg.mean_probs) v /= n;
    agg.predicted_class = static_cast<ClassId>(argmax(agg.mean_probs));
    return agg;
}

std::int64_t acquire_labels(DomainPool& pool, std::span<const RegionId> region_ids) {
    std::unordered_set<RegionId> seen;
    std::int64_t px = 0;
    for (RegionId id : region_ids) {
        if (!pool.has_region(id)) throw InvalidInput("acquire_labels: unknown region " + std::to_string(id));
        if (!seen.insert(id).second)
            throw InvalidInput("acquire_labels: region listed twice " + std::to_string(id));
        const Region& r = pool.region(id);
        if (r.label_state == LabelState::Labeled)
            throw InvalidInput("acquire_labels: region already labeled " + std::to_string(id));
        px += r.size_px;
    }
    for (RegionId id : region_ids) pool.region(id).label_state = LabelState::Labeled;
    return px;
}

void write_pool_csv(std::ostream& out, const DomainPool& pool) {
    out << "id,region_id,class";
    for (int j = 0; j < pool.feature_dim(); ++j) out << ",f" << j;
    out << '\n';
    for (const auto& s : pool.samples()) {
        out << s.id << ',' << s.region_id << ',' << s.true_class;
        for (double v : s.feature) out << ',' << csv::format_double(v);
        out << '\n';
    }
    if (!out) throw IoError("write_pool_csv: stream failure");
}

DomainPool read_pool_csv(std::istream& in, Domain domain, int class_count) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("read_pool_csv: missing header");
    const auto header = csv::split(line);
    if (header.size() < 4 || header[0] != "id" || header[1] != "region_id" || header[2] != "class")
        throw InvalidInput("read_pool_csv: header must be id,region_id,class,f0,...");
    const int d = static_cast<int>(header.size()) - 3;
    for (int j = 0; j < d; ++j)
        if (header[3 + j] != "f" + std::to_string(j))
            throw InvalidInput("read_pool_csv: unexpected feature column name");

    std::vector<Sample> samples;
    int max_class = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = csv::split(line);
        if (static_cast<int>(fields.size()) != d + 3)
            throw InvalidInput("read_pool_csv: wrong field count");
        Sample s;
        s.id = csv::parse_int(fields[0]);
        s.region_id = csv::parse_int(fields[1]);
        s.true_class = static_cast<ClassId>(csv::parse_int(fields[2]));
        s.feature.reserve(d);
        for (int j = 0; j < d; ++j) s.feature.push_back(csv::parse_double(fields[3 + j]));
        max_class = std::max(max_class, s.true_class);
        samples.push_back(std::move(s));
    }
    if (samples.empty()) throw InvalidInput("read_pool_csv: no samples");
    if (class_count == 0) class_count = max_class + 1;
    auto regions = regions_from_assignment(samples);
    return DomainPool(domain, std::move(samples), std::move(regions), class_count, d);
}

}  // namespace ada
