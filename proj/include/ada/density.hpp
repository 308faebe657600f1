#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "ada/common.hpp"
#include "ada/pool.hpp"

namespace ada {

inline constexpr double VARIANCE_FLOOR = 1e-6;
inline constexpr int MAX_COMPONENTS = 10;

/// Diagonal-covariance Gaussian mixture.
struct GmmModel {
    Vector weights;
    std::vector<Vector> means;
    std::vector<Vector> variances;

    int component_count() const { return static_cast<int>(weights.size()); }
    int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
};

struct EmOptions {
    int max_iterations = 100;
    double relative_tolerance = 1e-6;
    double variance_floor = VARIANCE_FLOOR;
};

struct GmmFit {
    GmmModel model;
    // Total data log-likelihood at the initial parameters and after every M-step.
    std::vector<double> log_likelihood_trace;
    int iterations = 0;
    bool converged = false;
};

/// EM with k-means++ seeding. K is reduced to min(K, |features|); components
/// that lose all responsibility are dropped from the returned model.
GmmFit fit_gmm_traced(std::span<const Vector> features, int k, std::uint64_t seed,
                      const EmOptions& options = {});
GmmModel fit_gmm(std::span<const Vector> features, int k, std::uint64_t seed,
                 const EmOptions& options = {});

/// Unclamped log p(z) via log-sum-exp.
double log_density_raw(const GmmModel& model, std::span<const double> z);
/// log p(z) clamped below at LOG_FLOOR.
double log_density(const GmmModel& model, std::span<const double> z);

/// clamp(round(n_regions / ratio), 1, 10)
int choose_component_count(std::int64_t n_regions, double ratio);

std::vector<Vector> sample_gmm(const GmmModel& model, std::size_t n, std::uint64_t seed);

struct DensityEstimators {
    Domain domain = Domain::Source;
    std::map<ClassId, GmmModel> per_class;

    const GmmModel* find(ClassId c) const {
        auto it = per_class.find(c);
        return it == per_class.end() ? nullptr : &it->second;
    }
};

/// One mixture per class present in `regions`. Source regions are keyed by
/// their ground-truth majority class, target regions by predicted class.
DensityEstimators build_estimators(std::span<const Region> regions, Domain domain,
                                   double ratio, std::uint64_t seed,
                                   const EmOptions& options = {});

// Debug dump, one row per component: `component,weight,mean_0..,var_0..`.
void write_gmm_text(std::ostream& out, const GmmModel& model);

}  // namespace ada
