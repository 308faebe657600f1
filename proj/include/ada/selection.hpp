#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ada/common.hpp"
#include "ada/density.hpp"
#include "ada/pool.hpp"

namespace ada {

struct ScoredRegion {
    RegionId region_id = 0;
    ClassId predicted_class = 0;
    double log_d_T = 0.0;
    double log_d_S = 0.0;
    double pi = 0.0;  // log_d_T - log_d_S
    std::int64_t size_px = 0;
};

struct ClassKl {
    ClassId class_id = 0;
    double kl_estimate = 0.0;
    std::int64_t region_count = 0;
    bool estimable = true;   // false when no unlabeled region is predicted as this class
    bool in_source = true;   // false when the source estimator lacks this class
    double weight = 0.0;
    std::int64_t budget_px = 0;
};

struct BalanceParams {
    double kappa = 20.0;
    double epsilon_w = 0.01;

    bool operator==(const BalanceParams&) const = default;
};

/// log-density ratio score for every unlabeled region in `regions`.
/// Missing source class -> log_d_S = LOG_FLOOR. Missing target class -> InternalError.
std::vector<ScoredRegion> score_regions(std::span<const Region> regions,
                                        const DensityEstimators& source,
                                        const DensityEstimators& target);

/// Mean pi over regions predicted as `c`; throws NotEstimable when there are none.
ClassKl estimate_class_kl(std::span<const ScoredRegion> scored, ClassId c);

/// estimate_class_kl for every class in [0, class_count), marking the
/// non-estimable ones and the ones absent from the source estimator.
std::vector<ClassKl> estimate_all_class_kl(std::span<const ScoredRegion> scored, int class_count,
                                           const DensityEstimators& source);

/// Weights w_c = clamp(kl, 0, kappa) + eps (kappa + eps when not estimable or
/// absent from source); shares rounded by largest remainder so budgets sum to B^d.
std::vector<ClassKl> class_budgets(std::vector<ClassKl> kls, std::int64_t density_budget_px,
                                   const BalanceParams& params = {});

/// Same rounding with every class weighted equally.
std::vector<ClassKl> equal_budgets(std::vector<ClassKl> kls, std::int64_t density_budget_px);

/// Apportions `total` across `weights` by largest remainder, ties to the lowest index.
std::vector<std::int64_t> largest_remainder(std::span<const double> weights, std::int64_t total);

/// Per-class greedy scan by descending pi with the fit rule, then a global
/// refill of the pooled leftover budget in descending-pi order.
std::vector<RegionId> select_density(std::span<const ScoredRegion> scored,
                                     std::span<const ClassKl> budgets);

enum class UncertaintyCriterion { Entropy, Margin, Confidence };

std::string_view to_string(UncertaintyCriterion c);
UncertaintyCriterion parse_uncertainty_criterion(std::string_view name);

double entropy_score(std::span<const double> probs);
double margin_score(std::span<const double> probs);
double confidence_score(std::span<const double> probs);
double uncertainty_score(std::span<const double> probs, UncertaintyCriterion criterion);

/// Criterion averaged over member probability vectors instead of applied to their mean.
double per_pixel_uncertainty_score(std::span<const Vector> member_probs,
                                   UncertaintyCriterion criterion);

struct UncertaintyCandidate {
    RegionId region_id = 0;
    double score = 0.0;
    std::int64_t size_px = 0;
};

/// Greedy scan, entropy descending / margin and confidence ascending, ties to
/// the lower region id, taking each region whose size fits the remaining budget.
std::vector<RegionId> select_uncertainty(std::span<const UncertaintyCandidate> candidates,
                                         std::int64_t budget_px, UncertaintyCriterion criterion);

/// Uniformly random order under the same fit rule.
std::vector<RegionId> select_random(std::span<const UncertaintyCandidate> candidates,
                                    std::int64_t budget_px, std::uint64_t seed);

/// Chain rule of KL for discrete joints p(c, z) given as class-major matrices.
struct KlDecomposition {
    double joint = 0.0;
    double marginal = 0.0;
    double expected_conditional = 0.0;
    double residual() const { return joint - (marginal + expected_conditional); }
};

/// `target` and `source` are C x Z joint probability tables; source must be
/// positive wherever target is.
KlDecomposition verify_kl_decomposition(const std::vector<Vector>& target,
                                        const std::vector<Vector>& source);

// Score dump: `region_id,class,log_dS,log_dT,pi,entropy,margin,confidence,selected_by`.
struct ScoreDumpRow {
    ScoredRegion scored;
    double entropy = 0.0;
    double margin = 0.0;
    double confidence = 0.0;
    std::string selected_by;  // "density", "uncertainty", "random" or empty
};
void write_score_dump(std::ostream& out, std::span<const ScoreDumpRow> rows);

}  // namespace ada
