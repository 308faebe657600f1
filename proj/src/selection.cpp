#include "ada/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_set>

#include "ada/csv.hpp"

namespace ada {
namespace {

bool pi_order(const ScoredRegion& a, const ScoredRegion& b) {
    if (a.pi != b.pi) return a.pi > b.pi;
    return a.region_id < b.region_id;
}

// Greedy fit over an ordered list; appends to `picked` and returns pixels used.
template <typename It, typename IdFn, typename SizeFn>
std::int64_t greedy_fit(It first, It last, std::int64_t budget, IdFn id_of, SizeFn size_of,
                        std::vector<RegionId>& picked) {
    std::int64_t used = 0;
    for (; first != last && used < budget; ++first) {
        const std::int64_t sz = size_of(*first);
        if (sz <= budget - used) {
            picked.push_back(id_of(*first));
            used += sz;
        }
    }
    return used;
}

}  // namespace

std::vector<ScoredRegion> score_regions(std::span<const Region> regions,
                                        const DensityEstimators& source,
                                        const DensityEstimators& target) {
    std::vector<ScoredRegion> out;
    for (const auto& r : regions) {
        if (r.label_state != LabelState::Unlabeled) continue;
        const GmmModel* trg = target.find(r.predicted_class);
        if (trg == nullptr)
            throw InternalError("score_regions: target estimator lacks class " +
                                std::to_string(r.predicted_class));
        ScoredRegion s;
        s.region_id = r.id;
        s.predicted_class = r.predicted_class;
        s.size_px = r.size_px;
        s.log_d_T = log_density(*trg, r.feature_z);
        const GmmModel* src = source.find(r.predicted_class);
        s.log_d_S = src != nullptr ? log_density(*src, r.feature_z) : LOG_FLOOR;
        s.pi = s.log_d_T - s.log_d_S;
        out.push_back(s);
    }
    return out;
}

ClassKl estimate_class_kl(std::span<const ScoredRegion> scored, ClassId c) {
    ClassKl kl;
    kl.class_id = c;
    double sum = 0.0;
    for (const auto& s : scored) {
        if (s.predicted_class != c) continue;
        sum += s.pi;
        ++kl.region_count;
    }
    if (kl.region_count == 0)
        throw NotEstimable("no scored regions predicted as class " + std::to_string(c));
    kl.kl_estimate = sum / static_cast<double>(kl.region_count);
    return kl;
}

std::vector<ClassKl> estimate_all_class_kl(std::span<const ScoredRegion> scored, int class_count,
                                           const DensityEstimators& source) {
    std::vector<ClassKl> out;
    out.reserve(class_count);
    for (ClassId c = 0; c < class_count; ++c) {
        ClassKl kl;
        try {
            kl = estimate_class_kl(scored, c);
        } catch (const NotEstimable&) {
            kl.class_id = c;
            kl.estimable = false;
        }
        kl.in_source = source.find(c) != nullptr;
        out.push_back(kl);
    }
    return out;
}

std::vector<std::int64_t> largest_remainder(std::span<const double> weights, std::int64_t total) {
    const std::size_t n = weights.size();
    std::vector<std::int64_t> out(n, 0);
    if (n == 0 || total <= 0) return out;
    double sum = 0.0;
    for (double w : weights) sum += w;
    std::vector<double> quota(n);
    for (std::size_t i = 0; i < n; ++i)
        quota[i] = sum > 0.0 ? weights[i] / sum * static_cast<double>(total)
                             : static_cast<double>(total) / static_cast<double>(n);
    // Remainders compared at 1e-9 resolution so that shares which are equal
    // in exact arithmetic tie (and go to the lowest index) despite rounding noise.
    std::vector<std::int64_t> rem(n);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<std::int64_t>(std::floor(quota[i]));
        rem[i] = std::llround((quota[i] - static_cast<double>(out[i])) * 1e9);
        assigned += out[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    std::int64_t deficit = total - assigned;
    for (std::size_t k = 0; deficit > 0; k = (k + 1) % n, --deficit) ++out[order[k]];
    // Floating-point overshoot: take back from the smallest remainders.
    for (std::size_t k = n; deficit < 0;) {
        k = (k == 0 ? n : k) - 1;
        if (out[order[k]] > 0) {
            --out[order[k]];
            ++deficit;
        }
    }
    return out;
}

std::vector<ClassKl> class_budgets(std::vector<ClassKl> kls, std::int64_t density_budget_px,
                                   const BalanceParams& params) {
    if (density_budget_px < 0) throw InvalidInput("class_budgets: negative budget");
    std::vector<double> weights;
    weights.reserve(kls.size());
    for (auto& k : kls) {
        if (!k.estimable || !k.in_source || std::isnan(k.kl_estimate))
            k.weight = params.kappa + params.epsilon_w;
        else
            k.weight = std::clamp(k.kl_estimate, 0.0, params.kappa) + params.epsilon_w;
        weights.push_back(k.weight);
    }
    const auto budgets = largest_remainder(weights, density_budget_px);
    for (std::size_t i = 0; i < kls.size(); ++i) kls[i].budget_px = budgets[i];
    return kls;
}

std::vector<ClassKl> equal_budgets(std::vector<ClassKl> kls, std::int64_t density_budget_px) {
    if (density_budget_px < 0) throw InvalidInput("equal_budgets: negative budget");
    std::vector<double> weights(kls.size(), 1.0);
    const auto budgets = largest_remainder(weights, density_budget_px);
    for (std::size_t i = 0; i < kls.size(); ++i) {
        kls[i].weight = 1.0;
        kls[i].budget_px = budgets[i];
    }
    return kls;
}

std::vector<RegionId> select_density(std::span<const ScoredRegion> scored,
                                     std::span<const ClassKl> budgets) {
    std::map<ClassId, std::vector<ScoredRegion>> by_class;
    for (const auto& s : scored) by_class[s.predicted_class].push_back(s);

    std::vector<RegionId> picked;
    std::int64_t leftover = 0;
    for (const auto& b : budgets) {
        auto it = by_class.find(b.class_id);
        if (it == by_class.end()) {
            leftover += b.budget_px;
            continue;
        }
        auto& list = it->second;
        std::sort(list.begin(), list.end(), pi_order);
        const std::int64_t used = greedy_fit(
            list.begin(), list.end(), b.budget_px, [](const ScoredRegion& s) { return s.region_id; },
            [](const ScoredRegion& s) { return s.size_px; }, picked);
        leftover += b.budget_px - used;
    }

    if (leftover > 0) {
        std::unordered_set<RegionId> taken(picked.begin(), picked.end());
        std::vector<ScoredRegion> rest;
        for (const auto& s : scored)
            if (!taken.contains(s.region_id)) rest.push_back(s);
        std::sort(rest.begin(), rest.end(), pi_order);
        greedy_fit(
            rest.begin(), rest.end(), leftover, [](const ScoredRegion& s) { return s.region_id; },
            [](const ScoredRegion& s) { return s.size_px; }, picked);
    }
    return picked;
}

std::string_view to_string(UncertaintyCriterion c) {
    switch (c) {
        case UncertaintyCriterion::Entropy: return "entropy";
        case UncertaintyCriterion::Margin: return "margin";
        case UncertaintyCriterion::Confidence: return "confidence";
    }
    return "entropy";
}

UncertaintyCriterion parse_uncertainty_criterion(std::string_view name) {
    if (name == "entropy") return UncertaintyCriterion::Entropy;
    if (name == "margin") return UncertaintyCriterion::Margin;
    if (name == "confidence") return UncertaintyCriterion::Confidence;
    throw InvalidInput("unknown uncertainty criterion '" + std::string(name) + "'");
}

double entropy_score(std::span<const double> probs) {
    check_probability_vector(probs);
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double margin_score(std::span<const double> probs) {
    check_probability_vector(probs);
    double first = 0.0, second = 0.0;
    for (double p : probs) {
        if (p > first) {
            second = first;
            first = p;
        } else if (p > second) {
            second = p;
        }
    }
    return first - second;
}

double confidence_score(std::span<const double> probs) {
    check_probability_vector(probs);
    return *std::max_element(probs.begin(), probs.end());
}

double uncertainty_score(std::span<const double> probs, UncertaintyCriterion criterion) {
    switch (criterion) {
        case UncertaintyCriterion::Entropy: return entropy_score(probs);
        case UncertaintyCriterion::Margin: return margin_score(probs);
        case UncertaintyCriterion::Confidence: return confidence_score(probs);
    }
    throw InternalError("unhandled uncertainty criterion");
}

double per_pixel_uncertainty_score(std::span<const Vector> member_probs,
                                   UncertaintyCriterion criterion) {
    if (member_probs.empty()) throw InvalidInput("per_pixel_uncertainty_score: empty region");
    double sum = 0.0;
    for (const auto& p : member_probs) sum += uncertainty_score(p, criterion);
    return sum / static_cast<double>(member_probs.size());
}

std::vector<RegionId> select_uncertainty(std::span<const UncertaintyCandidate> candidates,
                                         std::int64_t budget_px, UncertaintyCriterion criterion) {
    std::vector<RegionId> picked;
    if (budget_px <= 0) return picked;
    std::vector<UncertaintyCandidate> order(candidates.begin(), candidates.end());
    const bool descending = criterion == UncertaintyCriterion::Entropy;
    std::sort(order.begin(), order.end(),
              [descending](const UncertaintyCandidate& a, const UncertaintyCandidate& b) {
                  if (a.score != b.score) return descending ? a.score > b.score : a.score < b.score;
                  return a.region_id < b.region_id;
              });
    greedy_fit(
        order.begin(), order.end(), budget_px,
        [](const UncertaintyCandidate& c) { return c.region_id; },
        [](const UncertaintyCandidate& c) { return c.size_px; }, picked);
    return picked;
}

std::vector<RegionId> select_random(std::span<const UncertaintyCandidate> candidates,
                                    std::int64_t budget_px, std::uint64_t seed) {
    std::vector<RegionId> picked;
    if (budget_px <= 0) return picked;
    std::vector<UncertaintyCandidate> order(candidates.begin(), candidates.end());
    std::sort(order.begin(), order.end(),
              [](const UncertaintyCandidate& a, const UncertaintyCandidate& b) {
                  return a.region_id < b.region_id;
              });
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    greedy_fit(
        order.begin(), order.end(), budget_px,
        [](const UncertaintyCandidate& c) { return c.region_id; },
        [](const UncertaintyCandidate& c) { return c.size_px; }, picked);
    return picked;
}

KlDecomposition verify_kl_decomposition(const std::vector<Vector>& target,
                                        const std::vector<Vector>& source) {
    if (target.empty() || target.size() != source.size())
        throw InvalidInput("verify_kl_decomposition: shape mismatch");
    const std::size_t z_count = target.front().size();
    double t_total = 0.0, s_total = 0.0;
    for (std::size_t c = 0; c < target.size(); ++c) {
        if (target[c].size() != z_count || source[c].size() != z_count)
            throw InvalidInput("verify_kl_decomposition: ragged table");
        for (std::size_t z = 0; z < z_count; ++z) {
            if (target[c][z] < 0.0 || source[c][z] < 0.0)
                throw InvalidInput("verify_kl_decomposition: negative probability");
            if (target[c][z] > 0.0 && source[c][z] <= 0.0)
                throw InvalidInput("verify_kl_decomposition: target not absolutely continuous");
            t_total += target[c][z];
            s_total += source[c][z];
        }
    }
    if (std::abs(t_total - 1.0) > 1e-9 || std::abs(s_total - 1.0) > 1e-9)
        throw InvalidInput("verify_kl_decomposition: tables must sum to 1");

    KlDecomposition out;
    for (std::size_t c = 0; c < target.size(); ++c) {
        double pt_c = 0.0, ps_c = 0.0;
        for (std::size_t z = 0; z < z_count; ++z) {
            pt_c += target[c][z];
            ps_c += source[c][z];
            if (target[c][z] > 0.0)
                out.joint += target[c][z] * std::log(target[c][z] / source[c][z]);
        }
        if (pt_c <= 0.0) continue;
        out.marginal += pt_c * std::log(pt_c / ps_c);
        double cond = 0.0;
        for (std::size_t z = 0; z < z_count; ++z) {
            if (target[c][z] <= 0.0) continue;
            const double qt = target[c][z] / pt_c;
            const double qs = source[c][z] / ps_c;
            cond += qt * std::log(qt / qs);
        }
        out.expected_conditional += pt_c * cond;
    }
    return out;
}

void write_score_dump(std::ostream& out, std::span<const ScoreDumpRow> rows) {
    out << "region_id,class,log_dS,log_dT,pi,entropy,margin,confidence,selected_by\n";
    for (const auto& r : rows) {
        out << r.scored.region_id << ',' << r.scored.predicted_class << ','
            << csv::format_double(r.scored.log_d_S) << ',' << csv::format_double(r.scored.log_d_T)
            << ',' << csv::format_double(r.scored.pi) << ',' << csv::format_double(r.entropy) << ','
            << csv::format_double(r.margin) << ',' << csv::format_double(r.confidence) << ','
            << r.selected_by << '\n';
    }
}

}  // namespace ada
