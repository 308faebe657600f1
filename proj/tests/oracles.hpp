#pragma once

// Reference computations used only by the tests. They restate each rule in
// its most literal form (exhaustive enumeration, direct summation) so they
// share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <set>
#include <vector>

#include "ada/selection.hpp"

namespace oracle {

inline double normal_pdf(double x, double mean, double var) {
    return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Among all subsets of `items` whose total size fits `budget`, the one whose
// membership vector, read in ranking order, is lexicographically greatest.
// Items must already be in ranking order.
struct Item {
    std::int64_t id;
    std::int64_t size;
};

inline std::vector<std::int64_t> lexmax_feasible(const std::vector<Item>& items, std::int64_t budget) {
    const std::size_t n = items.size();
    std::uint64_t best_mask = 0;
    bool found = false;
    auto key = [&](std::uint64_t mask) {
        // Bit i of mask corresponds to rank i; rank 0 must dominate.
        std::uint64_t k = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) k |= std::uint64_t{1} << (n - 1 - i);
        return k;
    };
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        std::int64_t total = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) total += items[i].size;
        if (total > budget) continue;
        if (!found || key(mask) > key(best_mask)) {
            best_mask = mask;
            found = true;
        }
    }
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (best_mask >> i & 1) out.push_back(items[i].id);
    return out;
}

inline std::vector<Item> ranked_by_pi(std::vector<ada::ScoredRegion> regions) {
    std::sort(regions.begin(), regions.end(), [](const auto& a, const auto& b) {
        return a.pi != b.pi ? a.pi > b.pi : a.region_id < b.region_id;
    });
    std::vector<Item> items;
    for (const auto& r : regions) items.push_back({r.region_id, r.size_px});
    return items;
}

// Per-class top-ranked feasible sets followed by a pooled refill.
inline std::set<std::int64_t> density_selection(const std::vector<ada::ScoredRegion>& scored,
                                                const std::vector<ada::ClassKl>& budgets) {
    std::set<std::int64_t> chosen;
    std::int64_t leftover = 0;
    std::map<std::int64_t, std::int64_t> size_of;
    for (const auto& s : scored) size_of[s.region_id] = s.size_px;
    for (const auto& b : budgets) {
        std::vector<ada::ScoredRegion> mine;
        for (const auto& s : scored)
            if (s.predicted_class == b.class_id) mine.push_back(s);
        std::int64_t used = 0;
        for (auto id : lexmax_feasible(ranked_by_pi(mine), b.budget_px)) {
            chosen.insert(id);
            used += size_of[id];
        }
        leftover += b.budget_px - used;
    }
    std::vector<ada::ScoredRegion> rest;
    for (const auto& s : scored)
        if (!chosen.contains(s.region_id)) rest.push_back(s);
    for (auto id : lexmax_feasible(ranked_by_pi(rest), leftover)) chosen.insert(id);
    return chosen;
}

inline std::set<std::int64_t> uncertainty_selection(std::vector<ada::UncertaintyCandidate> cands,
                                                    std::int64_t budget, bool descending) {
    std::sort(cands.begin(), cands.end(), [&](const auto& a, const auto& b) {
        if (a.score != b.score) return descending ? a.score > b.score : a.score < b.score;
        return a.region_id < b.region_id;
    });
    std::vector<Item> items;
    for (const auto& c : cands) items.push_back({c.region_id, c.size_px});
    auto ids = lexmax_feasible(items, budget);
    return {ids.begin(), ids.end()};
}

// KL(p || q) for discrete tables by direct summation.
inline double kl_table(const std::vector<std::vector<double>>& p, const std::vector<std::vector<double>>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p[i].size(); ++j)
            if (p[i][j] > 0.0) s += p[i][j] * std::log(p[i][j] / q[i][j]);
    return s;
}

// Largest-remainder apportionment written out as: floor every share, then
// hand the missing units one at a time to the largest fractional part
// (fractions compared at 1e-9 resolution, first index wins a tie).
inline std::vector<std::int64_t> apportion(const std::vector<double>& weights, std::int64_t total) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    std::vector<std::int64_t> out(weights.size());
    std::vector<double> frac(weights.size());
    std::int64_t given = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double share = static_cast<double>(total) * weights[i] / sum;
        out[i] = static_cast<std::int64_t>(std::floor(share));
        frac[i] = std::round((share - std::floor(share)) * 1e9);
        given += out[i];
    }
    std::vector<bool> used(weights.size(), false);
    while (given < total) {
        std::size_t best = weights.size();
        for (std::size_t i = 0; i < weights.size(); ++i)
            if (!used[i] && (best == weights.size() || frac[i] > frac[best])) best = i;
        used[best] = true;
        ++out[best];
        ++given;
    }
    return out;
}

}  // namespace oracle
