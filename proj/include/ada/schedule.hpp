#pragma once

#include <cstdint>
#include <string_view>

namespace ada {

enum class SchedulePolicy { HalfDecay, PureDensity, PureUncertainty, Even, LinearDecay };

std::string_view to_string(SchedulePolicy p);
SchedulePolicy parse_schedule_policy(std::string_view name);

struct ScheduleParams {
    double alpha = 1.0;
    double beta = 1.0;
    SchedulePolicy policy = SchedulePolicy::HalfDecay;
    int rounds = 5;
    std::int64_t round_budget_px = 0;

    void validate() const;
};

struct BudgetPlan {
    int round = 1;  // 1-based
    double lambda = 1.0;
    std::int64_t density_px = 0;
    std::int64_t uncertainty_px = 0;
};

/// Density share for round `n` (1-based).
double lambda_at(const ScheduleParams& params, int n);

/// density = round_half_up(lambda * B), uncertainty = B - density.
BudgetPlan split_budget(std::int64_t budget_px, double lambda);

BudgetPlan plan_round(const ScheduleParams& params, int n);

}  // namespace ada
