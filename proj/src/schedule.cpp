#include "ada/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ada/common.hpp"

namespace ada {

std::string_view to_string(SchedulePolicy p) {
    switch (p) {
        case SchedulePolicy::HalfDecay: return "HalfDecay";
        case SchedulePolicy::PureDensity: return "PureDensity";
        case SchedulePolicy::PureUncertainty: return "PureUncertainty";
        case SchedulePolicy::Even: return "Even";
        case SchedulePolicy::LinearDecay: return "LinearDecay";
    }
    return "HalfDecay";
}

SchedulePolicy parse_schedule_policy(std::string_view name) {
    for (auto p : {SchedulePolicy::HalfDecay, SchedulePolicy::PureDensity,
                   SchedulePolicy::PureUncertainty, SchedulePolicy::Even,
                   SchedulePolicy::LinearDecay})
        if (to_string(p) == name) return p;
    throw InvalidInput("unknown schedule policy '" + std::string(name) + "'");
}

void ScheduleParams::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("schedule.alpha must lie in [0, 1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidInput("schedule.beta must be >= 0");
    if (rounds < 1) throw InvalidInput("schedule.rounds must be >= 1");
    if (round_budget_px < 0) throw InvalidInput("round budget must be >= 0");
}

double lambda_at(const ScheduleParams& params, int n) {
    if (n < 1 || n > params.rounds)
        throw InvalidInput("lambda_at: round " + std::to_string(n) + " outside [1, " +
                           std::to_string(params.rounds) + "]");
    switch (params.policy) {
        case SchedulePolicy::HalfDecay:
            return params.alpha * std::exp2(-params.beta * static_cast<double>(n - 1));
        case SchedulePolicy::PureDensity: return 1.0;
        case SchedulePolicy::PureUncertainty: return 0.0;
        case SchedulePolicy::Even: return 0.5;
        case SchedulePolicy::LinearDecay:
            return std::clamp(1.0 - 0.2 * static_cast<double>(n - 1), 0.0, 1.0);
    }
    throw InternalError("unhandled schedule policy");
}

BudgetPlan split_budget(std::int64_t budget_px, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("split_budget: lambda outside [0, 1]");
    if (budget_px < 0) throw InvalidInput("split_budget: negative budget");
    BudgetPlan plan;
    plan.lambda = lambda;
    plan.density_px = static_cast<std::int64_t>(std::floor(lambda * static_cast<double>(budget_px) + 0.5));
    plan.density_px = std::min(plan.density_px, budget_px);
    plan.uncertainty_px = budget_px - plan.density_px;
    return plan;
}

BudgetPlan plan_round(const ScheduleParams& params, int n) {
    BudgetPlan plan = split_budget(params.round_budget_px, lambda_at(params, n));
    plan.round = n;
    return plan;
}

}  // namespace ada
