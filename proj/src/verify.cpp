#include "ada/verify.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ada/schedule.hpp"
#include "ada/selection.hpp"

namespace ada::verify {
namespace {

std::vector<Vector> random_joint(std::mt19937_64& rng, int rows, int cols) {
    std::gamma_distribution<double> g(1.0, 1.0);
    std::vector<Vector> p(rows, Vector(cols));
    double total = 0.0;
    for (auto& row : p)
        for (auto& v : row) total += (v = g(rng) + 1e-12);
    for (auto& row : p)
        for (auto& v : row) v /= total;
    return p;
}

double normal_logpdf(double x, double mean) {
    const double d = x - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * d * d;
}

}  // namespace

CheckResult kl_chain_rule(int instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> size(1, 8);
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
        const int rows = size(rng), cols = size(rng);
        auto t = random_joint(rng, rows, cols);
        auto s = random_joint(rng, rows, cols);
        worst = std::max(worst, std::abs(verify_kl_decomposition(t, s).residual()));
    }
    std::ostringstream d;
    d << instances << " joints, max residual " << worst;
    return {"kl_chain_rule", worst <= 1e-9, d.str()};
}

CheckResult gaussian_kl(int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> target(1.0, 1.0);
    std::vector<ScoredRegion> scored(samples);
    for (int i = 0; i < samples; ++i) {
        const double z = target(rng);
        auto& r = scored[i];
        r.region_id = i;
        r.log_d_T = normal_logpdf(z, 1.0);
        r.log_d_S = normal_logpdf(z, 0.0);
        r.pi = r.log_d_T - r.log_d_S;
        r.size_px = 1;
    }
    const double kl = estimate_class_kl(scored, 0).kl_estimate;
    const double rel = std::abs(kl - 0.5) / 0.5;
    std::ostringstream d;
    d << "estimate " << kl << " vs 0.5, relative error " << rel;
    return {"gaussian_kl", rel <= 0.02, d.str()};
}

CheckResult schedule_values() {
    bool ok = true;
    ScheduleParams p;
    const double half[] = {1.0, 0.5, 0.25, 0.125, 0.0625};
    for (int n = 1; n <= 5; ++n) ok = ok && lambda_at(p, n) == half[n - 1];
    p.alpha = 0.5;
    ok = ok && lambda_at(p, 1) == 0.5;
    p.policy = SchedulePolicy::LinearDecay;
    ok = ok && std::abs(lambda_at(p, 2) - 0.8) <= 1e-12;
    p.policy = SchedulePolicy::Even;
    ok = ok && lambda_at(p, 3) == 0.5;
    p.policy = SchedulePolicy::PureDensity;
    ok = ok && lambda_at(p, 4) == 1.0;
    p.policy = SchedulePolicy::PureUncertainty;
    ok = ok && lambda_at(p, 5) == 0.0;
    auto plan = split_budget(1001, 0.125);
    ok = ok && plan.density_px == 125 && plan.uncertainty_px == 876;
    return {"schedule_values", ok, ok ? "all policies exact" : "mismatch"};
}

CheckResult budget_conservation(int instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> classes(1, 12);
    std::uniform_int_distribution<std::int64_t> budget(0, 200000);
    std::uniform_real_distribution<double> kl(-5.0, 40.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int failures = 0;
    for (int i = 0; i < instances; ++i) {
        std::vector<ClassKl> kls(classes(rng));
        for (std::size_t c = 0; c < kls.size(); ++c) {
            kls[c].class_id = static_cast<ClassId>(c);
            kls[c].kl_estimate = kl(rng);
            kls[c].estimable = unit(rng) > 0.1;
            kls[c].in_source = unit(rng) > 0.1;
        }
        const std::int64_t b = budget(rng);
        std::int64_t sum = 0;
        for (const auto& k : class_budgets(kls, b)) sum += k.budget_px;
        const auto plan = split_budget(b, unit(rng));
        if (sum != b || plan.density_px + plan.uncertainty_px != b) ++failures;
    }
    std::ostringstream d;
    d << instances << " instances, " << failures << " violations";
    return {"budget_conservation", failures == 0, d.str()};
}

std::vector<CheckResult> run_all() {
    return {kl_chain_rule(), gaussian_kl(), schedule_values(), budget_conservation()};
}

}  // namespace ada::verify
