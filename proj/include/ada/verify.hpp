#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ada::verify {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Chain rule of KL on random discrete joints up to 8 x 8.
CheckResult kl_chain_rule(int instances = 100, std::uint64_t seed = 1);
/// Mean log-ratio over N(1,1) draws against the closed-form KL 0.5.
CheckResult gaussian_kl(int samples = 100000, std::uint64_t seed = 1);
/// HalfDecay, LinearDecay and constant policies against their exact values.
CheckResult schedule_values();
/// Class budgets and density/uncertainty splits sum to their totals.
CheckResult budget_conservation(int instances = 1000, std::uint64_t seed = 1);

std::vector<CheckResult> run_all();

}  // namespace ada::verify
