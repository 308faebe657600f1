#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ada/density.hpp"
#include "ada/model.hpp"
#include "ada/schedule.hpp"
#include "ada/selection.hpp"
#include "ada/simulate.hpp"

namespace ada {

enum class Strategy { Random, Entropy, Margin, Confidence, DensityOnly, DensityClassBalanced, Full };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);
const std::vector<Strategy>& all_strategies();

struct ExperimentConfig {
    ShiftLayout shift = shift_bench_v1();
    int region_size = 5;

    // Budget schedule. round_budget_px is derived from budget_percent.
    double alpha = 1.0;
    double beta = 1.0;
    SchedulePolicy policy = SchedulePolicy::HalfDecay;
    int rounds = 5;
    double budget_percent = 1.0;

    Strategy strategy = Strategy::Full;
    bool class_balance = true;
    UncertaintyCriterion uncertainty = UncertaintyCriterion::Entropy;
    bool per_pixel_uncertainty = false;

    double rho = 200.0;
    BalanceParams balance{};

    ArchitectureSpec architecture{};
    TrainSpec warmup_train{0.1, 30, 32, 0};
    TrainSpec finetune_train{0.1, 15, 32, 0};

    std::vector<std::uint64_t> seeds{0};
    std::vector<std::string> compare_strategies;  // entries "Strategy" or "label=Strategy"

    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Pixels per round: round_half_up(budget_percent / 100 * total target pixels).
std::int64_t round_budget_px(double budget_percent, std::int64_t total_px);

struct RoundMetrics {
    int round = 1;
    std::int64_t labeled_px = 0;  // cumulative
    double lambda = 0.0;
    std::int64_t budget_px = 0;   // this round, including carried-over pixels
    std::int64_t density_budget_px = 0;
    std::int64_t uncertainty_budget_px = 0;
    std::vector<double> iou;
    double miou = 0.0;
    double accuracy = 0.0;
    std::vector<std::int64_t> selected_px_by_class;          // true class, all selections
    std::vector<std::int64_t> density_selected_px_by_class;  // true class, density stage only
    std::vector<RegionId> density_selected;
    std::vector<RegionId> uncertainty_selected;  // also holds Random selections
    std::vector<ClassKl> class_kl;               // empty when the density stage did not run
    std::vector<ScoreDumpRow> scores;            // filled only with RunOptions::keep_scores
};

struct ExperimentResult {
    std::string label;
    std::uint64_t seed = 0;
    double warmup_miou = 0.0;
    std::vector<RoundMetrics> rounds;
    Classifier final_model;  // parameters after the last fine-tuning round
};

/// Pools and warmed-up model shared by every strategy run on the same seed.
struct PreparedRun {
    GeneratedPools pools;
    Classifier model;
};

PreparedRun prepare_run(const ExperimentConfig& config, std::uint64_t seed);

struct RunOptions {
    bool keep_scores = false;
    std::string label;  // defaults to the strategy name
};

ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                                const RunOptions& options = {});
ExperimentResult run_prepared(const ExperimentConfig& config, std::uint64_t seed,
                              PreparedRun prepared, const RunOptions& options = {});

/// Recomputes every region's feature, predicted class and mean probabilities
/// with the current model.
void refresh_regions(DomainPool& pool, const Classifier& model);

/// Selected pixels per true class (member samples, not region majority).
std::vector<std::int64_t> selection_histogram(std::span<const RegionId> selected,
                                              const DomainPool& pool);

/// P(X >= wins) for X ~ Binomial(wins + losses, 1/2); 1 when there are no untied pairs.
double sign_test_p_value(int wins, int losses);

struct NamedConfig {
    std::string label;
    ExperimentConfig config;
};

/// Expands compare_strategies (or the config's own strategy when empty) into named configs.
std::vector<NamedConfig> comparison_grid(const ExperimentConfig& base);

struct ComparisonRow {
    std::string label;
    int round = 0;
    int seeds = 0;
    double mean_miou = 0.0;
    double std_miou = 0.0;
};

struct SignTestRow {
    std::string label_a;
    std::string label_b;
    int round = 0;
    int wins = 0;
    int losses = 0;
    int ties = 0;
    double p_value = 1.0;  // one-sided, H1: a > b
};

struct ComparisonResult {
    std::vector<std::vector<ExperimentResult>> runs;  // [config][seed]
    std::vector<ComparisonRow> summary;
    std::vector<SignTestRow> sign_tests;  // empty with a single config
};

/// Runs every config on every seed. `threads` 0 means hardware concurrency;
/// results do not depend on the thread count.
ComparisonResult run_comparison(const std::vector<NamedConfig>& configs,
                                const std::vector<std::uint64_t>& seeds, unsigned threads = 1);

/// ADA_SELECT_THREADS, 0 or unset meaning hardware concurrency.
unsigned worker_threads_from_env();

// CSV emission.
void write_results_csv(std::ostream& out, const std::vector<ExperimentResult>& results,
                       int class_count);
void write_histogram_csv(std::ostream& out, const std::vector<ExperimentResult>& results);
void write_comparison_csv(std::ostream& out, const ComparisonResult& result);
void write_sign_test_csv(std::ostream& out, const ComparisonResult& result);

}  // namespace ada
