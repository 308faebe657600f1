#include "ada/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "ada/csv.hpp"

namespace ada {
namespace {

struct StrategyPlan {
    bool random = false;
    bool fixed_lambda = false;
    double lambda = 0.0;
    bool class_balance = false;
    UncertaintyCriterion criterion = UncertaintyCriterion::Entropy;
};

StrategyPlan plan_for(const ExperimentConfig& c) {
    StrategyPlan p;
    p.criterion = c.uncertainty;
    switch (c.strategy) {
        case Strategy::Random: p.random = true; break;
        case Strategy::Entropy:
            p.fixed_lambda = true;
            p.criterion = UncertaintyCriterion::Entropy;
            break;
        case Strategy::Margin:
            p.fixed_lambda = true;
            p.criterion = UncertaintyCriterion::Margin;
            break;
        case Strategy::Confidence:
            p.fixed_lambda = true;
            p.criterion = UncertaintyCriterion::Confidence;
            break;
        case Strategy::DensityOnly:
            p.fixed_lambda = true;
            p.lambda = 1.0;
            break;
        case Strategy::DensityClassBalanced:
            p.fixed_lambda = true;
            p.lambda = 1.0;
            p.class_balance = true;
            break;
        case Strategy::Full: p.class_balance = c.class_balance; break;
    }
    return p;
}

// Seed salts; every random stream of a run derives from the run seed.
constexpr std::uint64_t kWarmupSalt = 1;
constexpr std::uint64_t kRandomSalt = 1000;
constexpr std::uint64_t kFinetuneSalt = 2000;
constexpr std::uint64_t kDensitySalt = 3000;

bool same_preparation(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.shift == b.shift && a.region_size == b.region_size &&
           a.architecture == b.architecture && a.warmup_train == b.warmup_train;
}

}  // namespace

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Random: return "Random";
        case Strategy::Entropy: return "Entropy";
        case Strategy::Margin: return "Margin";
        case Strategy::Confidence: return "Confidence";
        case Strategy::DensityOnly: return "DensityOnly";
        case Strategy::DensityClassBalanced: return "DensityClassBalanced";
        case Strategy::Full: return "Full";
    }
    return "Full";
}

const std::vector<Strategy>& all_strategies() {
    static const std::vector<Strategy> all{Strategy::Random,      Strategy::Entropy,
                                           Strategy::Margin,      Strategy::Confidence,
                                           Strategy::DensityOnly, Strategy::DensityClassBalanced,
                                           Strategy::Full};
    return all;
}

Strategy parse_strategy(std::string_view name) {
    for (Strategy s : all_strategies())
        if (to_string(s) == name) return s;
    throw InvalidInput("unknown strategy '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
    shift.validate();
    if (region_size < 1) throw InvalidInput("region_size must be >= 1");
    ScheduleParams{alpha, beta, policy, rounds, 0}.validate();
    if (!(budget_percent >= 0.0 && budget_percent <= 100.0))
        throw InvalidInput("schedule.budget_percent must lie in [0, 100]");
    if (!(rho > 0.0)) throw InvalidInput("density.rho must be positive");
    if (!(balance.kappa >= 0.0)) throw InvalidInput("selection.kappa must be >= 0");
    if (!(balance.epsilon_w >= 0.0)) throw InvalidInput("selection.epsilon_w must be >= 0");
    if (balance.kappa + balance.epsilon_w <= 0.0)
        throw InvalidInput("selection.kappa + selection.epsilon_w must be positive");
    if (architecture.kind == Architecture::OneHidden && architecture.hidden_units < 1)
        throw InvalidInput("model.hidden_units must be >= 1");
    warmup_train.validate();
    finetune_train.validate();
    if (seeds.empty()) throw InvalidInput("seeds must not be empty");
    for (const auto& entry : compare_strategies) {
        const auto eq = entry.find('=');
        const std::string strategy = eq == std::string::npos ? entry : entry.substr(eq + 1);
        parse_strategy(strategy);
        if (eq == 0) throw InvalidInput("compare.strategies: empty label in '" + entry + "'");
    }
}

std::int64_t round_budget_px(double budget_percent, std::int64_t total_px) {
    return static_cast<std::int64_t>(
        std::floor(budget_percent / 100.0 * static_cast<double>(total_px) + 0.5));
}

void refresh_regions(DomainPool& pool, const Classifier& model) {
    std::vector<Vector> feats, probs;
    for (auto& r : pool.regions()) {
        feats.clear();
        probs.clear();
        for (SampleId sid : r.sample_ids) {
            const auto& x = pool.sample(sid).feature;
            feats.push_back(model.extract_feature(x));
            probs.push_back(model.predict_proba(x));
        }
        auto agg = aggregate_region(feats, probs);
        r.feature_z = std::move(agg.feature_z);
        r.predicted_class = agg.predicted_class;
        r.mean_probs = std::move(agg.mean_probs);
    }
}

std::vector<std::int64_t> selection_histogram(std::span<const RegionId> selected,
                                              const DomainPool& pool) {
    std::vector<std::int64_t> hist(pool.class_count(), 0);
    for (RegionId id : selected)
        for (SampleId sid : pool.region(id).sample_ids) ++hist[pool.sample(sid).true_class];
    return hist;
}

PreparedRun prepare_run(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    PreparedRun prep{generate(make_shift_spec(config.shift, config.region_size, seed)), {}};
    TrainSpec spec = config.warmup_train;
    spec.seed = mix_seed(seed, kWarmupSalt);
    prep.model = warmup(prep.pools.source, config.architecture, spec);
    return prep;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                                const RunOptions& options) {
    return run_prepared(config, seed, prepare_run(config, seed), options);
}

ExperimentResult run_prepared(const ExperimentConfig& config, std::uint64_t seed,
                              PreparedRun prepared, const RunOptions& options) {
    config.validate();
    const StrategyPlan plan = plan_for(config);
    DomainPool& source = prepared.pools.source;
    DomainPool& target = prepared.pools.target_train;
    const DomainPool& eval_pool = prepared.pools.target_eval;
    Classifier& model = prepared.model;
    const int class_count = target.class_count();

    ScheduleParams schedule{config.alpha, config.beta, config.policy, config.rounds,
                            round_budget_px(config.budget_percent, target.total_px())};

    ExperimentResult result;
    result.label = options.label.empty() ? std::string(to_string(config.strategy)) : options.label;
    result.seed = seed;
    result.warmup_miou = evaluate(model, eval_pool).miou;

    std::int64_t carry = 0;
    for (int n = 1; n <= config.rounds; ++n) {
        RoundMetrics m;
        m.round = n;
        refresh_regions(source, model);
        refresh_regions(target, model);

        const double lambda = plan.random ? 0.0 : plan.fixed_lambda ? plan.lambda : lambda_at(schedule, n);
        const std::int64_t budget = schedule.round_budget_px + carry;
        const BudgetPlan split = split_budget(budget, lambda);
        m.lambda = lambda;
        m.budget_px = budget;
        m.density_budget_px = plan.random ? 0 : split.density_px;
        m.uncertainty_budget_px = plan.random ? budget : split.uncertainty_px;

        std::vector<ScoredRegion> scored;
        std::int64_t density_used = 0;
        if (!plan.random && m.density_budget_px > 0) {
            const auto src_est = build_estimators(source.regions(), Domain::Source, config.rho,
                                                  mix_seed(seed, kDensitySalt + 2 * n));
            const auto trg_est = build_estimators(target.regions(), Domain::Target, config.rho,
                                                  mix_seed(seed, kDensitySalt + 2 * n + 1));
            scored = score_regions(target.regions(), src_est, trg_est);
            auto kls = estimate_all_class_kl(scored, class_count, src_est);
            kls = plan.class_balance ? class_budgets(std::move(kls), m.density_budget_px, config.balance)
                                     : equal_budgets(std::move(kls), m.density_budget_px);
            m.density_selected = select_density(scored, kls);
            m.class_kl = std::move(kls);
            for (RegionId id : m.density_selected) density_used += target.region(id).size_px;
        }

        const std::unordered_set<RegionId> taken(m.density_selected.begin(), m.density_selected.end());
        std::vector<UncertaintyCandidate> candidates;
        std::vector<Vector> member_probs;
        for (const auto& r : target.regions()) {
            if (r.label_state != LabelState::Unlabeled || taken.contains(r.id)) continue;
            double score = 0.0;
            if (config.per_pixel_uncertainty) {
                member_probs.clear();
                for (SampleId sid : r.sample_ids)
                    member_probs.push_back(model.predict_proba(target.sample(sid).feature));
                score = per_pixel_uncertainty_score(member_probs, plan.criterion);
            } else {
                score = uncertainty_score(r.mean_probs, plan.criterion);
            }
            candidates.push_back({r.id, score, r.size_px});
        }
        if (plan.random) {
            m.uncertainty_selected = select_random(candidates, budget, mix_seed(seed, kRandomSalt + n));
        } else if (lambda < 1.0) {
            // Pixels the density stage could not place go to the uncertainty stage.
            const std::int64_t u_budget = m.uncertainty_budget_px + (m.density_budget_px - density_used);
            m.uncertainty_selected = select_uncertainty(candidates, u_budget, plan.criterion);
        }

        if (options.keep_scores) {
            std::unordered_map<RegionId, ScoredRegion> by_id;
            for (const auto& s : scored) by_id.emplace(s.region_id, s);
            const std::unordered_set<RegionId> unc(m.uncertainty_selected.begin(),
                                                   m.uncertainty_selected.end());
            for (const auto& r : target.regions()) {
                if (r.label_state != LabelState::Unlabeled) continue;
                ScoreDumpRow row;
                if (auto it = by_id.find(r.id); it != by_id.end()) {
                    row.scored = it->second;
                } else {
                    row.scored.region_id = r.id;
                    row.scored.predicted_class = r.predicted_class;
                    row.scored.size_px = r.size_px;
                }
                row.entropy = entropy_score(r.mean_probs);
                row.margin = margin_score(r.mean_probs);
                row.confidence = confidence_score(r.mean_probs);
                if (taken.contains(r.id)) row.selected_by = "density";
                else if (unc.contains(r.id)) row.selected_by = plan.random ? "random" : "uncertainty";
                m.scores.push_back(std::move(row));
            }
        }

        std::vector<RegionId> all = m.density_selected;
        all.insert(all.end(), m.uncertainty_selected.begin(), m.uncertainty_selected.end());
        m.selected_px_by_class = selection_histogram(all, target);
        m.density_selected_px_by_class = selection_histogram(m.density_selected, target);
        const std::int64_t acquired = [&] {
            std::int64_t px = 0;
            for (const auto& labels : oracle_label(target, all)) px += static_cast<std::int64_t>(labels.size());
            return px;
        }();
        carry = budget - acquired;

        TrainSpec ft = config.finetune_train;
        ft.seed = mix_seed(seed, kFinetuneSalt + n);
        finetune(model, source, target, ft);

        const EvalMetrics eval = evaluate(model, eval_pool);
        m.labeled_px = target.labeled_px();
        m.iou = eval.iou;
        m.miou = eval.miou;
        m.accuracy = eval.accuracy;
        result.rounds.push_back(std::move(m));
    }
    result.final_model = std::move(model);
    return result;
}

double sign_test_p_value(int wins, int losses) {
    const int n = wins + losses;
    if (n == 0) return 1.0;
    double p = 0.0;
    for (int k = wins; k <= n; ++k) {
        const double log_term = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                                std::lgamma(n - k + 1.0) - n * std::log(2.0);
        p += std::exp(log_term);
    }
    return std::min(p, 1.0);
}

std::vector<NamedConfig> comparison_grid(const ExperimentConfig& base) {
    std::vector<NamedConfig> out;
    if (base.compare_strategies.empty()) {
        out.push_back({std::string(to_string(base.strategy)), base});
        return out;
    }
    for (const auto& entry : base.compare_strategies) {
        const auto eq = entry.find('=');
        NamedConfig nc{entry, base};
        if (eq != std::string::npos) {
            nc.label = entry.substr(0, eq);
            nc.config.strategy = parse_strategy(entry.substr(eq + 1));
        } else {
            nc.config.strategy = parse_strategy(entry);
        }
        for (const auto& existing : out)
            if (existing.label == nc.label)
                throw InvalidInput("compare.strategies: duplicate label '" + nc.label + "'");
        out.push_back(std::move(nc));
    }
    return out;
}

unsigned worker_threads_from_env() {
    const char* env = std::getenv("ADA_SELECT_THREADS");
    unsigned n = 0;
    if (env != nullptr && *env != '\0') {
        try {
            n = static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
            throw InvalidInput("ADA_SELECT_THREADS must be a non-negative integer");
        }
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

ComparisonResult run_comparison(const std::vector<NamedConfig>& configs,
                                const std::vector<std::uint64_t>& seeds, unsigned threads) {
    if (configs.empty()) throw InvalidInput("run_comparison: no configurations");
    if (seeds.empty()) throw InvalidInput("run_comparison: no seeds");
    for (const auto& c : configs) c.config.validate();
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

    ComparisonResult result;
    result.runs.assign(configs.size(), std::vector<ExperimentResult>(seeds.size()));

    // Configs sharing generation and warm-up settings reuse one prepared run per seed.
    std::vector<std::size_t> prep_group(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) {
        prep_group[i] = i;
        for (std::size_t j = 0; j < i; ++j)
            if (same_preparation(configs[i].config, configs[j].config)) {
                prep_group[i] = prep_group[j];
                break;
            }
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t s = next++; s < seeds.size(); s = next++) {
            try {
                std::map<std::size_t, PreparedRun> prepared;
                for (std::size_t i = 0; i < configs.size(); ++i) {
                    const std::size_t g = prep_group[i];
                    if (!prepared.contains(g)) prepared.emplace(g, prepare_run(configs[g].config, seeds[s]));
                    RunOptions opt;
                    opt.label = configs[i].label;
                    result.runs[i][s] = run_prepared(configs[i].config, seeds[s], prepared.at(g), opt);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const unsigned n_workers = std::min<unsigned>(threads, static_cast<unsigned>(seeds.size()));
        for (unsigned t = 1; t < n_workers; ++t) pool.emplace_back(worker);
        worker();
    }
    if (failure) std::rethrow_exception(failure);

    const int rounds = static_cast<int>(result.runs[0][0].rounds.size());
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const int cfg_rounds = static_cast<int>(result.runs[i][0].rounds.size());
        for (int r = 0; r < cfg_rounds; ++r) {
            ComparisonRow row;
            row.label = configs[i].label;
            row.round = r + 1;
            row.seeds = static_cast<int>(seeds.size());
            double sum = 0.0;
            for (const auto& run : result.runs[i]) sum += run.rounds[r].miou;
            row.mean_miou = sum / row.seeds;
            double ss = 0.0;
            for (const auto& run : result.runs[i]) {
                const double d = run.rounds[r].miou - row.mean_miou;
                ss += d * d;
            }
            row.std_miou = row.seeds > 1 ? std::sqrt(ss / (row.seeds - 1)) : 0.0;
            result.summary.push_back(row);
        }
    }
    for (std::size_t a = 0; a < configs.size(); ++a) {
        for (std::size_t b = 0; b < configs.size(); ++b) {
            if (a == b) continue;
            const int common = std::min<int>({rounds, static_cast<int>(result.runs[a][0].rounds.size()),
                                              static_cast<int>(result.runs[b][0].rounds.size())});
            for (int r = 0; r < common; ++r) {
                SignTestRow row;
                row.label_a = configs[a].label;
                row.label_b = configs[b].label;
                row.round = r + 1;
                for (std::size_t s = 0; s < seeds.size(); ++s) {
                    const double x = result.runs[a][s].rounds[r].miou;
                    const double y = result.runs[b][s].rounds[r].miou;
                    if (x > y) ++row.wins;
                    else if (x < y) ++row.losses;
                    else ++row.ties;
                }
                row.p_value = sign_test_p_value(row.wins, row.losses);
                result.sign_tests.push_back(row);
            }
        }
    }
    return result;
}

void write_results_csv(std::ostream& out, const std::vector<ExperimentResult>& results,
                       int class_count) {
    out << "strategy,seed,round,labeled_px,lambda,miou,acc";
    for (int c = 0; c < class_count; ++c) out << ",iou_c" << c;
    out << '\n';
    for (const auto& res : results) {
        for (const auto& m : res.rounds) {
            out << res.label << ',' << res.seed << ',' << m.round << ',' << m.labeled_px << ','
                << csv::format_double(m.lambda) << ',' << csv::format_double(m.miou) << ','
                << csv::format_double(m.accuracy);
            for (int c = 0; c < class_count; ++c)
                out << ',' << (c < static_cast<int>(m.iou.size()) ? csv::format_double(m.iou[c]) : "nan");
            out << '\n';
        }
    }
    if (!out) throw IoError("failed writing results CSV");
}

void write_histogram_csv(std::ostream& out, const std::vector<ExperimentResult>& results) {
    out << "strategy,seed,round,class,selected_px\n";
    for (const auto& res : results)
        for (const auto& m : res.rounds)
            for (std::size_t c = 0; c < m.selected_px_by_class.size(); ++c)
                out << res.label << ',' << res.seed << ',' << m.round << ',' << c << ','
                    << m.selected_px_by_class[c] << '\n';
    if (!out) throw IoError("failed writing histogram CSV");
}

void write_comparison_csv(std::ostream& out, const ComparisonResult& result) {
    out << "strategy,round,seeds,mean_miou,std_miou\n";
    for (const auto& row : result.summary)
        out << row.label << ',' << row.round << ',' << row.seeds << ','
            << csv::format_double(row.mean_miou) << ',' << csv::format_double(row.std_miou) << '\n';
    if (!out) throw IoError("failed writing comparison CSV");
}

void write_sign_test_csv(std::ostream& out, const ComparisonResult& result) {
    out << "strategy_a,strategy_b,round,wins,losses,ties,p_value\n";
    for (const auto& row : result.sign_tests)
        out << row.label_a << ',' << row.label_b << ',' << row.round << ',' << row.wins << ','
            << row.losses << ',' << row.ties << ',' << csv::format_double(row.p_value) << '\n';
    if (!out) throw IoError("failed writing sign-test CSV");
}

}  // namespace ada
