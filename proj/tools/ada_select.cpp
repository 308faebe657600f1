#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ada/config.hpp"
#include "ada/harness.hpp"
#include "ada/verify.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitVerifyFail = 1;
constexpr int kExitIo = 5;

struct Options {
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::uint64_t> seeds;
    int verbosity = 0;
    bool dump_scores = false;
    bool checkpoint = false;
};

void progress(const Options& opt, int level, const std::string& msg) {
    if (opt.verbosity >= level) std::cerr << msg << '\n';
}

ada::ExperimentConfig load(const Options& opt) {
    ada::ExperimentConfig cfg =
        opt.config_path.empty() ? ada::ExperimentConfig{} : ada::parse_config(opt.config_path);
    if (!opt.seeds.empty()) cfg.seeds = opt.seeds;
    return cfg;
}

fs::path prepare_out(const Options& opt) {
    fs::path dir(opt.out_dir);
    fs::create_directories(dir);
    return dir;
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ada::IoError("cannot open " + path.string() + " for writing");
    body(out);
    out.flush();
    if (!out) throw ada::IoError("failed writing " + path.string());
}

void echo_config(const fs::path& dir, const ada::ExperimentConfig& cfg) {
    write_file(dir / "config.toml", [&](std::ostream& o) { o << ada::serialize_config(cfg); });
}

int cmd_gen_data(const Options& opt) {
    const auto cfg = load(opt);
    const auto dir = prepare_out(opt);
    echo_config(dir, cfg);
    const std::uint64_t seed = cfg.seeds.front();
    progress(opt, 0, "generating pools for seed " + std::to_string(seed));
    const auto pools = ada::generate(ada::make_shift_spec(cfg.shift, cfg.region_size, seed));
    write_file(dir / "source.csv", [&](std::ostream& o) { ada::write_pool_csv(o, pools.source); });
    write_file(dir / "target_train.csv",
               [&](std::ostream& o) { ada::write_pool_csv(o, pools.target_train); });
    write_file(dir / "target_eval.csv",
               [&](std::ostream& o) { ada::write_pool_csv(o, pools.target_eval); });
    return 0;
}

int cmd_run(const Options& opt) {
    const auto cfg = load(opt);
    const auto dir = prepare_out(opt);
    echo_config(dir, cfg);
    std::vector<ada::ExperimentResult> results;
    for (auto seed : cfg.seeds) {
        progress(opt, 0, "run " + std::string(ada::to_string(cfg.strategy)) + " seed " + std::to_string(seed));
        ada::RunOptions ro;
        ro.keep_scores = opt.dump_scores;
        auto r = ada::run_experiment(cfg, seed, ro);
        for (const auto& m : r.rounds)
            progress(opt, 1, "  round " + std::to_string(m.round) + " labeled_px " +
                                 std::to_string(m.labeled_px) + " miou " + std::to_string(m.miou));
        if (opt.dump_scores) {
            for (const auto& m : r.rounds) {
                const auto name = "scores_seed" + std::to_string(seed) + "_round" + std::to_string(m.round) + ".csv";
                write_file(dir / name, [&](std::ostream& o) { ada::write_score_dump(o, m.scores); });
            }
            for (auto& m : r.rounds) m.scores.clear();
        }
        if (opt.checkpoint) {
            write_file(dir / ("model_seed" + std::to_string(seed) + ".bin"),
                       [&](std::ostream& o) { ada::save_checkpoint(o, r.final_model); });
        }
        results.push_back(std::move(r));
    }
    write_file(dir / "results.csv",
               [&](std::ostream& o) { ada::write_results_csv(o, results, cfg.shift.class_count); });
    write_file(dir / "histogram.csv", [&](std::ostream& o) { ada::write_histogram_csv(o, results); });
    return 0;
}

int cmd_compare(const Options& opt) {
    const auto cfg = load(opt);
    const auto dir = prepare_out(opt);
    echo_config(dir, cfg);
    const auto grid = ada::comparison_grid(cfg);
    const unsigned threads = ada::worker_threads_from_env();
    progress(opt, 0, "compare " + std::to_string(grid.size()) + " strategies over " +
                         std::to_string(cfg.seeds.size()) + " seeds on " + std::to_string(threads) + " threads");
    const auto result = ada::run_comparison(grid, cfg.seeds, threads);
    std::vector<ada::ExperimentResult> flat;
    for (const auto& per_config : result.runs)
        for (const auto& r : per_config) flat.push_back(r);
    write_file(dir / "results.csv",
               [&](std::ostream& o) { ada::write_results_csv(o, flat, cfg.shift.class_count); });
    write_file(dir / "histogram.csv", [&](std::ostream& o) { ada::write_histogram_csv(o, flat); });
    write_file(dir / "comparison.csv", [&](std::ostream& o) { ada::write_comparison_csv(o, result); });
    if (!result.sign_tests.empty())
        write_file(dir / "sign_tests.csv", [&](std::ostream& o) { ada::write_sign_test_csv(o, result); });
    return 0;
}

int cmd_verify(const Options& opt) {
    bool all = true;
    const auto checks = ada::verify::run_all();
    for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        all = all && c.passed;
    }
    if (opt.out_dir != ".") {
        const auto dir = prepare_out(opt);
        write_file(dir / "verify.csv", [&](std::ostream& o) {
            o << "check,status,detail\n";
            for (const auto& c : checks) o << c.name << ',' << (c.passed ? "PASS" : "FAIL") << ",\"" << c.detail << "\"\n";
        });
    }
    return all ? 0 : kExitVerifyFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Density-aware active domain adaptation selection simulator"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config)
            sub->add_option("-c,--config", opt.config_path, "TOML experiment config (defaults apply when omitted)");
        sub->add_option("-o,--out", opt.out_dir, "Output directory, created if missing")->capture_default_str();
        sub->add_flag_function(
            "-v,--verbose", [&](std::int64_t n) { opt.verbosity = static_cast<int>(n); },
            "Progress detail on stderr; repeat for more");
    };

    auto* gen = app.add_subcommand("gen-data", "Write source, target-train and target-eval pool CSVs");
    add_common(gen, true);
    gen->add_option("-s,--seed", opt.seeds, "Seed override (first value is used)");

    auto* run = app.add_subcommand("run", "Run the configured strategy and write results.csv and histogram.csv");
    add_common(run, true);
    run->add_option("-s,--seed", opt.seeds, "Seed override, repeatable; replaces the config's seed list");
    run->add_flag("--dump-scores", opt.dump_scores, "Write per-round region score CSVs");
    run->add_flag("--checkpoint", opt.checkpoint, "Write the final model of each seed as model_seed<S>.bin");

    auto* cmp = app.add_subcommand("compare", "Run compare.strategies over all seeds and write summary tables");
    add_common(cmp, true);
    cmp->add_option("-s,--seed", opt.seeds, "Seed override, repeatable; replaces the config's seed list");

    auto* ver = app.add_subcommand("verify", "Run the built-in numerical checks; exit 1 on any FAIL");
    add_common(ver, false);

    app.footer(
        "Exit codes: 0 success, 1 verify failure, 2 missing config, 3 config parse error or unknown key,\n"
        "4 config constraint violation, 5 I/O failure. ADA_SELECT_THREADS bounds compare workers (0 = auto).");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_gen_data(opt);
        if (*run) return cmd_run(opt);
        if (*cmp) return cmd_compare(opt);
        return cmd_verify(opt);
    } catch (const ada::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const ada::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitVerifyFail;
    }
}
