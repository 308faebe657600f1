#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ada/config.hpp"
#include "ada/model.hpp"
#include "ada/pool.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::current_path() / "cli_work";

int run_cli(const std::string& args, const std::string& stdout_file = "/dev/null") {
    const std::string cmd = std::string(ADA_SELECT_EXE) + " " + args + " > " + stdout_file + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(kWork);
    const auto path = kWork / name;
    std::ofstream(path) << text;
    return path;
}

const char* kSmall = R"(
[schedule]
rounds = 2
[model.warmup]
epochs = 5
[model.finetune]
epochs = 2
[shift]
samples_per_domain = 600
)";

}  // namespace

TEST_CASE("verify passes on a correct build") {
    fs::create_directories(kWork);
    const auto out = kWork / "verify.txt";
    CHECK(run_cli("verify", out.string()) == 0);
    const auto text = slurp(out);
    CHECK(text.find("PASS kl_chain_rule") != std::string::npos);
    CHECK(text.find("PASS gaussian_kl") != std::string::npos);
    CHECK(text.find("PASS schedule_values") != std::string::npos);
    CHECK(text.find("PASS budget_conservation") != std::string::npos);
    CHECK(text.find("FAIL") == std::string::npos);
}

TEST_CASE("run is byte-identical across invocations and echoes its config") {
    const auto cfg = write_config("small.toml", kSmall);
    const auto a = kWork / "run_a", b = kWork / "run_b";
    const auto out = kWork / "run_stdout.txt";
    REQUIRE(run_cli("run --config " + cfg.string() + " --seed 7 --out " + a.string(), out.string()) == 0);
    REQUIRE(run_cli("run --config " + cfg.string() + " --seed 7 --out " + b.string()) == 0);
    CHECK(slurp(out).empty());
    REQUIRE(fs::file_size(a / "results.csv") > 0);
    CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
    CHECK(slurp(a / "histogram.csv") == slurp(b / "histogram.csv"));
    auto echoed = ada::parse_config(a / "config.toml");
    auto expected = ada::parse_config(cfg);
    expected.seeds = {7};
    CHECK(echoed == expected);
}

TEST_CASE("run writes score dumps and checkpoints on request") {
    const auto cfg = write_config("small.toml", kSmall);
    const auto dir = kWork / "run_extra";
    REQUIRE(run_cli("run -c " + cfg.string() + " -s 3 -o " + dir.string() + " --dump-scores --checkpoint") == 0);
    const auto scores = slurp(dir / "scores_seed3_round1.csv");
    CHECK(scores.rfind("region_id,class,log_dS,log_dT,pi,entropy,margin,confidence,selected_by\n", 0) == 0);
    CHECK(fs::exists(dir / "scores_seed3_round2.csv"));
    std::ifstream in(dir / "model_seed3.bin", std::ios::binary);
    auto model = ada::load_checkpoint(in);
    CHECK(model.feature_dim() == 8);
    CHECK(model.class_count() == 6);
}

TEST_CASE("compare with one strategy has no p-values") {
    const auto cfg = write_config("single.toml", std::string("seeds = [0, 1]\n") + kSmall);
    const auto dir = kWork / "compare_one";
    REQUIRE(run_cli("compare --config " + cfg.string() + " --out " + dir.string()) == 0);
    const auto table = slurp(dir / "comparison.csv");
    CHECK(table.rfind("strategy,round,seeds,mean_miou,std_miou\nFull,1,2,", 0) == 0);
    CHECK_FALSE(fs::exists(dir / "sign_tests.csv"));
}

TEST_CASE("compare with two strategies emits sign tests") {
    const auto cfg = write_config("pair.toml", std::string("seeds = [0, 1]\n") + kSmall +
                                                   "[compare]\nstrategies = [\"Random\", \"Full\"]\n");
    const auto dir = kWork / "compare_two";
    REQUIRE(run_cli("compare -c " + cfg.string() + " -o " + dir.string()) == 0);
    const auto tests = slurp(dir / "sign_tests.csv");
    CHECK(tests.rfind("strategy_a,strategy_b,round,wins,losses,ties,p_value\n", 0) == 0);
    CHECK(tests.find("Random,Full,1,") != std::string::npos);
    CHECK(tests.find("Full,Random,1,") != std::string::npos);
}

TEST_CASE("gen-data writes readable pools") {
    const auto cfg = write_config("small.toml", kSmall);
    const auto dir = kWork / "data";
    REQUIRE(run_cli("gen-data --config " + cfg.string() + " --out " + dir.string() + " --seed 5") == 0);
    std::ifstream src(dir / "source.csv"), train(dir / "target_train.csv"), eval(dir / "target_eval.csv");
    CHECK(ada::read_pool_csv(src, ada::Domain::Source).total_px() == 600);
    CHECK(ada::read_pool_csv(train, ada::Domain::Target).total_px() == 600);
    CHECK(ada::read_pool_csv(eval, ada::Domain::Target).total_px() == 300);
}

TEST_CASE("exit codes") {
    CHECK(run_cli("run --config " + (kWork / "absent.toml").string()) == 2);
    CHECK(run_cli("run --config " + write_config("bad_syntax.toml", "[schedule\n").string()) == 3);
    CHECK(run_cli("run --config " + write_config("unknown.toml", "colour = 1\n").string()) == 3);
    CHECK(run_cli("run --config " + write_config("alpha.toml", "[schedule]\nalpha = 1.5\n").string()) == 4);

    const auto blocker = kWork / "blocker";
    std::ofstream(blocker) << "x";
    const auto cfg = write_config("small.toml", kSmall);
    CHECK(run_cli("gen-data --config " + cfg.string() + " --out " + (blocker / "sub").string()) == 5);
    CHECK(run_cli("bogus-command") != 0);
}

TEST_CASE("help documents every flag") {
    const auto out = kWork / "help.txt";
    fs::create_directories(kWork);
    CHECK(run_cli("run --help", out.string()) == 0);
    const auto text = slurp(out);
    for (const char* flag : {"--config", "--out", "--seed", "--verbose", "--dump-scores", "--checkpoint"})
        CHECK(text.find(flag) != std::string::npos);
    CHECK(run_cli("--help", out.string()) == 0);
    const auto top = slurp(out);
    for (const char* sub : {"gen-data", "run", "compare", "verify", "ADA_SELECT_THREADS"})
        CHECK(top.find(sub) != std::string::npos);
}
