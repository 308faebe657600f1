#include "ada/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

namespace ada {
namespace {

[[noreturn]] void parse_fail(const std::string& msg) {
    throw ConfigError(ConfigError::Kind::Parse, msg);
}

[[noreturn]] void constraint_fail(const std::string& msg) {
    throw ConfigError(ConfigError::Kind::Constraint, msg);
}

// Reads keys from one table and rejects whatever was not consumed.
class Section {
public:
    Section(const toml::table& table, std::string prefix) : table_(table), prefix_(std::move(prefix)) {}

    void read(std::string_view key, double& out) {
        if (const auto* node = take(key)) {
            if (auto v = node->value_exact<double>()) out = *v;
            else if (auto i = node->value_exact<std::int64_t>()) out = static_cast<double>(*i);
            else type_fail(key, "a number");
        }
    }
    void read(std::string_view key, int& out) {
        if (const auto* node = take(key)) {
            auto v = node->value_exact<std::int64_t>();
            if (!v) type_fail(key, "an integer");
            if (*v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max())
                constraint_fail(name(key) + " is out of range");
            out = static_cast<int>(*v);
        }
    }
    void read(std::string_view key, std::int64_t& out) {
        if (const auto* node = take(key)) {
            auto v = node->value_exact<std::int64_t>();
            if (!v) type_fail(key, "an integer");
            out = *v;
        }
    }
    void read(std::string_view key, std::uint64_t& out) {
        std::int64_t v = static_cast<std::int64_t>(out);
        const bool present = table_.contains(key);
        read(key, v);
        if (present && v < 0) constraint_fail(name(key) + " must be >= 0");
        out = static_cast<std::uint64_t>(v);
    }
    void read(std::string_view key, bool& out) {
        if (const auto* node = take(key)) {
            auto v = node->value_exact<bool>();
            if (!v) type_fail(key, "a boolean");
            out = *v;
        }
    }
    void read(std::string_view key, std::string& out) {
        if (const auto* node = take(key)) {
            auto v = node->value_exact<std::string>();
            if (!v) type_fail(key, "a string");
            out = *v;
        }
    }
    template <typename T, typename Fn>
    void read_array(std::string_view key, Fn&& each) {
        if (const auto* node = take(key)) {
            const auto* arr = node->as_array();
            if (arr == nullptr) type_fail(key, "an array");
            for (const auto& elem : *arr) {
                auto v = elem.value_exact<T>();
                if (!v) {
                    if constexpr (std::is_same_v<T, double>) {
                        if (auto i = elem.value_exact<std::int64_t>()) {
                            each(static_cast<double>(*i));
                            continue;
                        }
                    }
                    type_fail(key, "an array of uniform element type");
                }
                each(*v);
            }
        }
    }
    template <typename Fn>
    void read_enum(std::string_view key, Fn&& parse) {
        std::string s;
        if (!table_.contains(key)) return;
        read(key, s);
        try {
            parse(s);
        } catch (const InvalidInput& e) {
            constraint_fail(name(key) + ": " + e.what());
        }
    }
    bool has(std::string_view key) const { return table_.contains(key); }
    Section sub(std::string_view key) {
        static const toml::table empty;
        if (const auto* node = take(key)) {
            const auto* t = node->as_table();
            if (t == nullptr) type_fail(key, "a table");
            return Section(*t, name(key));
        }
        return Section(empty, name(key));
    }
    void finish() const {
        for (const auto& [k, v] : table_)
            if (!seen_.contains(std::string(k.str()))) parse_fail("unknown config key '" + name(k.str()) + "'");
    }

private:
    const toml::node* take(std::string_view key) {
        seen_.insert(std::string(key));
        return table_.get(key);
    }
    std::string name(std::string_view key) const {
        return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
    }
    [[noreturn]] void type_fail(std::string_view key, const char* expected) const {
        parse_fail("config key '" + name(key) + "' must be " + expected);
    }

    const toml::table& table_;
    std::string prefix_;
    std::set<std::string> seen_;
};

void read_train(Section s, TrainSpec& t) {
    s.read("learning_rate", t.learning_rate);
    s.read("epochs", t.epochs);
    s.read("batch_size", t.batch_size);
    s.finish();
}

ExperimentConfig from_table(const toml::table& root) {
    ExperimentConfig cfg;
    Section top(root, "");
    top.read_enum("strategy", [&](const std::string& v) { cfg.strategy = parse_strategy(v); });
    top.read("class_balance", cfg.class_balance);
    top.read("region_size", cfg.region_size);
    if (root.contains("seeds")) {
        cfg.seeds.clear();
        top.read_array<std::int64_t>("seeds", [&](std::int64_t v) {
            if (v < 0) constraint_fail("seeds must be >= 0");
            cfg.seeds.push_back(static_cast<std::uint64_t>(v));
        });
    }

    {
        Section s = top.sub("schedule");
        s.read_enum("policy", [&](const std::string& v) { cfg.policy = parse_schedule_policy(v); });
        s.read("alpha", cfg.alpha);
        s.read("beta", cfg.beta);
        s.read("rounds", cfg.rounds);
        s.read("budget_percent", cfg.budget_percent);
        s.finish();
    }
    {
        Section s = top.sub("density");
        s.read("rho", cfg.rho);
        s.finish();
    }
    {
        Section s = top.sub("selection");
        s.read("kappa", cfg.balance.kappa);
        s.read("epsilon_w", cfg.balance.epsilon_w);
        s.read_enum("uncertainty",
                    [&](const std::string& v) { cfg.uncertainty = parse_uncertainty_criterion(v); });
        s.read("per_pixel_uncertainty", cfg.per_pixel_uncertainty);
        s.finish();
    }
    {
        Section s = top.sub("model");
        s.read_enum("architecture",
                    [&](const std::string& v) { cfg.architecture.kind = parse_architecture(v); });
        s.read("hidden_units", cfg.architecture.hidden_units);
        read_train(s.sub("warmup"), cfg.warmup_train);
        read_train(s.sub("finetune"), cfg.finetune_train);
        s.finish();
    }
    {
        Section s = top.sub("shift");
        auto& l = cfg.shift;
        s.read("classes", l.class_count);
        s.read("dim", l.feature_dim);
        s.read("components_per_class", l.components_per_class);
        s.read("class_separation", l.class_separation);
        s.read("component_offset", l.component_offset);
        s.read("component_variance", l.component_variance);
        s.read("shift_magnitude", l.shift_magnitude);
        s.read("novel_mode_distance", l.novel_mode_distance);
        s.read("samples_per_domain", l.samples_per_domain);
        s.read("eval_fraction", l.eval_fraction);
        s.read("geometry_seed", l.geometry_seed);
        if (s.has("novel_mode_classes")) {
            l.novel_mode_classes.clear();
            s.read_array<std::int64_t>("novel_mode_classes", [&](std::int64_t v) {
                l.novel_mode_classes.insert(static_cast<ClassId>(v));
            });
        }
        if (s.has("class_priors")) {
            l.class_priors.clear();
            s.read_array<double>("class_priors", [&](double v) { l.class_priors.push_back(v); });
        } else if (l.class_count != static_cast<int>(l.class_priors.size())) {
            // The default priors belong to the default class count.
            l.class_priors.clear();
        }
        s.finish();
    }
    {
        Section s = top.sub("compare");
        if (s.has("strategies")) {
            cfg.compare_strategies.clear();
            s.read_array<std::string>("strategies",
                                      [&](const std::string& v) { cfg.compare_strategies.push_back(v); });
        }
        s.finish();
    }
    top.finish();

    try {
        cfg.validate();
    } catch (const InvalidInput& e) {
        constraint_fail(e.what());
    }
    return cfg;
}

}  // namespace

ExperimentConfig parse_config_string(std::string_view text) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error: " << e.description() << " at line " << e.source().begin.line;
        parse_fail(msg.str());
    }
    return from_table(root);
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(ConfigError::Kind::Missing, "cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_string(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    toml::table root;
    root.insert("strategy", std::string(to_string(c.strategy)));
    root.insert("class_balance", c.class_balance);
    root.insert("region_size", c.region_size);
    toml::array seeds;
    for (auto s : c.seeds) seeds.push_back(static_cast<std::int64_t>(s));
    root.insert("seeds", seeds);

    root.insert("schedule", toml::table{{"policy", std::string(to_string(c.policy))},
                                        {"alpha", c.alpha},
                                        {"beta", c.beta},
                                        {"rounds", c.rounds},
                                        {"budget_percent", c.budget_percent}});
    root.insert("density", toml::table{{"rho", c.rho}});
    root.insert("selection", toml::table{{"kappa", c.balance.kappa},
                                         {"epsilon_w", c.balance.epsilon_w},
                                         {"uncertainty", std::string(to_string(c.uncertainty))},
                                         {"per_pixel_uncertainty", c.per_pixel_uncertainty}});
    auto train_table = [](const TrainSpec& t) {
        return toml::table{{"learning_rate", t.learning_rate},
                           {"epochs", t.epochs},
                           {"batch_size", t.batch_size}};
    };
    root.insert("model", toml::table{{"architecture", std::string(to_string(c.architecture.kind))},
                                     {"hidden_units", c.architecture.hidden_units},
                                     {"warmup", train_table(c.warmup_train)},
                                     {"finetune", train_table(c.finetune_train)}});
    const auto& l = c.shift;
    toml::array novel, priors;
    for (auto v : l.novel_mode_classes) novel.push_back(v);
    for (auto v : l.class_priors) priors.push_back(v);
    toml::table shift{{"classes", l.class_count},
                      {"dim", l.feature_dim},
                      {"components_per_class", l.components_per_class},
                      {"class_separation", l.class_separation},
                      {"component_offset", l.component_offset},
                      {"component_variance", l.component_variance},
                      {"shift_magnitude", l.shift_magnitude},
                      {"novel_mode_distance", l.novel_mode_distance},
                      {"samples_per_domain", l.samples_per_domain},
                      {"eval_fraction", l.eval_fraction},
                      {"geometry_seed", static_cast<std::int64_t>(l.geometry_seed)}};
    shift.insert("novel_mode_classes", novel);
    shift.insert("class_priors", priors);
    root.insert("shift", shift);
    toml::array strategies;
    for (const auto& s : c.compare_strategies) strategies.push_back(s);
    root.insert("compare", toml::table{{"strategies", strategies}});

    std::ostringstream out;
    out << root << '\n';
    return out.str();
}

}  // namespace ada
