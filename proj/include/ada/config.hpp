#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ada/harness.hpp"

namespace ada {

class ConfigError : public std::runtime_error {
public:
    enum class Kind { Missing, Parse, Constraint };

    ConfigError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }
    /// 2 missing file, 3 parse error or unknown key, 4 constraint violation.
    int exit_code() const {
        switch (kind_) {
            case Kind::Missing: return 2;
            case Kind::Parse: return 3;
            case Kind::Constraint: return 4;
        }
        return 3;
    }

private:
    Kind kind_;
};

/// TOML experiment config. Every key is optional; absent keys keep the
/// documented defaults. Unknown keys and type mismatches are parse errors.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_string(std::string_view text);

/// Full TOML echo of every effective value; parse_config_string inverts it.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace ada
