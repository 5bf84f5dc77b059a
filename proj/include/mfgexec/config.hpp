#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgexec/market_sim.hpp"
#include "mfgexec/model.hpp"

namespace mfgexec {

/// Malformed configuration document: syntax errors, unknown or missing keys,
/// wrong value types. The message carries the line and key.
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class RunMode { equilibrium, simulate, nash_gap, filter_demo };

const char* to_string(RunMode mode);
RunMode parse_run_mode(const std::string& text);

struct RunConfig
{
    RunMode mode = RunMode::simulate;
    std::size_t n_steps = kDefaultSteps;
    std::uint64_t seed = 0;
    std::size_t replications = 1;
    std::string output_dir = "out";
    std::optional<ForcedTheta> forced_theta;
    std::size_t filter_substeps = 10;
    bool record_paths = true;
    double initial_cash = 0.0;
    std::vector<std::size_t> nash_n_values{5, 10, 30, 100, 300};
    std::string nash_method = "deterministic-best-response";

    bool operator==(const RunConfig&) const = default;
};

struct ScenarioConfig
{
    GameSpec spec;
    RunConfig run;
};

bool operator==(const ScenarioConfig& x, const ScenarioConfig& y);

/// Strict parse of a configuration file; unknown keys are errors.
ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text);

/// Canonical block-style document; parse_config_text(emit_config(c)) == c.
std::string emit_config(const ScenarioConfig& config);
/// The same document on one line, for file headers.
std::string emit_config_inline(const ScenarioConfig& config);

}  // namespace mfgexec
