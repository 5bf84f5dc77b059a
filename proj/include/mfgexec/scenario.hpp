#pragma once

#include <string>
#include <vector>

#include "mfgexec/config.hpp"

namespace mfgexec {

struct ScenarioResult
{
    std::vector<std::string> files;   ///< paths written, in order
};

/// Runs the configured mode and writes its CSV artifacts into
/// config.run.output_dir (created if missing).
ScenarioResult run_scenario(const ScenarioConfig& config);

}  // namespace mfgexec
