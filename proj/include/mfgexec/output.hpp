#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "mfgexec/equilibrium.hpp"
#include "mfgexec/market_sim.hpp"
#include "mfgexec/nash_eval.hpp"

namespace mfgexec {

/// "mfgexec <version> (<git describe>)"
std::string engine_version();

/// "%.17g" formatting used for every floating-point CSV field.
std::string format_double(double v);

/// Header comment line "# <engine_version()> config: <inline config>".
std::string header_line(const std::string& inline_config);

void write_equilibrium_csv(std::ostream& out, const std::string& header, const EquilibriumSolution& eq);

/// Latent state values come from `theta_states`; agent columns are written
/// only when the trajectory recorded agent paths.
void write_paths_csv(std::ostream& out, const std::string& header, const GameTrajectory& tr,
                     const Eigen::VectorXd& theta_states);

struct ObjectiveRow
{
    std::size_t agent;
    std::size_t subpop;
    double value;
};

void write_objectives_csv(std::ostream& out, const std::string& header, const std::vector<ObjectiveRow>& rows);

void write_nash_gap_csv(std::ostream& out, const std::string& header, const NashGapReport& report);

}  // namespace mfgexec
