#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfgexec/equilibrium.hpp"
#include "mfgexec/filter.hpp"
#include "mfgexec/model.hpp"

namespace mfgexec {

/// Piecewise-constant latent path: from each listed time on, Theta sits in the
/// listed state index. The first entry must start at t = 0.
using ForcedTheta = std::vector<std::pair<double, std::size_t>>;

struct LatentPath
{
    std::vector<double> switch_times;        ///< switch_times[0] = 0
    std::vector<std::size_t> states;         ///< state from switch_times[r] on
    std::vector<double> jump_times;
    std::vector<JumpDirection> jump_directions;
    /// Candidates whose realized intensity exceeded the thinning bound.
    std::size_t bound_violations = 0;

    std::size_t state_at(double t) const;
    /// F_t including every jump at or before t.
    double price_at(double t, double f0, double tick) const;
};

void validate_forced_theta(const ForcedTheta& forced, const LatentMarketModel& market);

/// Theta by exponential clocks (or the forced path) and the two counting
/// processes by thinning against sigma + kappa max_m |theta_m - F|.
LatentPath simulate_latent_and_price(const LatentMarketModel& market, std::mt19937_64& rng,
                                     const std::optional<ForcedTheta>& forced = std::nullopt);

/// Filter driven by the true price path (no agents): posterior and F at every
/// grid point, with exact jump times and substeps no larger than dt / substeps.
struct FilteredPath
{
    std::vector<double> f;
    std::vector<std::size_t> theta;
    std::vector<Eigen::VectorXd> posterior;
    FilterDiagnostics diagnostics;
};

FilteredPath filter_latent_path(const LatentMarketModel& market, const LatentPath& latent, const TimeGrid& grid,
                                std::size_t substeps);

/// F and A = alpha kappa (Theta - F) on the grid when F follows its mean path
/// exactly, F' = alpha kappa (Theta - F), under a forced latent path.
struct MeanPricePath
{
    std::vector<double> f;
    std::vector<double> alpha;
};

MeanPricePath mean_price_path(const LatentMarketModel& market, const ForcedTheta& theta, const TimeGrid& grid);

/// Per-replication stream seed; depends only on (seed, replication).
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication);

/// Replaces nu_star for (agent, step) when set; used for deviation studies.
using ControlHook = std::function<double(std::size_t agent, std::size_t step, double nu_star)>;

struct GameOptions
{
    std::size_t filter_substeps = 10;
    bool record_agent_paths = false;
    double initial_cash = 0.0;
    std::optional<ForcedTheta> forced_theta;
    ControlHook control_hook;
    bool parallel_agents = true;
};

struct GameTrajectory
{
    TimeGrid grid;
    std::uint64_t rng_seed = 0;

    std::vector<double> s_path;
    std::vector<double> f_path;
    std::vector<double> f_hat_path;              ///< S - lambda sum_k p_k q_bar_k
    std::vector<std::size_t> theta_path;         ///< latent state index
    std::vector<Eigen::VectorXd> posterior_path;
    std::size_t n_jumps = 0;

    /// Mean-field quantities along this path (g1 depends on the filter).
    EquilibriumSolution equilibrium;

    std::vector<double> q_bar_empirical;          ///< empirical mean inventory
    std::vector<double> nu_bar_empirical;         ///< per interval
    std::vector<Eigen::VectorXd> subpop_mean_nu;  ///< per interval
    std::vector<Eigen::VectorXd> subpop_mean_q;
    std::vector<Eigen::VectorXd> subpop_mean_abs_q;

    std::vector<std::size_t> agent_subpop;
    std::vector<double> q0;
    std::vector<double> q_terminal;
    std::vector<double> x_terminal;
    std::vector<double> inventory_penalty;        ///< sum_i q_i^2 dt
    std::vector<double> max_abs_q;
    std::vector<double> objective;

    /// [agent][grid index] when recorded; control holds n + 1 entries, the
    /// last repeating the final held rate.
    std::vector<std::vector<double>> q_path;
    std::vector<std::vector<double>> x_path;
    std::vector<std::vector<double>> nu_path;

    double max_f_hat_error = 0.0;
    /// Largest one-step increase of |q_j - q_bar_k| over agents and steps.
    double max_gap_increase = 0.0;
    std::size_t thinning_violations = 0;
    FilterDiagnostics filter_diagnostics;
};

/// Shared, read-only state for running many replications of one game.
class GameEngine
{
public:
    GameEngine(const GameSpec& spec, const TimeGrid& grid, GameOptions options = {});

    const GameSpec& spec() const noexcept { return spec_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const MeanFieldSystem& system() const noexcept { return system_; }
    const G1Kernel& kernel() const noexcept { return kernel_; }
    const GameOptions& options() const noexcept { return options_; }

    GameTrajectory run(std::uint64_t stream_seed) const;
    GameTrajectory run_replication(std::uint64_t seed, std::uint64_t replication) const;

private:
    GameSpec spec_;
    TimeGrid grid_;
    GameOptions options_;
    MeanFieldSystem system_;
    G1Kernel kernel_;
    std::vector<std::size_t> agent_subpop_;
};

/// Replications in parallel; element r is replication r regardless of threads.
std::vector<GameTrajectory> run_replications(const GameEngine& engine, std::uint64_t seed, std::size_t replications);

/// Convenience wrapper: builds an engine and runs one replication stream.
GameTrajectory run_finite_game(const GameSpec& spec, const TimeGrid& grid, std::uint64_t stream_seed,
                               GameOptions options = {});

/// X_T + q_T (S_T - Psi q_T) - phi sum q^2 dt for agent j.
double evaluate_objective(const GameTrajectory& trajectory, const GameSpec& spec, std::size_t agent);

}  // namespace mfgexec
