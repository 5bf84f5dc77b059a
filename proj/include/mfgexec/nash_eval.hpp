#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfgexec/equilibrium.hpp"
#include "mfgexec/market_sim.hpp"
#include "mfgexec/model.hpp"

namespace mfgexec {

inline constexpr const char* kMethodBestResponse = "deterministic-best-response";
inline constexpr const char* kMethodPerturbation = "perturbation-family";

/// No-noise game: F follows its mean path under a forced Theta, every agent
/// starts at its sub-population mean and the equilibrium is deterministic.
struct DeterministicScenario
{
    PopulationSpec population;            ///< limiting proportions p
    LatentMarketModel market;
    ForcedTheta theta;
    std::vector<std::size_t> n_agents_per_subpop;
    double initial_cash = 0.0;

    std::size_t total_agents() const noexcept;
};

/// Best response of one agent of sub-population k when every other agent
/// follows its equilibrium control, sampled on a grid.
struct BestResponseResult
{
    std::size_t subpop = 0;
    std::vector<double> q;           ///< best-response inventory
    std::vector<double> nu;          ///< best-response rate
    std::vector<double> q_star;      ///< equilibrium inventory q_bar_k
    std::vector<double> nu_star;     ///< equilibrium rate nu_bar_k
    double objective = 0.0;          ///< H_j(BR, others at equilibrium)
    double objective_star = 0.0;     ///< H_j(equilibrium)
    /// a int dnu^2 + phi int dq^2 + Psi' dq_T^2 with d = BR - equilibrium;
    /// equals objective - objective_star when the best response is optimal.
    double gap = 0.0;
    /// |H_j(equilibrium) - H_bar_j(equilibrium)|, finite game vs mean field.
    double mean_field_distance = 0.0;
};

/// Solves the continuous-time linear boundary problem for the equilibrium and
/// the best response exactly (piecewise matrix exponentials).
BestResponseResult best_response_oracle(const DeterministicScenario& scenario, std::size_t subpop,
                                        const TimeGrid& grid);

/// Exact continuous-time mean-field inventories and rates of the deterministic
/// scenario at the grid points.
struct ExactMeanField
{
    std::vector<Eigen::VectorXd> q_bar;
    std::vector<Eigen::VectorXd> nu_bar;
};

ExactMeanField exact_mean_field(const DeterministicScenario& scenario, const TimeGrid& grid);

struct NashGapReport
{
    std::vector<std::size_t> n_values;
    std::vector<double> gaps;
    std::vector<double> std_errors;
    std::vector<std::string> methods;
    /// max_k |N_k / N - p_k| realized for each N.
    std::vector<double> proportion_errors;
    /// |H_j - H_bar_j| at equilibrium, deterministic mode only.
    std::vector<double> mean_field_distances;
};

/// Grows counts proportionally with N and takes, for each N, the largest
/// best-response gap over one representative agent per sub-population.
NashGapReport nash_gap_curve_deterministic(const DeterministicScenario& base, std::span<const std::size_t> n_values,
                                           const TimeGrid& grid);

struct PerturbationOptions
{
    std::size_t replications = 1000;
    std::uint64_t seed = 0;
    /// Amplitudes (shares per unit time) applied to each basis direction, both signs.
    std::vector<double> amplitudes{1.0, 10.0};
    GameOptions game;
};

/// Lower bound on the gap in the stochastic game: the best improvement found
/// by adding deterministic perturbations to one agent's equilibrium control,
/// under common random numbers.
NashGapReport nash_gap_curve_perturbation(const GameSpec& base, std::span<const std::size_t> n_values,
                                          const TimeGrid& grid, const PerturbationOptions& options);

/// Perturbation basis on the grid intervals: constant, ramp, first-half and
/// second-half indicators.
std::vector<std::vector<double>> perturbation_basis(const TimeGrid& grid);

/// Mean-field objective of one agent of sub-population k with the population
/// held at its equilibrium (constant terms omitted):
/// int q (A + lambda sum_l p_l nu_bar_l) - a nu^2 - 2 Psi q nu - phi q^2 dt.
/// Controls are held constant on each grid interval.
class MeanFieldObjective
{
public:
    MeanFieldObjective(const TimeGrid& grid, const SubPopulationSpec& sub, double q0, std::vector<double> drift);

    double operator()(std::span<const double> nu) const;

    const TimeGrid& grid() const noexcept { return grid_; }

private:
    TimeGrid grid_;
    SubPopulationSpec sub_;
    double q0_;
    std::vector<double> drift_;   ///< A + lambda sum_l p_l nu_bar_l at grid points
};

/// Builds the objective from a deterministic equilibrium and alpha path.
MeanFieldObjective make_mean_field_objective(const PopulationSpec& population, const EquilibriumSolution& eq,
                                             std::span<const double> alpha, std::size_t subpop);

struct GateauxResult
{
    std::vector<double> derivatives;
    std::vector<double> second_differences;
    double scale = 0.0;   ///< |H_bar(nu*)| / T
    double max_abs_derivative = 0.0;
};

/// Central differences (H(nu + eps w) - H(nu - eps w)) / (2 eps) and second
/// differences (H(nu + e2 w) + H(nu - e2 w) - 2 H(nu)) / e2^2 per direction.
GateauxResult gateaux_check(const MeanFieldObjective& objective, std::span<const double> nu_star,
                            const std::vector<std::vector<double>>& directions, double eps, double eps_second);

/// Constant 1 and cos(m pi t / T), m = 1..count-1, sampled at interval midpoints.
std::vector<std::vector<double>> gateaux_basis(const TimeGrid& grid, std::size_t count);

}  // namespace mfgexec
