#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mfgexec {

/// Raised when a parameter violates a model invariant. `field()` names the
/// offending entry, e.g. "population.subpops[0].a".
class ValidationError : public std::invalid_argument
{
public:
    ValidationError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field))
    {
    }

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Raised when a computation leaves the regime where it is numerically sound.
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Preference triplet (a, phi, psi) of one sub-population, its limiting
/// share p of the population and the law of initial inventories.
struct SubPopulationSpec
{
    double a = 1e-4;    ///< temporary impact, price per unit rate
    double phi = 0.0;   ///< running inventory penalty
    double psi = 1.0;   ///< terminal liquidation penalty
    double p = 1.0;     ///< limiting population proportion
    double m0 = 0.0;    ///< mean initial inventory (shares)
    double s0 = 0.0;    ///< std. dev. of initial inventory (shares)

    bool operator==(const SubPopulationSpec&) const = default;
};

struct PopulationSpec
{
    std::vector<SubPopulationSpec> subpops;
    double lambda = 0.0;   ///< permanent impact per unit average rate

    std::size_t size() const noexcept { return subpops.size(); }

    Eigen::VectorXd proportions() const;
    /// diag(2 a_k)^{-1}
    Eigen::MatrixXd inverse_double_impact() const;
    Eigen::MatrixXd phi_matrix() const;
    Eigen::MatrixXd psi_matrix() const;
    /// Lambda_{ij} = lambda * p_j; every row is the same.
    Eigen::MatrixXd impact_coupling() const;

    bool operator==(const PopulationSpec&) const = default;
};

/// Pure-jump mean-reverting price driven by a latent Markov chain. F moves by
/// +/- alpha_tick with intensities sigma + kappa (Theta - F)_{+/-}.
struct LatentMarketModel
{
    Eigen::VectorXd theta_states;
    Eigen::MatrixXd generator;
    Eigen::VectorXd prior;
    double kappa = 0.0;
    double sigma = 0.0;
    double alpha_tick = 0.01;
    double f0 = 0.0;
    double horizon = 1.0;

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(theta_states.size()); }

    /// Drift coefficient of F: dE[F] = drift_rate() * (Theta - F) dt.
    double drift_rate() const noexcept { return alpha_tick * kappa; }

    double up_intensity(double theta, double f) const noexcept;
    double down_intensity(double theta, double f) const noexcept;
    double total_intensity(double theta, double f) const noexcept;
};

/// Uniform grid 0 = t_0 < ... < t_n = T.
class TimeGrid
{
public:
    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t n_steps);

    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t size() const noexcept { return n_steps_ + 1; }
    double horizon() const noexcept { return horizon_; }
    double dt() const noexcept { return dt_; }
    double operator[](std::size_t i) const noexcept { return t_[i]; }
    const std::vector<double>& times() const noexcept { return t_; }

    /// Index of the grid point closest to t.
    std::size_t nearest(double t) const noexcept;

private:
    double horizon_ = 0.0;
    std::size_t n_steps_ = 0;
    double dt_ = 0.0;
    std::vector<double> t_;
};

inline constexpr std::size_t kDefaultSteps = 1000;

struct GameSpec
{
    PopulationSpec population;
    LatentMarketModel market;
    std::vector<std::size_t> n_agents_per_subpop;
    /// Per-agent shift Q0 - Q_T implementing stochastic trading targets.
    std::optional<std::vector<double>> target_shift;

    std::size_t total_agents() const noexcept;
    /// Sub-population index of every agent, agents ordered by sub-population.
    std::vector<std::size_t> agent_subpops() const;
};

void validate(const SubPopulationSpec& sub, const std::string& field);
void validate(const PopulationSpec& population);
void validate(const LatentMarketModel& market);

/// Checks every invariant and returns the spec unchanged, or throws
/// ValidationError naming the first offending field.
GameSpec validate(const GameSpec& spec);

/// N_k / N for each sub-population.
std::vector<double> empirical_proportions(std::span<const std::size_t> n_agents_per_subpop);

/// Integer counts summing to n_total with proportions as close as possible to
/// `proportions` (largest-remainder rounding, every count at least one).
std::vector<std::size_t> proportional_counts(std::span<const double> proportions, std::size_t n_total);

}  // namespace mfgexec
