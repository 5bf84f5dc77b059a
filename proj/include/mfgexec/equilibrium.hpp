#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mfgexec/model.hpp"
#include "mfgexec/riccati.hpp"

namespace mfgexec {

struct EquilibriumSolution
{
    TimeGrid grid;
    std::vector<Eigen::VectorXd> g1;
    std::vector<Eigen::MatrixXd> g2;
    /// (2a)^{-1} (g1 + g2 q_bar) at each grid point.
    std::vector<Eigen::VectorXd> nu_bar;
    /// Rate held over [t_i, t_{i+1}): (q_bar_{i+1} - q_bar_i) / dt. The last
    /// entry repeats the final interval.
    std::vector<Eigen::VectorXd> nu_bar_held;
    std::vector<Eigen::VectorXd> q_bar;
    std::vector<Eigen::VectorXd> h2;
};

struct AgentState
{
    std::size_t subpop = 0;
    double q = 0.0;
    double x = 0.0;
};

/// Trapezoidal g1 at grid index i: sum_j w_j eta(t_i, t_j) 1 forecast[j - i],
/// where forecast[l] = E[A_{t_{i+l}} | F_{t_i}] for l = 0..n-i.
Eigen::VectorXd compute_g1(const OrderedExponentialTable& table, std::size_t i, std::span<const double> forecast);

/// g1 on the whole grid for a deterministic alpha path (alpha[j] = A_{t_j}),
/// by an O(n K^2) backward recursion equivalent to compute_g1 at each i.
std::vector<Eigen::VectorXd> compute_g1_path(const OrderedExponentialTable& table, std::span<const double> alpha);

/// Precomputed linear map g1(t_i) = K_i (posterior; F_t) for forecasts that are
/// linear in the filter state, K_i = sum_j w_j eta(t_i, t_j) 1 weights_{j-i}^T.
class G1Kernel
{
public:
    G1Kernel() = default;

    /// `weights` holds one row per lag as produced by forecast_weights.
    static G1Kernel build(const OrderedExponentialTable& table, const Eigen::MatrixXd& weights);
    static G1Kernel build_serial(const OrderedExponentialTable& table, const Eigen::MatrixXd& weights);

    const Eigen::MatrixXd& matrix(std::size_t i) const { return k_[i]; }
    std::size_t size() const noexcept { return k_.size(); }

    Eigen::VectorXd apply(std::size_t i, const Eigen::VectorXd& posterior, double f) const;

private:
    std::vector<Eigen::MatrixXd> k_;
};

/// Exact interval maps for dq_bar = (2a)^{-1} (g1 + g2 q_bar) dt.
/// q_bar_{i+1} = Phi_i q_bar_i + Gamma0_i g1_i + Gamma1_i (g1_{i+1} - g1_i),
/// with g1 taken linear on the interval; the adapted form drops the last term.
class MeanFieldPropagator
{
public:
    MeanFieldPropagator() = default;
    MeanFieldPropagator(const PopulationSpec& population, const RiccatiSolution& riccati);

    const Eigen::MatrixXd& flow(std::size_t i) const { return phi_[i]; }
    const Eigen::MatrixXd& forcing(std::size_t i) const { return gamma0_[i]; }
    const Eigen::MatrixXd& forcing_slope(std::size_t i) const { return gamma1_[i]; }

    Eigen::VectorXd advance(std::size_t i, const Eigen::VectorXd& q_bar, const Eigen::VectorXd& g1) const;
    Eigen::VectorXd advance(std::size_t i, const Eigen::VectorXd& q_bar, const Eigen::VectorXd& g1,
                            const Eigen::VectorXd& g1_next) const;

    /// (2a)^{-1} (g1 + g2_i q_bar)
    Eigen::VectorXd instantaneous_rate(std::size_t i, const Eigen::VectorXd& q_bar, const Eigen::VectorXd& g1) const;

private:
    Eigen::MatrixXd inv2a_;
    std::vector<Eigen::MatrixXd> g2_;
    std::vector<Eigen::MatrixXd> phi_;
    std::vector<Eigen::MatrixXd> gamma0_;
    std::vector<Eigen::MatrixXd> gamma1_;
};

struct MeanFieldStep
{
    Eigen::VectorXd nu_bar;
    Eigen::VectorXd q_bar_next;
};

/// nu_bar at t_i and q_bar at t_{i+1}, with g1 held over the interval.
MeanFieldStep advance_mean_field(const MeanFieldPropagator& propagator, std::size_t i,
                                 const Eigen::VectorXd& q_bar, const Eigen::VectorXd& g1);

/// nu_bar_k + h2_k / (2 a_k) * (q - q_bar_k)
double agent_control(const AgentState& agent, double nu_bar_k, double q_bar_k, double h2_k, double a_k);

/// Everything about the mean-field equilibrium that depends only on the
/// population and grid, computed once and shared by every replication.
struct MeanFieldSystem
{
    PopulationSpec population;
    TimeGrid grid;
    RiccatiSolution riccati;
    OrderedExponentialTable table;
    MeanFieldPropagator propagator;
    std::vector<Eigen::VectorXd> h2;          ///< h2_k(t_i)
    /// Exact gap ratio (q - q_bar)(t_{i+1}) / (q - q_bar)(t_i) per sub-population.
    std::vector<Eigen::VectorXd> gap_ratio;
    /// Gain that reproduces gap_ratio when the control is held over the interval.
    std::vector<Eigen::VectorXd> held_gain;

    static MeanFieldSystem build(const PopulationSpec& population, const TimeGrid& grid);
};

/// Equilibrium for a deterministic alpha path with all inventories started at
/// m0; g1 is linear on each interval in the mean-field update.
EquilibriumSolution solve_deterministic_equilibrium(const MeanFieldSystem& system, std::span<const double> alpha,
                                                    const Eigen::VectorXd& m0);

}  // namespace mfgexec
