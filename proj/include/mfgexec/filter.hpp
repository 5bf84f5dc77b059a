#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mfgexec/model.hpp"

namespace mfgexec {

struct FilterState
{
    double t = 0.0;
    Eigen::VectorXd posterior;   ///< P(Theta_t = theta_m | observed history)
    double f = 0.0;              ///< current unimpacted price F_t
};

enum class JumpDirection { up, down };

/// Counts of negativity clamps in the explicit Kolmogorov step.
struct FilterDiagnostics
{
    std::size_t steps = 0;
    std::size_t clamps = 0;

    /// Throws NumericalError once clamping exceeds 1% of (at least 100) steps.
    void check() const;
};

struct AlphaForecast
{
    double base_time = 0.0;
    std::vector<double> horizon_grid;
    std::vector<double> values;   ///< E[A_u | F_t] per horizon point
};

/// Initial filter state: the market prior at t = 0 with F = f0.
FilterState initial_filter_state(const LatentMarketModel& market);

/// One explicit step of the no-jump posterior dynamics, clamped at zero and
/// renormalized. F is unchanged.
FilterState propagate(const FilterState& state, const LatentMarketModel& market, double dt,
                      FilterDiagnostics* diagnostics = nullptr);

/// Bayes update at an observed jump of the given direction, then F += +/- alpha.
FilterState jump_update(const FilterState& state, const LatentMarketModel& market, JumpDirection direction);

/// Advances to `t_end` without jumps using steps no larger than `max_step`.
FilterState propagate_to(const FilterState& state, const LatentMarketModel& market, double t_end,
                         double max_step, FilterDiagnostics* diagnostics = nullptr);

/// Generator of the joint mean dynamics z = (p, m_F):
/// dz/du = G z with G = [[C^T, 0], [alpha kappa theta^T, -alpha kappa]].
Eigen::MatrixXd forecast_generator(const LatentMarketModel& market);

/// Readout c with E[A_u | F_t] = c^T z(u), c = alpha kappa (theta; -1).
Eigen::VectorXd forecast_readout(const LatentMarketModel& market);

/// E[A_u | F_t] for every u in horizon_grid (u >= state.t).
AlphaForecast alpha_forecast(const FilterState& state, const LatentMarketModel& market,
                             std::span<const double> horizon_grid);

/// Rows w_l^T = c^T exp(l dt G), l = 0..n_lags, so that
/// E[A_{t + l dt} | F_t] = w_l^T (posterior; F_t).
Eigen::MatrixXd forecast_weights(const LatentMarketModel& market, double dt, std::size_t n_lags);

}  // namespace mfgexec
