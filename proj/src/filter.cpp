#include "mfgexec/filter.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace mfgexec {

void FilterDiagnostics::check() const
{
    if (steps >= 100 && static_cast<double>(clamps) > 0.01 * static_cast<double>(steps)) {
        std::ostringstream msg;
        msg << "filter clamped negative probabilities in " << clamps << " of " << steps
            << " steps; the filter step is too coarse";
        throw NumericalError(msg.str());
    }
}

FilterState initial_filter_state(const LatentMarketModel& market)
{
    return {0.0, market.prior, market.f0};
}

FilterState propagate(const FilterState& state, const LatentMarketModel& market, double dt,
                      FilterDiagnostics* diagnostics)
{
    const Eigen::Index m = state.posterior.size();
    Eigen::VectorXd rate(m);
    for (Eigen::Index i = 0; i < m; ++i)
        rate[i] = market.total_intensity(market.theta_states[i], state.f);
    const double mean_rate = state.posterior.dot(rate);

    Eigen::VectorXd drift = market.generator.transpose() * state.posterior;
    drift.array() -= state.posterior.array() * (rate.array() - mean_rate);

    FilterState out{state.t + dt, state.posterior + dt * drift, state.f};
    bool clamped = false;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (out.posterior[i] < 0.0) {
            out.posterior[i] = 0.0;
            clamped = true;
        }
    }
    out.posterior /= out.posterior.sum();
    if (diagnostics) {
        ++diagnostics->steps;
        if (clamped)
            ++diagnostics->clamps;
    }
    return out;
}

FilterState propagate_to(const FilterState& state, const LatentMarketModel& market, double t_end,
                         double max_step, FilterDiagnostics* diagnostics)
{
    const double span = t_end - state.t;
    if (!(span > 0.0))
        return {std::max(state.t, t_end), state.posterior, state.f};
    const auto steps = static_cast<std::size_t>(std::ceil(span / max_step - 1e-9));
    const double dt = span / static_cast<double>(std::max<std::size_t>(steps, 1));
    FilterState out = state;
    for (std::size_t s = 0; s < std::max<std::size_t>(steps, 1); ++s)
        out = propagate(out, market, dt, diagnostics);
    out.t = t_end;
    return out;
}

FilterState jump_update(const FilterState& state, const LatentMarketModel& market, JumpDirection direction)
{
    const Eigen::Index m = state.posterior.size();
    Eigen::VectorXd weighted(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double theta = market.theta_states[i];
        const double rate = direction == JumpDirection::up ? market.up_intensity(theta, state.f)
                                                           : market.down_intensity(theta, state.f);
        weighted[i] = state.posterior[i] * rate;
    }
    const double total = weighted.sum();
    if (!(total > 0.0))
        throw NumericalError("degenerate jump likelihood: every state has zero intensity");
    const double step = direction == JumpDirection::up ? market.alpha_tick : -market.alpha_tick;
    return {state.t, weighted / total, state.f + step};
}

Eigen::MatrixXd forecast_generator(const LatentMarketModel& market)
{
    const Eigen::Index m = static_cast<Eigen::Index>(market.n_states());
    const double ak = market.drift_rate();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m + 1, m + 1);
    g.topLeftCorner(m, m) = market.generator.transpose();
    g.block(m, 0, 1, m) = ak * market.theta_states.transpose();
    g(m, m) = -ak;
    return g;
}

Eigen::VectorXd forecast_readout(const LatentMarketModel& market)
{
    const Eigen::Index m = static_cast<Eigen::Index>(market.n_states());
    const double ak = market.drift_rate();
    Eigen::VectorXd c(m + 1);
    c.head(m) = ak * market.theta_states;
    c[m] = -ak;
    return c;
}

AlphaForecast alpha_forecast(const FilterState& state, const LatentMarketModel& market,
                             std::span<const double> horizon_grid)
{
    const Eigen::Index m = state.posterior.size();
    const Eigen::MatrixXd g = forecast_generator(market);
    const Eigen::VectorXd c = forecast_readout(market);
    Eigen::VectorXd z(m + 1);
    z.head(m) = state.posterior;
    z[m] = state.f;

    AlphaForecast out;
    out.base_time = state.t;
    out.horizon_grid.assign(horizon_grid.begin(), horizon_grid.end());
    out.values.reserve(horizon_grid.size());
    for (double u : horizon_grid) {
        const double lag = u - state.t;
        if (lag < -1e-12)
            throw ValidationError("horizon_grid", "forecast horizons must not precede the filter time");
        if (lag <= 0.0) {
            out.values.push_back(market.drift_rate() * (state.posterior.dot(market.theta_states) - state.f));
            continue;
        }
        out.values.push_back(c.dot((lag * g).exp() * z));
    }
    return out;
}

Eigen::MatrixXd forecast_weights(const LatentMarketModel& market, double dt, std::size_t n_lags)
{
    const Eigen::MatrixXd step = (dt * forecast_generator(market)).exp().transpose();
    const Eigen::VectorXd c = forecast_readout(market);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(n_lags + 1), c.size());
    Eigen::VectorXd row = c;
    for (std::size_t l = 0; l <= n_lags; ++l) {
        w.row(static_cast<Eigen::Index>(l)) = row.transpose();
        row = step * row;
    }
    return w;
}

}  // namespace mfgexec
