#pragma once

// Two-population switching-regime scenario built directly in code, so tests do not
// depend on the config parser.

#include "mfgexec/market_sim.hpp"
#include "mfgexec/model.hpp"

namespace testdata {

inline mfgexec::PopulationSpec reference_population(double lambda = 1e-3)
{
    mfgexec::PopulationSpec pop;
    pop.lambda = lambda;
    pop.subpops.push_back({1e-4, 1e-2, 100.0, 2.0 / 3.0, 100.0, 50.0});
    pop.subpops.push_back({1e-4, 1e-3, 100.0, 1.0 / 3.0, 0.0, 50.0});
    return pop;
}

inline mfgexec::LatentMarketModel reference_market()
{
    mfgexec::LatentMarketModel m;
    m.theta_states = Eigen::Vector2d(4.95, 5.05);
    m.generator.resize(2, 2);
    m.generator << -1.0, 1.0, 1.0, -1.0;
    m.prior = Eigen::Vector2d(0.5, 0.5);
    m.kappa = 360.0;
    m.sigma = 120.24;
    m.alpha_tick = 0.01;
    m.f0 = 5.0;
    m.horizon = 1.0;
    return m;
}

inline mfgexec::GameSpec reference_spec(std::size_t n1 = 20, std::size_t n2 = 10, double lambda = 1e-3)
{
    return {reference_population(lambda), reference_market(), {n1, n2}, std::nullopt};
}

/// Theta at 4.95 on [0, 0.5), then 5.05.
inline mfgexec::ForcedTheta switch_theta() { return {{0.0, 0}, {0.5, 1}}; }

}  // namespace testdata
