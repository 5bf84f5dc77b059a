#include "mfgexec/market_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>

namespace mfgexec {

std::size_t LatentPath::state_at(double t) const
{
    const auto it = std::upper_bound(switch_times.begin(), switch_times.end(), t);
    const auto r = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - switch_times.begin() - 1, 0));
    return states[r];
}

double LatentPath::price_at(double t, double f0, double tick) const
{
    double f = f0;
    for (std::size_t r = 0; r < jump_times.size() && jump_times[r] <= t; ++r)
        f += jump_directions[r] == JumpDirection::up ? tick : -tick;
    return f;
}

void validate_forced_theta(const ForcedTheta& forced, const LatentMarketModel& market)
{
    if (forced.empty())
        throw ValidationError("forced_theta", "invalid forced path: at least one entry is required");
    if (forced.front().first != 0.0)
        throw ValidationError("forced_theta", "invalid forced path: the first entry must start at t = 0");
    for (std::size_t r = 0; r < forced.size(); ++r) {
        const auto& [t, idx] = forced[r];
        if (idx >= market.n_states())
            throw ValidationError("forced_theta", "invalid forced path: state index outside theta_states");
        if (!std::isfinite(t) || t < 0.0 || t > market.horizon)
            throw ValidationError("forced_theta", "invalid forced path: switch time outside [0, T]");
        if (r > 0 && t <= forced[r - 1].first)
            throw ValidationError("forced_theta", "invalid forced path: switch times must increase");
    }
}

namespace {

void simulate_chain(const LatentMarketModel& market, std::mt19937_64& rng, LatentPath& path)
{
    std::discrete_distribution<std::size_t> initial(market.prior.data(), market.prior.data() + market.prior.size());
    std::size_t state = initial(rng);
    double t = 0.0;
    path.switch_times.push_back(0.0);
    path.states.push_back(state);
    const Eigen::Index m = market.generator.rows();
    while (true) {
        const double leave = -market.generator(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(state));
        if (!(leave > 0.0))
            break;
        t += std::exponential_distribution<double>(leave)(rng);
        if (t > market.horizon)
            break;
        std::vector<double> weights(static_cast<std::size_t>(m));
        for (Eigen::Index j = 0; j < m; ++j)
            weights[static_cast<std::size_t>(j)] =
                j == static_cast<Eigen::Index>(state) ? 0.0 : market.generator(static_cast<Eigen::Index>(state), j);
        state = std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
        path.switch_times.push_back(t);
        path.states.push_back(state);
    }
}

}  // namespace

LatentPath simulate_latent_and_price(const LatentMarketModel& market, std::mt19937_64& rng,
                                     const std::optional<ForcedTheta>& forced)
{
    LatentPath path;
    if (forced) {
        validate_forced_theta(*forced, market);
        for (const auto& [t, idx] : *forced) {
            path.switch_times.push_back(t);
            path.states.push_back(idx);
        }
    } else {
        simulate_chain(market, rng, path);
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double f = market.f0;
    double t = 0.0;
    while (true) {
        const double bound = market.sigma + market.kappa * (market.theta_states.array() - f).abs().maxCoeff();
        if (!(bound > 0.0))
            break;   // no state can produce a jump and F never moves again
        t += std::exponential_distribution<double>(2.0 * bound)(rng);
        if (t > market.horizon)
            break;
        const bool up = unit(rng) < 0.5;
        const double theta = market.theta_states[static_cast<Eigen::Index>(path.state_at(t))];
        const double rate = up ? market.up_intensity(theta, f) : market.down_intensity(theta, f);
        if (rate > bound * (1.0 + 1e-12))
            ++path.bound_violations;
        if (unit(rng) * bound < rate) {
            f += up ? market.alpha_tick : -market.alpha_tick;
            path.jump_times.push_back(t);
            path.jump_directions.push_back(up ? JumpDirection::up : JumpDirection::down);
        }
    }
    return path;
}

FilteredPath filter_latent_path(const LatentMarketModel& market, const LatentPath& latent, const TimeGrid& grid,
                                std::size_t substeps)
{
    if (substeps == 0)
        throw ValidationError("filter_substeps", "at least one filter substep is required");
    const double max_step = grid.dt() / static_cast<double>(substeps);
    FilteredPath out;
    FilterState state = initial_filter_state(market);
    out.f.push_back(state.f);
    out.theta.push_back(latent.state_at(0.0));
    out.posterior.push_back(state.posterior);
    std::size_t next = 0;
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        const double t_next = grid[i + 1];
        while (next < latent.jump_times.size() && latent.jump_times[next] <= t_next) {
            state = propagate_to(state, market, latent.jump_times[next], max_step, &out.diagnostics);
            state = jump_update(state, market, latent.jump_directions[next]);
            ++next;
        }
        state = propagate_to(state, market, t_next, max_step, &out.diagnostics);
        out.f.push_back(state.f);
        out.theta.push_back(latent.state_at(t_next));
        out.posterior.push_back(state.posterior);
    }
    out.diagnostics.check();
    return out;
}

MeanPricePath mean_price_path(const LatentMarketModel& market, const ForcedTheta& theta, const TimeGrid& grid)
{
    validate_forced_theta(theta, market);
    const double rate = market.drift_rate();
    MeanPricePath out;
    out.f.resize(grid.size());
    out.alpha.resize(grid.size());
    double f = market.f0;
    double t = 0.0;
    std::size_t seg = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        // Advance through every switch before t_i, each with its own Theta.
        while (true) {
            const double seg_end = seg + 1 < theta.size() ? theta[seg + 1].first : std::numeric_limits<double>::infinity();
            const double target = std::min(grid[i], seg_end);
            const double th = market.theta_states[static_cast<Eigen::Index>(theta[seg].second)];
            f = th + (f - th) * std::exp(-rate * (target - t));
            t = target;
            if (seg_end <= grid[i]) {
                ++seg;
                continue;
            }
            break;
        }
        const double th = market.theta_states[static_cast<Eigen::Index>(theta[seg].second)];
        out.f[i] = f;
        out.alpha[i] = rate * (th - f);
    }
    return out;
}

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replication), static_cast<std::uint32_t>(replication >> 32)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

GameEngine::GameEngine(const GameSpec& spec, const TimeGrid& grid, GameOptions options)
    : spec_(validate(spec)), grid_(grid), options_(std::move(options))
{
    if (std::abs(grid.horizon() - spec.market.horizon) > 1e-12 * spec.market.horizon)
        throw ValidationError("grid.horizon", "grid horizon must equal the market horizon");
    if (options_.filter_substeps == 0)
        throw ValidationError("run.filter_substeps", "at least one filter substep is required");
    if (options_.forced_theta)
        validate_forced_theta(*options_.forced_theta, spec_.market);
    system_ = MeanFieldSystem::build(spec_.population, grid_);
    kernel_ = G1Kernel::build(system_.table, forecast_weights(spec_.market, grid_.dt(), grid_.n_steps()));
    agent_subpop_ = spec_.agent_subpops();
}

GameTrajectory GameEngine::run_replication(std::uint64_t seed, std::uint64_t replication) const
{
    return run(replication_seed(seed, replication));
}

GameTrajectory GameEngine::run(std::uint64_t stream_seed) const
{
    const auto& pop = spec_.population;
    const auto& market = spec_.market;
    const std::size_t n = grid_.n_steps();
    const double dt = grid_.dt();
    const std::size_t n_agents = agent_subpop_.size();
    const Eigen::Index k_count = static_cast<Eigen::Index>(pop.size());
    const Eigen::VectorXd p = pop.proportions();
    const double lambda = pop.lambda;

    std::mt19937_64 rng(stream_seed);
    GameTrajectory tr;
    tr.grid = grid_;
    tr.rng_seed = stream_seed;
    tr.agent_subpop = agent_subpop_;

    // Initial inventories, net of any trading target.
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> q(n_agents), x(n_agents, options_.initial_cash), pen(n_agents, 0.0), max_abs(n_agents);
    tr.q0.resize(n_agents);
    for (std::size_t j = 0; j < n_agents; ++j) {
        const auto& sub = pop.subpops[agent_subpop_[j]];
        q[j] = sub.m0 + sub.s0 * normal(rng);
        if (spec_.target_shift)
            q[j] -= (*spec_.target_shift)[j];
        tr.q0[j] = q[j];
        max_abs[j] = std::abs(q[j]);
    }

    const LatentPath latent = simulate_latent_and_price(market, rng, options_.forced_theta);
    tr.thinning_violations = latent.bound_violations;
    tr.n_jumps = latent.jump_times.size();

    Eigen::VectorXd q_bar(k_count);
    for (Eigen::Index c = 0; c < k_count; ++c)
        q_bar[c] = pop.subpops[static_cast<std::size_t>(c)].m0;
    if (spec_.target_shift) {
        // The mean field starts from the mean of the shifted initial law.
        Eigen::VectorXd shift = Eigen::VectorXd::Zero(k_count);
        for (std::size_t j = 0; j < n_agents; ++j)
            shift[static_cast<Eigen::Index>(agent_subpop_[j])] += (*spec_.target_shift)[j];
        for (Eigen::Index c = 0; c < k_count; ++c)
            q_bar[c] -= shift[c] / static_cast<double>(spec_.n_agents_per_subpop[static_cast<std::size_t>(c)]);
    }

    const auto empirical_mean = [&](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v)
            s += e;
        return s / static_cast<double>(n_agents);
    };
    const auto subpop_means = [&](const std::vector<double>& v, bool absolute) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(k_count);
        for (std::size_t j = 0; j < n_agents; ++j)
            s[static_cast<Eigen::Index>(agent_subpop_[j])] += absolute ? std::abs(v[j]) : v[j];
        for (Eigen::Index c = 0; c < k_count; ++c)
            s[c] /= static_cast<double>(spec_.n_agents_per_subpop[static_cast<std::size_t>(c)]);
        return s;
    };

    auto& eq = tr.equilibrium;
    eq.grid = grid_;
    eq.g2 = system_.riccati.g2;
    eq.h2 = system_.h2;
    eq.g1.resize(n + 1);
    eq.q_bar.resize(n + 1);
    eq.nu_bar.resize(n + 1);
    eq.nu_bar_held.resize(n + 1);

    tr.s_path.resize(n + 1);
    tr.f_path.resize(n + 1);
    tr.f_hat_path.resize(n + 1);
    tr.theta_path.resize(n + 1);
    tr.posterior_path.resize(n + 1);
    tr.q_bar_empirical.resize(n + 1);
    tr.nu_bar_empirical.resize(n);
    tr.subpop_mean_nu.resize(n);
    tr.subpop_mean_q.resize(n + 1);
    tr.subpop_mean_abs_q.resize(n + 1);
    if (options_.record_agent_paths) {
        tr.q_path.assign(n_agents, std::vector<double>(n + 1));
        tr.x_path.assign(n_agents, std::vector<double>(n + 1));
        tr.nu_path.assign(n_agents, std::vector<double>(n + 1));
        for (std::size_t j = 0; j < n_agents; ++j) {
            tr.q_path[j][0] = q[j];
            tr.x_path[j][0] = x[j];
        }
    }

    // State at t_0.
    double f_true = market.f0;
    tr.q_bar_empirical[0] = empirical_mean(q);
    tr.subpop_mean_q[0] = subpop_means(q, false);
    tr.subpop_mean_abs_q[0] = subpop_means(q, true);
    tr.f_path[0] = f_true;
    tr.s_path[0] = f_true + lambda * tr.q_bar_empirical[0];
    tr.theta_path[0] = latent.state_at(0.0);
    eq.q_bar[0] = q_bar;

    FilterState filter{0.0, market.prior, tr.s_path[0] - lambda * p.dot(q_bar)};
    tr.f_hat_path[0] = filter.f;
    tr.posterior_path[0] = filter.posterior;
    tr.max_f_hat_error = std::abs(filter.f - f_true);

    const double max_filter_step = dt / static_cast<double>(options_.filter_substeps);
    std::size_t next_jump = 0;
    std::vector<double> nu(n_agents);
    std::vector<double> gap_increase(n_agents, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd g1 = kernel_.apply(i, filter.posterior, filter.f);
        eq.g1[i] = g1;
        eq.nu_bar[i] = system_.propagator.instantaneous_rate(i, eq.q_bar[i], g1);
        eq.q_bar[i + 1] = system_.propagator.advance(i, eq.q_bar[i], g1);
        eq.nu_bar_held[i] = (eq.q_bar[i + 1] - eq.q_bar[i]) / dt;

        const double s_now = tr.s_path[i];
        const auto& held = eq.nu_bar_held[i];
        const auto& gain = system_.held_gain[i];
        const auto& qb0 = eq.q_bar[i];
        const auto& qb1 = eq.q_bar[i + 1];

        const auto agent_step = [&](std::size_t j) {
            const std::size_t k = agent_subpop_[j];
            const auto kk = static_cast<Eigen::Index>(k);
            const auto& sub = pop.subpops[k];
            const double gap = q[j] - qb0[kk];
            const double nu_star = held[kk] + gain[kk] * gap;
            const double v = options_.control_hook ? options_.control_hook(j, i, nu_star) : nu_star;
            nu[j] = v;
            x[j] -= (s_now + sub.a * v) * v * dt;
            pen[j] += q[j] * q[j] * dt;
            q[j] += v * dt;
            max_abs[j] = std::max(max_abs[j], std::abs(q[j]));
            gap_increase[j] = std::max(gap_increase[j], std::abs(q[j] - qb1[kk]) - std::abs(gap));
            if (options_.record_agent_paths) {
                tr.q_path[j][i + 1] = q[j];
                tr.x_path[j][i + 1] = x[j];
                tr.nu_path[j][i] = v;
            }
        };
        if (options_.parallel_agents) {
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n_agents); ++j)
                agent_step(static_cast<std::size_t>(j));
        } else {
            for (std::size_t j = 0; j < n_agents; ++j)
                agent_step(j);
        }

        tr.nu_bar_empirical[i] = empirical_mean(nu);
        tr.subpop_mean_nu[i] = subpop_means(nu, false);
        tr.q_bar_empirical[i + 1] = empirical_mean(q);
        tr.subpop_mean_q[i + 1] = subpop_means(q, false);
        tr.subpop_mean_abs_q[i + 1] = subpop_means(q, true);

        // Observed jumps in (t_i, t_{i+1}] drive the filter event by event.
        const double t_next = grid_[i + 1];
        while (next_jump < latent.jump_times.size() && latent.jump_times[next_jump] <= t_next) {
            filter = propagate_to(filter, market, latent.jump_times[next_jump], max_filter_step,
                                  &tr.filter_diagnostics);
            filter = jump_update(filter, market, latent.jump_directions[next_jump]);
            f_true += latent.jump_directions[next_jump] == JumpDirection::up ? market.alpha_tick : -market.alpha_tick;
            ++next_jump;
        }
        filter = propagate_to(filter, market, t_next, max_filter_step, &tr.filter_diagnostics);

        tr.f_path[i + 1] = f_true;
        tr.s_path[i + 1] = f_true + lambda * tr.q_bar_empirical[i + 1];
        tr.theta_path[i + 1] = latent.state_at(t_next);
        filter.f = tr.s_path[i + 1] - lambda * p.dot(eq.q_bar[i + 1]);
        tr.f_hat_path[i + 1] = filter.f;
        tr.posterior_path[i + 1] = filter.posterior;
        tr.max_f_hat_error = std::max(tr.max_f_hat_error, std::abs(filter.f - f_true));
    }
    tr.filter_diagnostics.check();

    eq.g1[n] = Eigen::VectorXd::Zero(k_count);
    eq.nu_bar[n] = system_.propagator.instantaneous_rate(n, eq.q_bar[n], eq.g1[n]);
    eq.nu_bar_held[n] = eq.nu_bar_held[n - 1];
    if (options_.record_agent_paths)
        for (std::size_t j = 0; j < n_agents; ++j)
            tr.nu_path[j][n] = tr.nu_path[j][n - 1];

    tr.q_terminal = q;
    tr.x_terminal = x;
    tr.inventory_penalty = pen;
    tr.max_abs_q = max_abs;
    for (double g : gap_increase)
        tr.max_gap_increase = std::max(tr.max_gap_increase, g);
    tr.objective.resize(n_agents);
    for (std::size_t j = 0; j < n_agents; ++j)
        tr.objective[j] = evaluate_objective(tr, spec_, j);
    return tr;
}

std::vector<GameTrajectory> run_replications(const GameEngine& engine, std::uint64_t seed, std::size_t replications)
{
    std::vector<GameTrajectory> out(replications);
    std::vector<std::exception_ptr> errors(replications);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(replications); ++r) {
        const auto u = static_cast<std::size_t>(r);
        try {
            out[u] = engine.run_replication(seed, u);
        } catch (...) {
            errors[u] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

GameTrajectory run_finite_game(const GameSpec& spec, const TimeGrid& grid, std::uint64_t stream_seed,
                               GameOptions options)
{
    return GameEngine(spec, grid, std::move(options)).run(stream_seed);
}

double evaluate_objective(const GameTrajectory& trajectory, const GameSpec& spec, std::size_t agent)
{
    const auto& sub = spec.population.subpops[trajectory.agent_subpop[agent]];
    const double q_t = trajectory.q_terminal[agent];
    const double s_t = trajectory.s_path.back();
    return trajectory.x_terminal[agent] + q_t * (s_t - sub.psi * q_t) - sub.phi * trajectory.inventory_penalty[agent];
}

}  // namespace mfgexec
