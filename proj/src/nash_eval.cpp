#include "mfgexec/nash_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <unsupported/Eigen/MatrixFunctions>

namespace mfgexec {

namespace {

/// Augmented state of the deterministic boundary problem:
/// [q_bar (K), Z = 2 a nu_bar (K), A, q, z = 2 a_k nu, 1].
struct Layout
{
    Eigen::Index k;
    Eigen::Index qb(Eigen::Index l) const { return l; }
    Eigen::Index zb(Eigen::Index l) const { return k + l; }
    Eigen::Index alpha() const { return 2 * k; }
    Eigen::Index q() const { return 2 * k + 1; }
    Eigen::Index z() const { return 2 * k + 2; }
    Eigen::Index one() const { return 2 * k + 3; }
    Eigen::Index size() const { return 2 * k + 4; }
};

struct Segment
{
    double start;
    double end;
    double theta;
};

struct BoundaryProblem
{
    Layout layout;
    Eigen::MatrixXd m;            ///< generator, constant over time
    std::vector<Segment> segments;
    Eigen::VectorXd x0;           ///< solved initial state
    double drift_rate = 0.0;
    std::vector<double> impact;   ///< c_l: coefficient of Z_l in the agent's price drift
    double eps = 0.0;             ///< own impact lambda / N
    double psi_eff = 0.0;         ///< Psi_k - eps / 2
    double s0 = 0.0;              ///< S_0 in the finite game
    double s0_bar = 0.0;          ///< S_0 in the mean-field limit
};

std::vector<Segment> make_segments(const DeterministicScenario& sc)
{
    std::vector<Segment> out;
    for (std::size_t r = 0; r < sc.theta.size(); ++r) {
        const double start = sc.theta[r].first;
        const double end = r + 1 < sc.theta.size() ? sc.theta[r + 1].first : sc.market.horizon;
        if (end > start)
            out.push_back({start, end, sc.market.theta_states[static_cast<Eigen::Index>(sc.theta[r].second)]});
    }
    return out;
}

Eigen::MatrixXd jump_matrix(const BoundaryProblem& bp, double theta_from, double theta_to)
{
    Eigen::MatrixXd j = Eigen::MatrixXd::Identity(bp.layout.size(), bp.layout.size());
    j(bp.layout.alpha(), bp.layout.one()) = bp.drift_rate * (theta_to - theta_from);
    return j;
}

BoundaryProblem build_problem(const DeterministicScenario& sc, std::size_t subpop)
{
    validate(sc.population);
    validate(sc.market);
    validate_forced_theta(sc.theta, sc.market);
    const auto& pop = sc.population;
    const Eigen::Index k_count = static_cast<Eigen::Index>(pop.size());
    if (sc.n_agents_per_subpop.size() != pop.size())
        throw ValidationError("n_agents_per_subpop", "one count per sub-population is required");
    const double n_total = static_cast<double>(sc.total_agents());
    const auto& me = pop.subpops[subpop];

    BoundaryProblem bp;
    bp.layout = Layout{k_count};
    const Layout& ly = bp.layout;
    bp.drift_rate = sc.market.drift_rate();
    bp.eps = pop.lambda / n_total;
    bp.psi_eff = me.psi - 0.5 * bp.eps;
    bp.segments = make_segments(sc);

    bp.impact.resize(pop.size());
    for (std::size_t l = 0; l < pop.size(); ++l) {
        const double share = static_cast<double>(sc.n_agents_per_subpop[l]) / n_total;
        bp.impact[l] = pop.lambda * share / (2.0 * pop.subpops[l].a);
        if (l == subpop)
            bp.impact[l] -= pop.lambda / (n_total * 2.0 * me.a);
    }

    Eigen::MatrixXd& m = bp.m;
    m = Eigen::MatrixXd::Zero(ly.size(), ly.size());
    for (Eigen::Index l = 0; l < k_count; ++l) {
        const auto& sub = pop.subpops[static_cast<std::size_t>(l)];
        m(ly.qb(l), ly.zb(l)) = 1.0 / (2.0 * sub.a);
        m(ly.zb(l), ly.qb(l)) = 2.0 * sub.phi;
        m(ly.zb(l), ly.alpha()) = -1.0;
        for (Eigen::Index c = 0; c < k_count; ++c) {
            const auto& other = pop.subpops[static_cast<std::size_t>(c)];
            m(ly.zb(l), ly.zb(c)) = -pop.lambda * other.p / (2.0 * other.a);
        }
    }
    m(ly.alpha(), ly.alpha()) = -bp.drift_rate;
    m(ly.q(), ly.z()) = 1.0 / (2.0 * me.a);
    m(ly.z(), ly.q()) = 2.0 * me.phi;
    m(ly.z(), ly.alpha()) = -1.0;
    for (Eigen::Index l = 0; l < k_count; ++l)
        m(ly.z(), ly.zb(l)) = -bp.impact[static_cast<std::size_t>(l)];

    // Known part of the initial state and the directions of the unknowns.
    Eigen::VectorXd base = Eigen::VectorXd::Zero(ly.size());
    for (Eigen::Index l = 0; l < k_count; ++l)
        base[ly.qb(l)] = pop.subpops[static_cast<std::size_t>(l)].m0;
    base[ly.alpha()] = bp.drift_rate * (bp.segments.front().theta - sc.market.f0);
    base[ly.q()] = me.m0;
    base[ly.one()] = 1.0;
    Eigen::MatrixXd dirs = Eigen::MatrixXd::Zero(ly.size(), k_count + 1);
    for (Eigen::Index l = 0; l < k_count; ++l)
        dirs(ly.zb(l), l) = 1.0;
    dirs(ly.z(), k_count) = 1.0;

    Eigen::MatrixXd prop = Eigen::MatrixXd::Identity(ly.size(), ly.size());
    for (std::size_t s = 0; s < bp.segments.size(); ++s) {
        if (s > 0)
            prop = jump_matrix(bp, bp.segments[s - 1].theta, bp.segments[s].theta) * prop;
        prop = (m * (bp.segments[s].end - bp.segments[s].start)).exp() * prop;
    }

    // Terminal conditions Z_l(T) + 2 Psi_l q_bar_l(T) = 0, z(T) + 2 Psi' q(T) = 0.
    Eigen::MatrixXd terminal = Eigen::MatrixXd::Zero(k_count + 1, ly.size());
    for (Eigen::Index l = 0; l < k_count; ++l) {
        terminal(l, ly.zb(l)) = 1.0;
        terminal(l, ly.qb(l)) = 2.0 * pop.subpops[static_cast<std::size_t>(l)].psi;
    }
    terminal(k_count, ly.z()) = 1.0;
    terminal(k_count, ly.q()) = 2.0 * bp.psi_eff;

    const Eigen::MatrixXd lhs = terminal * prop * dirs;
    const Eigen::VectorXd rhs = -(terminal * prop * base);
    const Eigen::VectorXd unknowns = lhs.fullPivLu().solve(rhs);
    bp.x0 = base + dirs * unknowns;
    if (!bp.x0.allFinite())
        throw NumericalError("best-response boundary problem produced a non-finite solution");

    double mean_share = 0.0;
    double mean_limit = 0.0;
    for (std::size_t l = 0; l < pop.size(); ++l) {
        mean_share += static_cast<double>(sc.n_agents_per_subpop[l]) / n_total * pop.subpops[l].m0;
        mean_limit += pop.subpops[l].p * pop.subpops[l].m0;
    }
    bp.s0 = sc.market.f0 + pop.lambda * mean_share;
    bp.s0_bar = sc.market.f0 + pop.lambda * mean_limit;
    return bp;
}

/// int_0^T x^T Q x dt along the solved path, exact per segment.
double integrate_quadratic(const BoundaryProblem& bp, const Eigen::MatrixXd& q)
{
    const Eigen::Index n = bp.layout.size();
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    big.topLeftCorner(n, n) = -bp.m.transpose();
    big.topRightCorner(n, n) = q;
    big.bottomRightCorner(n, n) = bp.m;
    Eigen::VectorXd x = bp.x0;
    double total = 0.0;
    for (std::size_t s = 0; s < bp.segments.size(); ++s) {
        if (s > 0)
            x = jump_matrix(bp, bp.segments[s - 1].theta, bp.segments[s].theta) * x;
        const double len = bp.segments[s].end - bp.segments[s].start;
        const Eigen::MatrixXd f = (big * len).exp();
        const Eigen::MatrixXd gram = f.bottomRightCorner(n, n).transpose() * f.topRightCorner(n, n);
        total += x.dot(gram * x);
        x = f.bottomRightCorner(n, n) * x;
    }
    return total;
}

Eigen::VectorXd terminal_state(const BoundaryProblem& bp)
{
    Eigen::VectorXd x = bp.x0;
    for (std::size_t s = 0; s < bp.segments.size(); ++s) {
        if (s > 0)
            x = jump_matrix(bp, bp.segments[s - 1].theta, bp.segments[s].theta) * x;
        x = (bp.m * (bp.segments[s].end - bp.segments[s].start)).exp() * x;
    }
    return x;
}

/// States at every grid point; a switch at a grid point is applied on arrival.
std::vector<Eigen::VectorXd> grid_states(const BoundaryProblem& bp, const TimeGrid& grid)
{
    std::vector<double> switches;
    std::vector<double> from;
    std::vector<double> to;
    for (std::size_t s = 1; s < bp.segments.size(); ++s) {
        switches.push_back(bp.segments[s].start);
        from.push_back(bp.segments[s - 1].theta);
        to.push_back(bp.segments[s].theta);
    }
    const Eigen::MatrixXd step = (bp.m * grid.dt()).exp();
    std::vector<Eigen::VectorXd> out(grid.size());
    Eigen::VectorXd x = bp.x0;
    std::size_t next = 0;
    const double tol = 1e-12 * grid.horizon();
    out[0] = x;
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        double t = grid[i];
        const double t_end = grid[i + 1];
        bool stepped_full = true;
        while (next < switches.size() && switches[next] < t_end - tol) {
            if (switches[next] > t + tol) {
                x = (bp.m * (switches[next] - t)).exp() * x;
                t = switches[next];
                stepped_full = false;
            }
            x = jump_matrix(bp, from[next], to[next]) * x;
            ++next;
        }
        x = stepped_full ? Eigen::VectorXd(step * x) : Eigen::VectorXd((bp.m * (t_end - t)).exp() * x);
        while (next < switches.size() && std::abs(switches[next] - t_end) <= tol) {
            x = jump_matrix(bp, from[next], to[next]) * x;
            ++next;
        }
        out[i + 1] = x;
    }
    return out;
}

Eigen::RowVectorXd unit_row(Eigen::Index n, Eigen::Index i, double v = 1.0)
{
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
    r[i] = v;
    return r;
}

/// Symmetric Q with x^T Q x = (u x) (v x).
Eigen::MatrixXd bilinear(const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v)
{
    return 0.5 * (u.transpose() * v + v.transpose() * u);
}

}  // namespace

std::size_t DeterministicScenario::total_agents() const noexcept
{
    return std::accumulate(n_agents_per_subpop.begin(), n_agents_per_subpop.end(), std::size_t{0});
}

BestResponseResult best_response_oracle(const DeterministicScenario& scenario, std::size_t subpop,
                                        const TimeGrid& grid)
{
    if (subpop >= scenario.population.size())
        throw ValidationError("subpop", "sub-population index out of range");
    const BoundaryProblem bp = build_problem(scenario, subpop);
    const Layout& ly = bp.layout;
    const Eigen::Index n = ly.size();
    const auto kk = static_cast<Eigen::Index>(subpop);
    const auto& me = scenario.population.subpops[subpop];
    const double inv2a = 1.0 / (2.0 * me.a);

    Eigen::RowVectorXd drift = unit_row(n, ly.alpha());
    for (Eigen::Index l = 0; l < ly.k; ++l)
        drift[ly.zb(l)] += bp.impact[static_cast<std::size_t>(l)];
    const Eigen::RowVectorXd q_row = unit_row(n, ly.q());
    const Eigen::RowVectorXd nu_row = unit_row(n, ly.z(), inv2a);
    const Eigen::RowVectorXd qs_row = unit_row(n, ly.qb(kk));
    const Eigen::RowVectorXd nus_row = unit_row(n, ly.zb(kk), inv2a);
    const Eigen::RowVectorXd dq = q_row - qs_row;
    const Eigen::RowVectorXd dnu = nu_row - nus_row;

    const Eigen::MatrixXd q_br = bilinear(q_row, drift) - me.a * bilinear(nu_row, nu_row) - me.phi * bilinear(q_row, q_row);
    const Eigen::MatrixXd q_star =
        bilinear(qs_row, drift) - me.a * bilinear(nus_row, nus_row) - me.phi * bilinear(qs_row, qs_row);
    const Eigen::MatrixXd q_gap = me.a * bilinear(dnu, dnu) + me.phi * bilinear(dq, dq);
    // Finite-game drift minus the mean-field drift A + lambda sum_l p_l nu_bar_l.
    Eigen::RowVectorXd drift_diff = drift - unit_row(n, ly.alpha());
    for (Eigen::Index l = 0; l < ly.k; ++l) {
        const auto& sub = scenario.population.subpops[static_cast<std::size_t>(l)];
        drift_diff[ly.zb(l)] -= scenario.population.lambda * sub.p / (2.0 * sub.a);
    }
    const Eigen::MatrixXd q_dist = bilinear(qs_row, drift_diff);

    const Eigen::VectorXd xt = terminal_state(bp);
    const double q0 = me.m0;
    const double constant = scenario.initial_cash + bp.s0 * q0 - 0.5 * bp.eps * q0 * q0;

    BestResponseResult out;
    out.subpop = subpop;
    out.objective = constant + integrate_quadratic(bp, q_br) - bp.psi_eff * xt[ly.q()] * xt[ly.q()];
    out.objective_star = constant + integrate_quadratic(bp, q_star) - bp.psi_eff * xt[ly.qb(kk)] * xt[ly.qb(kk)];
    const double dq_t = xt[ly.q()] - xt[ly.qb(kk)];
    out.gap = integrate_quadratic(bp, q_gap) + bp.psi_eff * dq_t * dq_t;
    out.mean_field_distance = std::abs(q0 * (bp.s0 - bp.s0_bar) - 0.5 * bp.eps * q0 * q0 +
                                       integrate_quadratic(bp, q_dist) +
                                       0.5 * bp.eps * xt[ly.qb(kk)] * xt[ly.qb(kk)]);

    const auto states = grid_states(bp, grid);
    for (const auto& x : states) {
        out.q.push_back(x[ly.q()]);
        out.nu.push_back(x[ly.z()] * inv2a);
        out.q_star.push_back(x[ly.qb(kk)]);
        out.nu_star.push_back(x[ly.zb(kk)] * inv2a);
    }
    return out;
}

ExactMeanField exact_mean_field(const DeterministicScenario& scenario, const TimeGrid& grid)
{
    const BoundaryProblem bp = build_problem(scenario, 0);
    const Layout& ly = bp.layout;
    ExactMeanField out;
    for (const auto& x : grid_states(bp, grid)) {
        Eigen::VectorXd q(ly.k);
        Eigen::VectorXd nu(ly.k);
        for (Eigen::Index l = 0; l < ly.k; ++l) {
            q[l] = x[ly.qb(l)];
            nu[l] = x[ly.zb(l)] / (2.0 * scenario.population.subpops[static_cast<std::size_t>(l)].a);
        }
        out.q_bar.push_back(q);
        out.nu_bar.push_back(nu);
    }
    return out;
}

NashGapReport nash_gap_curve_deterministic(const DeterministicScenario& base, std::span<const std::size_t> n_values,
                                           const TimeGrid& grid)
{
    const Eigen::VectorXd pv = base.population.proportions();
    const std::vector<double> p(pv.data(), pv.data() + pv.size());
    NashGapReport report;
    report.n_values.assign(n_values.begin(), n_values.end());
    report.gaps.resize(n_values.size());
    report.std_errors.assign(n_values.size(), 0.0);
    report.methods.assign(n_values.size(), kMethodBestResponse);
    report.proportion_errors.resize(n_values.size());
    report.mean_field_distances.resize(n_values.size());

    for (std::size_t r = 0; r < n_values.size(); ++r) {
        DeterministicScenario sc = base;
        sc.n_agents_per_subpop = proportional_counts(p, n_values[r]);
        double gap = -std::numeric_limits<double>::infinity();
        double dist = 0.0;
        double perr = 0.0;
        for (std::size_t k = 0; k < sc.population.size(); ++k) {
            const auto br = best_response_oracle(sc, k, grid);
            gap = std::max(gap, br.gap);
            dist = std::max(dist, br.mean_field_distance);
            perr = std::max(perr, std::abs(static_cast<double>(sc.n_agents_per_subpop[k]) /
                                               static_cast<double>(n_values[r]) -
                                           p[k]));
        }
        report.gaps[r] = gap;
        report.proportion_errors[r] = perr;
        report.mean_field_distances[r] = dist;
    }
    return report;
}

std::vector<std::vector<double>> perturbation_basis(const TimeGrid& grid)
{
    const std::size_t n = grid.n_steps();
    std::vector<std::vector<double>> out(4, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double mid = 0.5 * (grid[i] + grid[i + 1]) / grid.horizon();
        out[0][i] = 1.0;
        out[1][i] = mid;
        out[2][i] = mid < 0.5 ? 1.0 : 0.0;
        out[3][i] = mid < 0.5 ? 0.0 : 1.0;
    }
    return out;
}

NashGapReport nash_gap_curve_perturbation(const GameSpec& base, std::span<const std::size_t> n_values,
                                          const TimeGrid& grid, const PerturbationOptions& options)
{
    const Eigen::VectorXd pv = base.population.proportions();
    const std::vector<double> p(pv.data(), pv.data() + pv.size());
    const auto basis = perturbation_basis(grid);
    const std::size_t reps = options.replications;
    if (reps < 2)
        throw ValidationError("replications", "at least two replications are required");

    NashGapReport report;
    report.n_values.assign(n_values.begin(), n_values.end());
    report.methods.assign(n_values.size(), kMethodPerturbation);

    for (std::size_t nv : n_values) {
        GameSpec spec = base;
        spec.n_agents_per_subpop = proportional_counts(p, nv);
        spec.target_shift.reset();
        double perr = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k)
            perr = std::max(perr, std::abs(static_cast<double>(spec.n_agents_per_subpop[k]) /
                                               static_cast<double>(nv) -
                                           p[k]));

        const GameEngine baseline(spec, grid, options.game);
        const auto base_runs = run_replications(baseline, options.seed, reps);

        double best = -std::numeric_limits<double>::infinity();
        double best_se = 0.0;
        std::size_t first_agent = 0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const std::size_t agent = first_agent;
            first_agent += spec.n_agents_per_subpop[k];
            for (const auto& b : basis) {
                for (double amp : options.amplitudes) {
                    for (double sign : {1.0, -1.0}) {
                        GameOptions go = options.game;
                        go.control_hook = [agent, &b, c = sign * amp](std::size_t j, std::size_t i, double nu) {
                            return j == agent ? nu + c * b[i] : nu;
                        };
                        const GameEngine engine(spec, grid, go);
                        const auto runs = run_replications(engine, options.seed, reps);
                        double mean = 0.0;
                        double m2 = 0.0;
                        for (std::size_t r = 0; r < reps; ++r) {
                            const double d = runs[r].objective[agent] - base_runs[r].objective[agent];
                            const double delta = d - mean;
                            mean += delta / static_cast<double>(r + 1);
                            m2 += delta * (d - mean);
                        }
                        const double se = std::sqrt(m2 / static_cast<double>(reps - 1) / static_cast<double>(reps));
                        if (mean > best) {
                            best = mean;
                            best_se = se;
                        }
                    }
                }
            }
        }
        report.gaps.push_back(best);
        report.std_errors.push_back(best_se);
        report.proportion_errors.push_back(perr);
        report.mean_field_distances.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    return report;
}

MeanFieldObjective::MeanFieldObjective(const TimeGrid& grid, const SubPopulationSpec& sub, double q0,
                                       std::vector<double> drift)
    : grid_(grid), sub_(sub), q0_(q0), drift_(std::move(drift))
{
    if (drift_.size() != grid_.size())
        throw ValidationError("drift", "drift must be sampled at every grid point");
}

double MeanFieldObjective::operator()(std::span<const double> nu) const
{
    const std::size_t n = grid_.n_steps();
    if (nu.size() < n)
        throw ValidationError("nu", "one control per grid interval is required");
    const double dt = grid_.dt();
    double q = q0_;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double q_next = q + nu[i] * dt;
        total += 0.5 * dt * (q * drift_[i] + q_next * drift_[i + 1]);
        total -= sub_.a * nu[i] * nu[i] * dt;
        total -= 2.0 * sub_.psi * nu[i] * 0.5 * (q + q_next) * dt;
        total -= sub_.phi * 0.5 * dt * (q * q + q_next * q_next);
        q = q_next;
    }
    return total;
}

MeanFieldObjective make_mean_field_objective(const PopulationSpec& population, const EquilibriumSolution& eq,
                                             std::span<const double> alpha, std::size_t subpop)
{
    const Eigen::VectorXd p = population.proportions();
    std::vector<double> drift(eq.grid.size());
    for (std::size_t i = 0; i < eq.grid.size(); ++i)
        drift[i] = alpha[i] + population.lambda * p.dot(eq.nu_bar[i]);
    return MeanFieldObjective(eq.grid, population.subpops[subpop], eq.q_bar[0][static_cast<Eigen::Index>(subpop)],
                              std::move(drift));
}

GateauxResult gateaux_check(const MeanFieldObjective& objective, std::span<const double> nu_star,
                            const std::vector<std::vector<double>>& directions, double eps, double eps_second)
{
    const std::size_t n = objective.grid().n_steps();
    GateauxResult out;
    const double h0 = objective(nu_star);
    out.scale = std::abs(h0) / objective.grid().horizon();
    std::vector<double> plus(n);
    std::vector<double> minus(n);
    for (const auto& w : directions) {
        for (std::size_t i = 0; i < n; ++i) {
            plus[i] = nu_star[i] + eps * w[i];
            minus[i] = nu_star[i] - eps * w[i];
        }
        const double d = (objective(plus) - objective(minus)) / (2.0 * eps);
        for (std::size_t i = 0; i < n; ++i) {
            plus[i] = nu_star[i] + eps_second * w[i];
            minus[i] = nu_star[i] - eps_second * w[i];
        }
        const double s = (objective(plus) + objective(minus) - 2.0 * h0) / (eps_second * eps_second);
        out.derivatives.push_back(d);
        out.second_differences.push_back(s);
        out.max_abs_derivative = std::max(out.max_abs_derivative, std::abs(d));
    }
    return out;
}

std::vector<std::vector<double>> gateaux_basis(const TimeGrid& grid, std::size_t count)
{
    const std::size_t n = grid.n_steps();
    std::vector<std::vector<double>> out;
    for (std::size_t m = 0; m < count; ++m) {
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double mid = 0.5 * (grid[i] + grid[i + 1]);
            w[i] = m == 0 ? 1.0 : std::cos(static_cast<double>(m) * std::numbers::pi * mid / grid.horizon());
        }
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace mfgexec
