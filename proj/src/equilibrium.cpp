#include "mfgexec/equilibrium.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace mfgexec {

namespace {

double trapezoid_weight(std::size_t i, std::size_t j, std::size_t n, double dt)
{
    return (j == i || j == n) ? 0.5 * dt : dt;
}

template <class F>
Eigen::MatrixXd simpson_recurse(const F& f, double lo, double hi, const Eigen::MatrixXd& flo,
                                const Eigen::MatrixXd& fmid, const Eigen::MatrixXd& fhi,
                                const Eigen::MatrixXd& whole, double tol, int depth)
{
    const double mid = 0.5 * (lo + hi);
    const Eigen::MatrixXd fl = f(0.5 * (lo + mid));
    const Eigen::MatrixXd fr = f(0.5 * (mid + hi));
    const Eigen::MatrixXd left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
    const Eigen::MatrixXd right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
    const Eigen::MatrixXd delta = left + right - whole;
    if (depth <= 0 || delta.cwiseAbs().maxCoeff() <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_recurse(f, lo, mid, flo, fl, fmid, left, 0.5 * tol, depth - 1) +
           simpson_recurse(f, mid, hi, fmid, fr, fhi, right, 0.5 * tol, depth - 1);
}

/// Adaptive Simpson quadrature of a matrix-valued function.
template <class F>
Eigen::MatrixXd adaptive_simpson(const F& f, double lo, double hi, double tol, int max_depth = 48)
{
    const Eigen::MatrixXd flo = f(lo);
    const Eigen::MatrixXd fmid = f(0.5 * (lo + hi));
    const Eigen::MatrixXd fhi = f(hi);
    const Eigen::MatrixXd whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    return simpson_recurse(f, lo, hi, flo, fmid, fhi, whole, tol, max_depth);
}

void accumulate_kernel_row(const OrderedExponentialTable& table, const Eigen::MatrixXd& weights, std::size_t i,
                           Eigen::MatrixXd& out)
{
    const std::size_t n = table.grid().n_steps();
    const double dt = table.grid().dt();
    const Eigen::Index k = table.dimension();
    out = Eigen::MatrixXd::Zero(k, weights.cols());
    if (i == n)
        return;
    Eigen::MatrixXd eta = Eigen::MatrixXd::Identity(k, k);
    for (std::size_t j = i; j <= n; ++j) {
        const Eigen::VectorXd v = eta.rowwise().sum();
        out.noalias() += trapezoid_weight(i, j, n, dt) * v * weights.row(static_cast<Eigen::Index>(j - i));
        if (j < n)
            eta = eta * table.factor(j);
    }
}

void build_kernel(const OrderedExponentialTable& table, const Eigen::MatrixXd& weights, bool parallel,
                  std::vector<Eigen::MatrixXd>& k)
{
    const std::size_t n = table.grid().n_steps();
    if (static_cast<std::size_t>(weights.rows()) < n + 1)
        throw ValidationError("weights", "one forecast weight row per lag 0..n is required");
    k.resize(n + 1);
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 8)
        for (std::ptrdiff_t i = 0; i <= static_cast<std::ptrdiff_t>(n); ++i)
            accumulate_kernel_row(table, weights, static_cast<std::size_t>(i), k[static_cast<std::size_t>(i)]);
    } else {
        for (std::size_t i = 0; i <= n; ++i)
            accumulate_kernel_row(table, weights, i, k[i]);
    }
}

}  // namespace

Eigen::VectorXd compute_g1(const OrderedExponentialTable& table, std::size_t i, std::span<const double> forecast)
{
    const std::size_t n = table.grid().n_steps();
    const double dt = table.grid().dt();
    const Eigen::Index k = table.dimension();
    if (forecast.size() < n - i + 1)
        throw ValidationError("forecast", "forecast must cover [t_i, T]");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
    if (i >= n)
        return out;
    for (std::size_t j = i; j <= n; ++j) {
        const Eigen::MatrixXd eta = table.product(i, j);
        out += trapezoid_weight(i, j, n, dt) * forecast[j - i] * eta.rowwise().sum();
    }
    return out;
}

std::vector<Eigen::VectorXd> compute_g1_path(const OrderedExponentialTable& table, std::span<const double> alpha)
{
    const std::size_t n = table.grid().n_steps();
    const double dt = table.grid().dt();
    const Eigen::Index k = table.dimension();
    if (alpha.size() != n + 1)
        throw ValidationError("alpha", "alpha path length must match the grid");
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
    std::vector<Eigen::VectorXd> g1(n + 1, Eigen::VectorXd::Zero(k));
    // u_i = sum_{j > i} w_j eta(t_i, t_j) 1 A_j
    Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
    for (std::size_t i = n; i-- > 0;) {
        const double w_next = (i + 1 == n) ? 0.5 * dt : dt;
        u = table.factor(i) * (w_next * alpha[i + 1] * ones + u);
        g1[i] = 0.5 * dt * alpha[i] * ones + u;
    }
    return g1;
}

G1Kernel G1Kernel::build(const OrderedExponentialTable& table, const Eigen::MatrixXd& weights)
{
    G1Kernel out;
    build_kernel(table, weights, true, out.k_);
    return out;
}

G1Kernel G1Kernel::build_serial(const OrderedExponentialTable& table, const Eigen::MatrixXd& weights)
{
    G1Kernel out;
    build_kernel(table, weights, false, out.k_);
    return out;
}

Eigen::VectorXd G1Kernel::apply(std::size_t i, const Eigen::VectorXd& posterior, double f) const
{
    const Eigen::MatrixXd& k = k_[i];
    const Eigen::Index m = posterior.size();
    return k.leftCols(m) * posterior + k.col(m) * f;
}

MeanFieldPropagator::MeanFieldPropagator(const PopulationSpec& population, const RiccatiSolution& riccati)
    : inv2a_(population.inverse_double_impact()), g2_(riccati.g2)
{
    const TimeGrid& grid = riccati.grid;
    const std::size_t n = grid.n_steps();
    const Eigen::Index k = static_cast<Eigen::Index>(population.size());
    const Eigen::MatrixXd b = riccati_block_matrix(population);
    phi_.resize(n);
    gamma0_.resize(n);
    gamma1_.resize(n);

#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double t0 = grid[i];
        const double t1 = grid[i + 1];
        const double dt = t1 - t0;
        Eigen::MatrixXd end(2 * k, k);
        end.topRows(k) = Eigen::MatrixXd::Identity(k, k);
        end.bottomRows(k) = riccati.g2[i + 1];
        // Phi(t1, s) = Z1(s)^{-1} with Z(s) = exp((t1 - s) B) (I; g2(t1)).
        const auto flow_from = [&](double s) -> Eigen::MatrixXd {
            const Eigen::MatrixXd z = ((t1 - s) * b).exp() * end;
            return z.topRows(k).inverse();
        };
        const auto integrand = [&](double s) -> Eigen::MatrixXd {
            const Eigen::MatrixXd phi = flow_from(s);
            Eigen::MatrixXd out(k, 2 * k);
            out.leftCols(k) = phi;
            out.rightCols(k) = phi * ((s - t0) / dt);
            return out;
        };
        phi_[i] = flow_from(t0);
        const Eigen::MatrixXd integral = adaptive_simpson(integrand, t0, t1, 1e-13 * dt);
        gamma0_[i] = integral.leftCols(k) * inv2a_;
        gamma1_[i] = integral.rightCols(k) * inv2a_;
    }
}

Eigen::VectorXd MeanFieldPropagator::advance(std::size_t i, const Eigen::VectorXd& q_bar,
                                             const Eigen::VectorXd& g1) const
{
    return phi_[i] * q_bar + gamma0_[i] * g1;
}

Eigen::VectorXd MeanFieldPropagator::advance(std::size_t i, const Eigen::VectorXd& q_bar, const Eigen::VectorXd& g1,
                                             const Eigen::VectorXd& g1_next) const
{
    return phi_[i] * q_bar + gamma0_[i] * g1 + gamma1_[i] * (g1_next - g1);
}

Eigen::VectorXd MeanFieldPropagator::instantaneous_rate(std::size_t i, const Eigen::VectorXd& q_bar,
                                                        const Eigen::VectorXd& g1) const
{
    return inv2a_ * (g1 + g2_[i] * q_bar);
}

MeanFieldStep advance_mean_field(const MeanFieldPropagator& propagator, std::size_t i, const Eigen::VectorXd& q_bar,
                                 const Eigen::VectorXd& g1)
{
    return {propagator.instantaneous_rate(i, q_bar, g1), propagator.advance(i, q_bar, g1)};
}

double agent_control(const AgentState& agent, double nu_bar_k, double q_bar_k, double h2_k, double a_k)
{
    return nu_bar_k + h2_k / (2.0 * a_k) * (agent.q - q_bar_k);
}

MeanFieldSystem MeanFieldSystem::build(const PopulationSpec& population, const TimeGrid& grid)
{
    validate(population);
    MeanFieldSystem s;
    s.population = population;
    s.grid = grid;
    s.riccati = solve_g2(population, grid);
    s.table = ordered_exponential(population, s.riccati.g2, grid);
    s.propagator = MeanFieldPropagator(population, s.riccati);

    const std::size_t n = grid.n_steps();
    const Eigen::Index k = static_cast<Eigen::Index>(population.size());
    const double horizon = grid.horizon();
    s.h2.assign(n + 1, Eigen::VectorXd(k));
    s.gap_ratio.assign(n, Eigen::VectorXd(k));
    s.held_gain.assign(n, Eigen::VectorXd(k));
    for (std::size_t i = 0; i <= n; ++i)
        for (Eigen::Index c = 0; c < k; ++c)
            s.h2[i][c] = h2_gain(population.subpops[static_cast<std::size_t>(c)], grid[i], horizon);
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < k; ++c) {
            const auto& sub = population.subpops[static_cast<std::size_t>(c)];
            const double rho = h2_gap_factor(sub, grid[i], grid[i + 1], horizon);
            s.gap_ratio[i][c] = rho;
            s.held_gain[i][c] = (rho - 1.0) / grid.dt();
        }
    }
    return s;
}

EquilibriumSolution solve_deterministic_equilibrium(const MeanFieldSystem& system, std::span<const double> alpha,
                                                    const Eigen::VectorXd& m0)
{
    const std::size_t n = system.grid.n_steps();
    EquilibriumSolution out;
    out.grid = system.grid;
    out.g1 = compute_g1_path(system.table, alpha);
    out.g2 = system.riccati.g2;
    out.h2 = system.h2;
    out.q_bar.resize(n + 1);
    out.nu_bar.resize(n + 1);
    out.nu_bar_held.resize(n + 1);
    out.q_bar[0] = m0;
    for (std::size_t i = 0; i < n; ++i) {
        out.q_bar[i + 1] = system.propagator.advance(i, out.q_bar[i], out.g1[i], out.g1[i + 1]);
        out.nu_bar_held[i] = (out.q_bar[i + 1] - out.q_bar[i]) / system.grid.dt();
    }
    out.nu_bar_held[n] = out.nu_bar_held[n - 1];
    for (std::size_t i = 0; i <= n; ++i)
        out.nu_bar[i] = system.propagator.instantaneous_rate(i, out.q_bar[i], out.g1[i]);
    return out;
}

}  // namespace mfgexec
