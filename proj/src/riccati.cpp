#include "mfgexec/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace mfgexec {

namespace {

bool phi_negligible(const SubPopulationSpec& sub)
{
    return sub.phi < 1e-12 * sub.a;
}

double condition_number(const Eigen::MatrixXd& m)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    const double smallest = s[s.size() - 1];
    if (!(smallest > 0.0))
        return std::numeric_limits<double>::infinity();
    return s[0] / smallest;
}

struct PointResult
{
    Eigen::MatrixXd g2;
    double condition;
};

PointResult solve_point(const Eigen::MatrixXd& b, const Eigen::MatrixXd& terminal, double tau, Eigen::Index k)
{
    const Eigen::MatrixXd y = (tau * b).exp() * terminal;
    const Eigen::MatrixXd y1 = y.topRows(k);
    const Eigen::MatrixXd y2 = y.bottomRows(k);
    const double cond = condition_number(y1);
    // g2 = Y2 Y1^{-1}  <=>  Y1^T g2^T = Y2^T
    Eigen::MatrixXd g2 = y1.transpose().partialPivLu().solve(y2.transpose()).transpose();
    return {std::move(g2), cond};
}

RiccatiSolution solve_g2_impl(const PopulationSpec& population, const TimeGrid& grid, bool parallel)
{
    const Eigen::Index k = static_cast<Eigen::Index>(population.size());
    const Eigen::MatrixXd b = riccati_block_matrix(population);
    Eigen::MatrixXd terminal(2 * k, k);
    terminal.topRows(k) = Eigen::MatrixXd::Identity(k, k);
    terminal.bottomRows(k) = -2.0 * population.psi_matrix();

    const std::size_t n = grid.size();
    RiccatiSolution out;
    out.grid = grid;
    out.g2.resize(n);
    std::vector<double> cond(n, 1.0);

    const auto body = [&](std::size_t i) {
        if (i + 1 == n) {
            out.g2[i] = -2.0 * population.psi_matrix();
            return;
        }
        auto r = solve_point(b, terminal, grid.horizon() - grid[i], k);
        out.g2[i] = std::move(r.g2);
        cond[i] = r.condition;
    };

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            body(static_cast<std::size_t>(i));
    } else {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!(cond[i] <= kMaxY1Condition) || !out.g2[i].allFinite()) {
            std::ostringstream msg;
            msg << "Y1 is numerically singular at t=" << grid[i] << " (condition " << cond[i] << ")";
            throw NumericalError(msg.str());
        }
        out.y1_worst_condition = std::max(out.y1_worst_condition, cond[i]);
    }
    return out;
}

/// log of D(tau) = xi cosh(gamma tau) + psi sinh(gamma tau), up to a constant
/// factor; for negligible phi, D(tau) = a + psi tau.
double log_gap_envelope(const SubPopulationSpec& sub, double tau)
{
    if (phi_negligible(sub))
        return std::log(sub.a + sub.psi * tau);
    const double gamma = std::sqrt(sub.phi / sub.a);
    const double xi = std::sqrt(sub.phi * sub.a);
    const double decay = std::exp(-2.0 * gamma * tau);
    const double one_minus = -std::expm1(-2.0 * gamma * tau);
    return gamma * tau + std::log(0.5 * (xi * (1.0 + decay) + sub.psi * one_minus));
}

}  // namespace

Eigen::MatrixXd riccati_block_matrix(const PopulationSpec& population)
{
    const Eigen::Index k = static_cast<Eigen::Index>(population.size());
    const Eigen::MatrixXd inv2a = population.inverse_double_impact();
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2 * k, 2 * k);
    b.topRightCorner(k, k) = -inv2a;
    b.bottomLeftCorner(k, k) = -2.0 * population.phi_matrix();
    b.bottomRightCorner(k, k) = population.impact_coupling() * inv2a;
    return b;
}

RiccatiSolution solve_g2(const PopulationSpec& population, const TimeGrid& grid)
{
    return solve_g2_impl(population, grid, true);
}

RiccatiSolution solve_g2_serial(const PopulationSpec& population, const TimeGrid& grid)
{
    return solve_g2_impl(population, grid, false);
}

double h2_gain(const SubPopulationSpec& sub, double t, double horizon)
{
    const double tau = std::max(horizon - t, 0.0);
    if (phi_negligible(sub))
        return -2.0 * sub.a * sub.psi / (sub.a + sub.psi * tau);
    const double gamma = std::sqrt(sub.phi / sub.a);
    const double xi = std::sqrt(sub.phi * sub.a);
    const double decay = std::exp(-2.0 * gamma * tau);
    const double one_minus = -std::expm1(-2.0 * gamma * tau);
    const double num = sub.psi * (1.0 + decay) + xi * one_minus;
    const double den = xi * (1.0 + decay) + sub.psi * one_minus;
    return -2.0 * xi * num / den;
}

double h2_gap_factor(const SubPopulationSpec& sub, double t0, double t1, double horizon)
{
    const double tau0 = std::max(horizon - t0, 0.0);
    const double tau1 = std::max(horizon - t1, 0.0);
    return std::exp(log_gap_envelope(sub, tau1) - log_gap_envelope(sub, tau0));
}

OrderedExponentialTable::OrderedExponentialTable(TimeGrid grid, std::vector<Eigen::MatrixXd> factors)
    : grid_(std::move(grid)), factors_(std::move(factors))
{
    dim_ = factors_.empty() ? 0 : factors_.front().rows();
}

Eigen::MatrixXd OrderedExponentialTable::product(std::size_t i, std::size_t j) const
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(dim_, dim_);
    for (std::size_t l = i; l < j; ++l)
        out = out * factors_[l];
    return out;
}

OrderedExponentialTable ordered_exponential(const PopulationSpec& population,
                                            const std::vector<Eigen::MatrixXd>& g2_path,
                                            const TimeGrid& grid)
{
    if (g2_path.size() != grid.size())
        throw ValidationError("g2_path", "path length must match the grid");
    const Eigen::MatrixXd lambda = population.impact_coupling();
    const Eigen::MatrixXd inv2a = population.inverse_double_impact();
    std::vector<Eigen::MatrixXd> factors(grid.n_steps());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(grid.n_steps()); ++i) {
        const auto u = static_cast<std::size_t>(i);
        const Eigen::MatrixXd f0 = (lambda + g2_path[u]) * inv2a;
        const Eigen::MatrixXd f1 = (lambda + g2_path[u + 1]) * inv2a;
        factors[u] = (0.5 * grid.dt() * (f0 + f1)).exp();
    }
    return OrderedExponentialTable(grid, std::move(factors));
}

}  // namespace mfgexec
