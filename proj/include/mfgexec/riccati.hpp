#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mfgexec/model.hpp"

namespace mfgexec {

/// Largest Y1 condition number accepted by solve_g2.
inline constexpr double kMaxY1Condition = 1e12;

struct RiccatiSolution
{
    TimeGrid grid;
    std::vector<Eigen::MatrixXd> g2;   ///< one K x K matrix per grid point
    /// Worst (largest) 2-norm condition number of Y1 seen on the grid.
    double y1_worst_condition = 1.0;
};

/// Block matrix B = [[0, -(2a)^-1], [-2 phi, Lambda (2a)^-1]] of size 2K.
Eigen::MatrixXd riccati_block_matrix(const PopulationSpec& population);

/// g2(t) = Y2 Y1^{-1} with Y = exp((T - t) B) (I; -2 Psi), evaluated at every
/// grid point. Grid points are independent and run in parallel.
RiccatiSolution solve_g2(const PopulationSpec& population, const TimeGrid& grid);

/// Single-threaded reference for solve_g2; results are bitwise identical.
RiccatiSolution solve_g2_serial(const PopulationSpec& population, const TimeGrid& grid);

/// Closed-form scalar gain h2 of one sub-population at time t on [0, horizon].
double h2_gain(const SubPopulationSpec& sub, double t, double horizon);

/// exp((1/2a) int_{t0}^{t1} h2(u) du), the exact decay factor of the gap
/// between an agent's inventory and its sub-population mean field.
double h2_gap_factor(const SubPopulationSpec& sub, double t0, double t1, double horizon);

/// Product-integral of f(s) = (Lambda + g2(s)) (2a)^{-1} on the grid. Interval
/// factor i is exp(dt (f_i + f_{i+1}) / 2); eta(t_i, t_j) is the ordered
/// product factor_i * ... * factor_{j-1}, so that d eta = eta f du.
class OrderedExponentialTable
{
public:
    OrderedExponentialTable() = default;
    OrderedExponentialTable(TimeGrid grid, std::vector<Eigen::MatrixXd> factors);

    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<Eigen::MatrixXd>& factors() const noexcept { return factors_; }
    const Eigen::MatrixXd& factor(std::size_t i) const { return factors_[i]; }
    Eigen::Index dimension() const noexcept { return dim_; }

    /// eta(t_i, t_j) for i <= j; identity when i == j.
    Eigen::MatrixXd product(std::size_t i, std::size_t j) const;

private:
    TimeGrid grid_;
    std::vector<Eigen::MatrixXd> factors_;
    Eigen::Index dim_ = 0;
};

OrderedExponentialTable ordered_exponential(const PopulationSpec& population,
                                            const std::vector<Eigen::MatrixXd>& g2_path,
                                            const TimeGrid& grid);

}  // namespace mfgexec
