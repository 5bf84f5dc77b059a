#include "mfgexec/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mfgexec {

namespace {

constexpr double kSumTolerance = 1e-12;

std::string indexed(const std::string& base, std::size_t i)
{
    return base + "[" + std::to_string(i) + "]";
}

void require_finite(double v, const std::string& field)
{
    if (!std::isfinite(v))
        throw ValidationError(field, "must be finite");
}

}  // namespace

Eigen::VectorXd PopulationSpec::proportions() const
{
    Eigen::VectorXd p(subpops.size());
    for (std::size_t k = 0; k < subpops.size(); ++k)
        p[k] = subpops[k].p;
    return p;
}

Eigen::MatrixXd PopulationSpec::inverse_double_impact() const
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size(), size());
    for (std::size_t k = 0; k < size(); ++k)
        m(k, k) = 1.0 / (2.0 * subpops[k].a);
    return m;
}

Eigen::MatrixXd PopulationSpec::phi_matrix() const
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size(), size());
    for (std::size_t k = 0; k < size(); ++k)
        m(k, k) = subpops[k].phi;
    return m;
}

Eigen::MatrixXd PopulationSpec::psi_matrix() const
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size(), size());
    for (std::size_t k = 0; k < size(); ++k)
        m(k, k) = subpops[k].psi;
    return m;
}

Eigen::MatrixXd PopulationSpec::impact_coupling() const
{
    Eigen::MatrixXd m(size(), size());
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = 0; j < size(); ++j)
            m(i, j) = lambda * subpops[j].p;
    return m;
}

double LatentMarketModel::up_intensity(double theta, double f) const noexcept
{
    return sigma + kappa * std::max(theta - f, 0.0);
}

double LatentMarketModel::down_intensity(double theta, double f) const noexcept
{
    return sigma + kappa * std::max(f - theta, 0.0);
}

double LatentMarketModel::total_intensity(double theta, double f) const noexcept
{
    return 2.0 * sigma + kappa * std::abs(theta - f);
}

TimeGrid::TimeGrid(double horizon, std::size_t n_steps)
    : horizon_(horizon), n_steps_(n_steps)
{
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw ValidationError("grid.horizon", "horizon must be positive");
    if (n_steps == 0)
        throw ValidationError("grid.n_steps", "at least one step is required");
    dt_ = horizon / static_cast<double>(n_steps);
    t_.resize(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i)
        t_[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
    t_.back() = horizon;
}

std::size_t TimeGrid::nearest(double t) const noexcept
{
    const double x = std::clamp(t / dt_, 0.0, static_cast<double>(n_steps_));
    return static_cast<std::size_t>(std::llround(x));
}

std::size_t GameSpec::total_agents() const noexcept
{
    return std::accumulate(n_agents_per_subpop.begin(), n_agents_per_subpop.end(), std::size_t{0});
}

std::vector<std::size_t> GameSpec::agent_subpops() const
{
    std::vector<std::size_t> out;
    out.reserve(total_agents());
    for (std::size_t k = 0; k < n_agents_per_subpop.size(); ++k)
        out.insert(out.end(), n_agents_per_subpop[k], k);
    return out;
}

void validate(const SubPopulationSpec& sub, const std::string& field)
{
    require_finite(sub.a, field + ".a");
    require_finite(sub.phi, field + ".phi");
    require_finite(sub.psi, field + ".psi");
    require_finite(sub.p, field + ".p");
    require_finite(sub.m0, field + ".m0");
    require_finite(sub.s0, field + ".s0");
    if (!(sub.a > 0.0))
        throw ValidationError(field + ".a", "temporary impact must be positive");
    if (sub.phi < 0.0)
        throw ValidationError(field + ".phi", "running inventory penalty must be nonnegative");
    if (!(sub.psi > 0.0))
        throw ValidationError(field + ".psi", "terminal liquidation penalty must be positive");
    if (!(sub.p > 0.0) || sub.p > 1.0)
        throw ValidationError(field + ".p", "population proportion must lie in (0,1]");
    if (sub.s0 < 0.0)
        throw ValidationError(field + ".s0", "initial inventory std. dev. must be nonnegative");
}

void validate(const PopulationSpec& population)
{
    if (population.subpops.empty())
        throw ValidationError("population.subpops", "at least one sub-population is required");
    require_finite(population.lambda, "population.lambda");
    double total = 0.0;
    for (std::size_t k = 0; k < population.subpops.size(); ++k) {
        validate(population.subpops[k], indexed("population.subpops", k));
        total += population.subpops[k].p;
    }
    // p in (0,1) strictly unless K = 1.
    if (population.subpops.size() > 1)
        for (std::size_t k = 0; k < population.subpops.size(); ++k)
            if (population.subpops[k].p >= 1.0)
                throw ValidationError(indexed("population.subpops", k) + ".p",
                                      "population proportion must lie in (0,1)");
    if (std::abs(total - 1.0) > kSumTolerance)
        throw ValidationError("population.subpops.p", "proportions must sum to 1");
}

void validate(const LatentMarketModel& market)
{
    const auto m = market.theta_states.size();
    if (m == 0)
        throw ValidationError("market.theta_states", "at least one latent state is required");
    if (market.generator.rows() != m || market.generator.cols() != m)
        throw ValidationError("market.generator", "generator must be M x M");
    if (market.prior.size() != m)
        throw ValidationError("market.prior", "prior must have M entries");
    if (!market.theta_states.allFinite())
        throw ValidationError("market.theta_states", "must be finite");
    if (!market.generator.allFinite())
        throw ValidationError("market.generator", "must be finite");
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j)
            if (i != j && market.generator(i, j) < 0.0)
                throw ValidationError("market.generator", "off-diagonal rates must be nonnegative");
        if (std::abs(market.generator.row(i).sum()) > kSumTolerance)
            throw ValidationError("market.generator", "rows must sum to zero");
    }
    if ((market.prior.array() < 0.0).any() || !market.prior.allFinite())
        throw ValidationError("market.prior", "prior entries must be nonnegative");
    if (std::abs(market.prior.sum() - 1.0) > kSumTolerance)
        throw ValidationError("market.prior", "prior must sum to 1");
    require_finite(market.kappa, "market.kappa");
    require_finite(market.sigma, "market.sigma");
    require_finite(market.alpha_tick, "market.alpha_tick");
    require_finite(market.f0, "market.f0");
    require_finite(market.horizon, "market.horizon");
    if (market.kappa < 0.0)
        throw ValidationError("market.kappa", "mean-reversion gain must be nonnegative");
    if (market.sigma < 0.0)
        throw ValidationError("market.sigma", "baseline intensity must be nonnegative");
    if (!(market.alpha_tick > 0.0))
        throw ValidationError("market.alpha_tick", "tick size must be positive");
    if (!(market.horizon > 0.0))
        throw ValidationError("market.horizon", "horizon must be positive");
}

GameSpec validate(const GameSpec& spec)
{
    validate(spec.population);
    validate(spec.market);
    if (spec.n_agents_per_subpop.size() != spec.population.size())
        throw ValidationError("n_agents_per_subpop", "one count per sub-population is required");
    for (std::size_t k = 0; k < spec.n_agents_per_subpop.size(); ++k)
        if (spec.n_agents_per_subpop[k] < 1)
            throw ValidationError(indexed("n_agents_per_subpop", k), "every sub-population needs an agent");
    if (spec.target_shift) {
        if (spec.target_shift->size() != spec.total_agents())
            throw ValidationError("target_shift", "one shift per agent is required");
        for (std::size_t j = 0; j < spec.target_shift->size(); ++j)
            require_finite((*spec.target_shift)[j], indexed("target_shift", j));
    }
    return spec;
}

std::vector<double> empirical_proportions(std::span<const std::size_t> n_agents_per_subpop)
{
    const auto total = std::accumulate(n_agents_per_subpop.begin(), n_agents_per_subpop.end(), std::size_t{0});
    std::vector<double> out;
    out.reserve(n_agents_per_subpop.size());
    for (auto n : n_agents_per_subpop)
        out.push_back(static_cast<double>(n) / static_cast<double>(total));
    return out;
}

std::vector<std::size_t> proportional_counts(std::span<const double> proportions, std::size_t n_total)
{
    const std::size_t k_count = proportions.size();
    if (n_total < k_count)
        throw ValidationError("n_total", "need at least one agent per sub-population");
    std::vector<std::size_t> counts(k_count);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
        const double exact = proportions[k] * static_cast<double>(n_total);
        counts[k] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(exact)));
        assigned += counts[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t r = 0; assigned < n_total; r = (r + 1) % k_count, ++assigned)
        ++counts[remainders[r].second];
    while (assigned > n_total) {
        auto it = std::max_element(counts.begin(), counts.end());
        --*it;
        --assigned;
    }
    return counts;
}

}  // namespace mfgexec
