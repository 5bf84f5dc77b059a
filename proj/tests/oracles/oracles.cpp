#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace oracle {

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

double up_rate(const mfgexec::LatentMarketModel& m, double theta, double f)
{
    return m.sigma + m.kappa * std::max(theta - f, 0.0);
}

double down_rate(const mfgexec::LatentMarketModel& m, double theta, double f)
{
    return m.sigma + m.kappa * std::max(f - theta, 0.0);
}

double exponential(std::mt19937_64& rng, double rate)
{
    if (rate <= 0.0)
        return std::numeric_limits<double>::infinity();
    std::exponential_distribution<double> d(rate);
    return d(rng);
}

}  // namespace

std::vector<Eigen::MatrixXd> rk4_backward(const std::function<Eigen::MatrixXd(double, const Eigen::MatrixXd&)>& f,
                                          const Eigen::MatrixXd& y_end, double t_end,
                                          const std::vector<double>& times, double rel_tol)
{
    // Integrate in s = t_end - t so that the step is positive.
    auto g = [&](double s, const Eigen::MatrixXd& y) -> Eigen::MatrixXd { return -f(t_end - s, y); };
    auto step = [&](double s, const Eigen::MatrixXd& y, double h) -> Eigen::MatrixXd {
        const Eigen::MatrixXd k1 = g(s, y);
        const Eigen::MatrixXd k2 = g(s + h / 2, y + h / 2 * k1);
        const Eigen::MatrixXd k3 = g(s + h / 2, y + h / 2 * k2);
        const Eigen::MatrixXd k4 = g(s + h, y + h * k3);
        return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    };

    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return times[x] > times[y]; });

    std::vector<Eigen::MatrixXd> out(times.size());
    Eigen::MatrixXd y = y_end;
    double s = 0.0;
    double h = 1e-10;
    for (std::size_t idx : order) {
        const double target = t_end - times[idx];
        if (target < -1e-15)
            throw std::invalid_argument("rk4_backward: time beyond t_end");
        while (s < target - 1e-15) {
            const double hh = std::min(h, target - s);
            const Eigen::MatrixXd full = step(s, y, hh);
            const Eigen::MatrixXd half = step(s + hh / 2, step(s, y, hh / 2), hh / 2);
            const double err = max_abs(half - full) / 15.0;
            const double scale = std::max(max_abs(half), 1e-300);
            if (err <= rel_tol * scale) {
                y = half + (half - full) / 15.0;
                s += hh;
                const double grow = err > 0 ? 0.9 * std::pow(rel_tol * scale / err, 0.2) : 4.0;
                if (hh == h)
                    h *= std::clamp(grow, 0.2, 4.0);
            } else {
                h = hh * std::clamp(0.9 * std::pow(rel_tol * scale / err, 0.2), 0.1, 0.9);
                if (h < 1e-300)
                    throw std::runtime_error("rk4_backward: step underflow");
            }
        }
        out[idx] = y;
    }
    return out;
}

std::vector<Eigen::MatrixXd> riccati_rk4(const mfgexec::PopulationSpec& population, const std::vector<double>& times,
                                         double horizon, double rel_tol)
{
    const auto k = static_cast<Eigen::Index>(population.subpops.size());
    double n_total = 0.0;
    for (const auto& s : population.subpops)
        n_total += s.p;
    Eigen::MatrixXd lam(k, k), inv2a = Eigen::MatrixXd::Zero(k, k), phi = Eigen::MatrixXd::Zero(k, k),
                              term = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& s = population.subpops[static_cast<std::size_t>(i)];
        inv2a(i, i) = 1.0 / (2.0 * s.a);
        phi(i, i) = s.phi;
        term(i, i) = -2.0 * s.psi;
        for (Eigen::Index j = 0; j < k; ++j)
            lam(i, j) = population.lambda * population.subpops[static_cast<std::size_t>(j)].p / n_total;
    }
    auto rhs = [&](double, const Eigen::MatrixXd& g) -> Eigen::MatrixXd {
        return -((lam + g) * inv2a * g - 2.0 * phi);
    };
    return rk4_backward(rhs, term, horizon, times, rel_tol);
}

double h2_rk4(double a, double phi, double psi, double t, double horizon, double rel_tol)
{
    auto rhs = [&](double, const Eigen::MatrixXd& h) -> Eigen::MatrixXd {
        Eigen::MatrixXd d(1, 1);
        d(0, 0) = -(h(0, 0) * h(0, 0) / (2.0 * a) - 2.0 * phi);
        return d;
    };
    Eigen::MatrixXd end(1, 1);
    end(0, 0) = -2.0 * psi;
    return rk4_backward(rhs, end, horizon, {t}, rel_tol).front()(0, 0);
}

namespace {

double gl5(const std::function<double(double)>& f, double lo, double hi)
{
    static const double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                0.9061798459386640};
    static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                                0.2369268850561891};
    const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    double sum = 0.0;
    for (int i = 0; i < 5; ++i)
        sum += w[i] * f(c + r * x[i]);
    return sum * r;
}

double gl_recurse(const std::function<double(double)>& f, double lo, double hi, double whole, double tol, int depth)
{
    const double mid = 0.5 * (lo + hi);
    const double left = gl5(f, lo, mid), right = gl5(f, mid, hi);
    if (depth > 40 || std::abs(left + right - whole) <= tol)
        return left + right;
    return gl_recurse(f, lo, mid, left, tol / 2, depth + 1) + gl_recurse(f, mid, hi, right, tol / 2, depth + 1);
}

}  // namespace

double gauss_legendre(const std::function<double(double)>& f, double lo, double hi, double tol)
{
    return gl_recurse(f, lo, hi, gl5(f, lo, hi), tol, 0);
}

ParticleFilter::ParticleFilter(const mfgexec::LatentMarketModel& market, std::size_t particles, std::uint64_t seed)
    : market_(market), f_(market.f0), rng_(seed)
{
    std::vector<double> prior(market.prior.data(), market.prior.data() + market.prior.size());
    std::discrete_distribution<std::size_t> init(prior.begin(), prior.end());
    particles_.resize(particles);
    for (auto& p : particles_) {
        p.state = init(rng_);
        p.next_switch = draw_holding(p.state);
        p.log_weight = 0.0;
    }
}

double ParticleFilter::draw_holding(std::size_t state)
{
    return exponential(rng_, -market_.generator(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(state)));
}

std::size_t ParticleFilter::draw_next(std::size_t state)
{
    const auto m = market_.theta_states.size();
    std::vector<double> w(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j)
        w[static_cast<std::size_t>(j)] =
            j == static_cast<Eigen::Index>(state) ? 0.0 : market_.generator(static_cast<Eigen::Index>(state), j);
    std::discrete_distribution<std::size_t> d(w.begin(), w.end());
    return d(rng_);
}

void ParticleFilter::advance(double t)
{
    for (auto& p : particles_) {
        double now = t_;
        // next_switch is absolute time of the next chain switch
        if (p.next_switch < now)
            throw std::logic_error("particle switch in the past");
        while (p.next_switch <= t) {
            const double theta = market_.theta_states[static_cast<Eigen::Index>(p.state)];
            p.log_weight -= (up_rate(market_, theta, f_) + down_rate(market_, theta, f_)) * (p.next_switch - now);
            now = p.next_switch;
            p.state = draw_next(p.state);
            p.next_switch = now + draw_holding(p.state);
        }
        const double theta = market_.theta_states[static_cast<Eigen::Index>(p.state)];
        p.log_weight -= (up_rate(market_, theta, f_) + down_rate(market_, theta, f_)) * (t - now);
    }
    t_ = t;
}

void ParticleFilter::observe_jump(mfgexec::JumpDirection direction)
{
    for (auto& p : particles_) {
        const double theta = market_.theta_states[static_cast<Eigen::Index>(p.state)];
        const double rate =
            direction == mfgexec::JumpDirection::up ? up_rate(market_, theta, f_) : down_rate(market_, theta, f_);
        p.log_weight += std::log(rate);
    }
    f_ += direction == mfgexec::JumpDirection::up ? market_.alpha_tick : -market_.alpha_tick;
}

std::vector<double> ParticleFilter::normalized_weights() const
{
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& p : particles_)
        top = std::max(top, p.log_weight);
    std::vector<double> w(particles_.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < particles_.size(); ++i) {
        w[i] = std::exp(particles_[i].log_weight - top);
        sum += w[i];
    }
    for (double& x : w)
        x /= sum;
    return w;
}

Estimate ParticleFilter::posterior(std::size_t m) const
{
    const auto w = normalized_weights();
    double mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        mean += particles_[i].state == m ? w[i] : 0.0;
    // Delta method for the self-normalized estimator.
    double var = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = (particles_[i].state == m ? 1.0 : 0.0) - mean;
        var += w[i] * w[i] * d * d;
    }
    return {mean, std::sqrt(var)};
}

double ParticleFilter::effective_sample_size() const
{
    const auto w = normalized_weights();
    double s2 = 0.0;
    for (double x : w)
        s2 += x * x;
    return 1.0 / s2;
}

Estimate ssa_alpha_mean(const mfgexec::LatentMarketModel& market, std::size_t state, double f0, double horizon,
                        std::size_t paths, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const auto m = market.theta_states.size();
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t r = 0; r < paths; ++r) {
        std::size_t s = state;
        double f = f0, t = 0.0;
        for (;;) {
            const double theta = market.theta_states[static_cast<Eigen::Index>(s)];
            const double sw = -market.generator(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
            const double up = up_rate(market, theta, f), dn = down_rate(market, theta, f);
            const double total = sw + up + dn;
            t += exponential(rng, total);
            if (t > horizon)
                break;
            const double pick = u01(rng) * total;
            if (pick < sw) {
                double acc = 0.0, target = u01(rng) * sw;
                for (Eigen::Index j = 0; j < m; ++j) {
                    if (j == static_cast<Eigen::Index>(s))
                        continue;
                    acc += market.generator(static_cast<Eigen::Index>(s), j);
                    if (target < acc) {
                        s = static_cast<std::size_t>(j);
                        break;
                    }
                }
            } else if (pick < sw + up) {
                f += market.alpha_tick;
            } else {
                f -= market.alpha_tick;
            }
        }
        const double a = market.alpha_tick * market.kappa * (market.theta_states[static_cast<Eigen::Index>(s)] - f);
        sum += a;
        sum2 += a * a;
    }
    const double n = static_cast<double>(paths);
    const double mean = sum / n;
    return {mean, std::sqrt(std::max(sum2 / n - mean * mean, 0.0) / n)};
}

double DiscreteExecution::objective(const Eigen::VectorXd& nu) const
{
    const auto n = nu.size();
    double x = cash0, q = q0, penalty = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = base[static_cast<std::size_t>(i)] + own_impact * q;
        x -= (s + a * nu[i]) * nu[i] * dt;
        penalty += q * q * dt;
        q += nu[i] * dt;
    }
    const double s_end = base[static_cast<std::size_t>(n)] + own_impact * q;
    return x + q * (s_end - psi * q) - phi * penalty;
}

Eigen::VectorXd DiscreteExecution::maximize() const
{
    // H(nu) = const + g^T nu + nu^T Q nu / 2 with q = q0 + L nu.
    const auto n = static_cast<Eigen::Index>(base.size()) - 1;
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index m = 0; m < i; ++m)
            l(i, m) = dt;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i)
        b[i] = base[static_cast<std::size_t>(i)];
    const double b_end = base[static_cast<std::size_t>(n)];

    Eigen::VectorXd g = -dt * b - dt * own_impact * q0 * ones;
    Eigen::MatrixXd hess = -dt * own_impact * (l + l.transpose());
    hess.diagonal().array() -= 2.0 * a * dt;
    g += (dt * b_end + 2.0 * (own_impact - psi) * q0 * dt) * ones;
    hess += 2.0 * (own_impact - psi) * dt * dt * ones * ones.transpose();
    g -= 2.0 * phi * dt * q0 * (l.transpose() * ones);
    hess -= 2.0 * phi * dt * l.transpose() * l;
    return (-hess).ldlt().solve(g);
}

}  // namespace oracle
