#include "mfgexec/output.hpp"

#include <cstdio>

namespace mfgexec {

std::string engine_version()
{
    return std::string("mfgexec ") + MFGEXEC_VERSION + " (" + MFGEXEC_GIT_DESCRIBE + ")";
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string header_line(const std::string& inline_config)
{
    return "# " + engine_version() + " config: " + inline_config;
}

void write_equilibrium_csv(std::ostream& out, const std::string& header, const EquilibriumSolution& eq)
{
    const Eigen::Index k = eq.q_bar.empty() ? 0 : eq.q_bar.front().size();
    out << header << '\n' << "t";
    for (Eigen::Index a = 0; a < k; ++a)
        out << ",g1_" << a;
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b)
            out << ",g2_" << a << '_' << b;
    for (Eigen::Index a = 0; a < k; ++a)
        out << ",nu_bar_" << a;
    for (Eigen::Index a = 0; a < k; ++a)
        out << ",q_bar_" << a;
    for (Eigen::Index a = 0; a < k; ++a)
        out << ",h2_" << a;
    out << '\n';
    for (std::size_t i = 0; i < eq.grid.size(); ++i) {
        out << format_double(eq.grid[i]);
        for (Eigen::Index a = 0; a < k; ++a)
            out << ',' << format_double(eq.g1[i][a]);
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = 0; b < k; ++b)
                out << ',' << format_double(eq.g2[i](a, b));
        for (Eigen::Index a = 0; a < k; ++a)
            out << ',' << format_double(eq.nu_bar[i][a]);
        for (Eigen::Index a = 0; a < k; ++a)
            out << ',' << format_double(eq.q_bar[i][a]);
        for (Eigen::Index a = 0; a < k; ++a)
            out << ',' << format_double(eq.h2[i][a]);
        out << '\n';
    }
}

void write_paths_csv(std::ostream& out, const std::string& header, const GameTrajectory& tr,
                     const Eigen::VectorXd& theta_states)
{
    const Eigen::Index m = theta_states.size();
    const std::size_t agents = tr.q_path.size();
    out << header << '\n' << "t,S,F,theta";
    for (Eigen::Index s = 0; s < m; ++s)
        out << ",posterior_" << s;
    for (std::size_t j = 0; j < agents; ++j)
        out << ",q_" << j;
    for (std::size_t j = 0; j < agents; ++j)
        out << ",nu_" << j;
    out << '\n';
    for (std::size_t i = 0; i < tr.grid.size(); ++i) {
        out << format_double(tr.grid[i]) << ',' << format_double(tr.s_path[i]) << ',' << format_double(tr.f_path[i])
            << ',' << format_double(theta_states[static_cast<Eigen::Index>(tr.theta_path[i])]);
        for (Eigen::Index s = 0; s < m; ++s)
            out << ',' << format_double(tr.posterior_path[i][s]);
        for (std::size_t j = 0; j < agents; ++j)
            out << ',' << format_double(tr.q_path[j][i]);
        for (std::size_t j = 0; j < agents; ++j)
            out << ',' << format_double(tr.nu_path[j][i]);
        out << '\n';
    }
}

void write_objectives_csv(std::ostream& out, const std::string& header, const std::vector<ObjectiveRow>& rows)
{
    out << header << '\n' << "agent,subpop,H_j\n";
    for (const auto& r : rows)
        out << r.agent << ',' << r.subpop << ',' << format_double(r.value) << '\n';
}

void write_nash_gap_csv(std::ostream& out, const std::string& header, const NashGapReport& report)
{
    out << header << '\n' << "N,gap,stderr,method\n";
    for (std::size_t r = 0; r < report.n_values.size(); ++r)
        out << report.n_values[r] << ',' << format_double(report.gaps[r]) << ','
            << format_double(report.std_errors[r]) << ',' << report.methods[r] << '\n';
}

}  // namespace mfgexec
