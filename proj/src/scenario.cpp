#include "mfgexec/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "mfgexec/filter.hpp"
#include "mfgexec/market_sim.hpp"
#include "mfgexec/nash_eval.hpp"
#include "mfgexec/output.hpp"

namespace mfgexec {

namespace {

namespace fs = std::filesystem;

class Writer
{
public:
    Writer(const ScenarioConfig& config) : dir_(config.run.output_dir), header_(header_line(emit_config_inline(config)))
    {
        fs::create_directories(dir_);
    }

    template <class F>
    void write(const std::string& name, F&& body)
    {
        const fs::path path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write '" + path.string() + "'");
        body(out, header_);
        out.flush();
        if (!out)
            throw std::runtime_error("failed writing '" + path.string() + "'");
        result.files.push_back(path.string());
    }

    ScenarioResult result;

private:
    fs::path dir_;
    std::string header_;
};

Eigen::VectorXd initial_means(const PopulationSpec& population)
{
    Eigen::VectorXd m0(static_cast<Eigen::Index>(population.size()));
    for (std::size_t k = 0; k < population.size(); ++k)
        m0[static_cast<Eigen::Index>(k)] = population.subpops[k].m0;
    return m0;
}

void run_equilibrium(const ScenarioConfig& cfg, const TimeGrid& grid, Writer& w)
{
    const auto& market = cfg.spec.market;
    std::vector<double> alpha;
    if (cfg.run.forced_theta) {
        alpha = mean_price_path(market, *cfg.run.forced_theta, grid).alpha;
    } else {
        alpha = alpha_forecast(initial_filter_state(market), market, grid.times()).values;
    }
    const auto system = MeanFieldSystem::build(cfg.spec.population, grid);
    const auto eq = solve_deterministic_equilibrium(system, alpha, initial_means(cfg.spec.population));
    w.write("equilibrium.csv", [&](std::ostream& out, const std::string& h) { write_equilibrium_csv(out, h, eq); });
}

GameOptions game_options(const ScenarioConfig& cfg)
{
    GameOptions go;
    go.filter_substeps = cfg.run.filter_substeps;
    go.record_agent_paths = cfg.run.record_paths;
    go.initial_cash = cfg.run.initial_cash;
    go.forced_theta = cfg.run.forced_theta;
    return go;
}

void run_simulate(const ScenarioConfig& cfg, const TimeGrid& grid, Writer& w)
{
    const GameEngine engine(cfg.spec, grid, game_options(cfg));
    const auto runs = run_replications(engine, cfg.run.seed, cfg.run.replications);
    w.write("equilibrium.csv",
            [&](std::ostream& out, const std::string& h) { write_equilibrium_csv(out, h, runs.front().equilibrium); });
    if (cfg.run.record_paths)
        for (std::size_t r = 0; r < runs.size(); ++r)
            w.write("paths_" + std::to_string(r) + ".csv", [&](std::ostream& out, const std::string& h) {
                write_paths_csv(out, h, runs[r], cfg.spec.market.theta_states);
            });
    std::vector<ObjectiveRow> rows;
    const std::size_t agents = cfg.spec.total_agents();
    for (std::size_t j = 0; j < agents; ++j) {
        double mean = 0.0;
        for (const auto& tr : runs)
            mean += tr.objective[j];
        rows.push_back({j, runs.front().agent_subpop[j], mean / static_cast<double>(runs.size())});
    }
    w.write("objectives.csv", [&](std::ostream& out, const std::string& h) { write_objectives_csv(out, h, rows); });
}

void run_nash_gap(const ScenarioConfig& cfg, const TimeGrid& grid, Writer& w)
{
    NashGapReport report;
    if (cfg.run.nash_method == kMethodBestResponse) {
        if (!cfg.run.forced_theta)
            throw ValidationError("run.forced_theta", "the deterministic best-response oracle needs a forced latent path");
        DeterministicScenario sc{cfg.spec.population, cfg.spec.market, *cfg.run.forced_theta,
                                 cfg.spec.n_agents_per_subpop, cfg.run.initial_cash};
        report = nash_gap_curve_deterministic(sc, cfg.run.nash_n_values, grid);
    } else {
        PerturbationOptions po;
        po.replications = cfg.run.replications;
        po.seed = cfg.run.seed;
        po.game = game_options(cfg);
        po.game.record_agent_paths = false;
        report = nash_gap_curve_perturbation(cfg.spec, cfg.run.nash_n_values, grid, po);
    }
    w.write("nash_gap.csv", [&](std::ostream& out, const std::string& h) { write_nash_gap_csv(out, h, report); });
}

void run_filter_demo(const ScenarioConfig& cfg, const TimeGrid& grid, Writer& w)
{
    const auto& market = cfg.spec.market;
    for (std::size_t r = 0; r < cfg.run.replications; ++r) {
        std::mt19937_64 rng(replication_seed(cfg.run.seed, r));
        const auto latent = simulate_latent_and_price(market, rng, cfg.run.forced_theta);
        const auto filtered = filter_latent_path(market, latent, grid, cfg.run.filter_substeps);
        GameTrajectory tr;
        tr.grid = grid;
        tr.s_path = filtered.f;
        tr.f_path = filtered.f;
        tr.theta_path = filtered.theta;
        tr.posterior_path = filtered.posterior;
        w.write("paths_" + std::to_string(r) + ".csv", [&](std::ostream& out, const std::string& h) {
            write_paths_csv(out, h, tr, market.theta_states);
        });
    }
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config)
{
    const ScenarioConfig cfg{validate(config.spec), config.run};
    const TimeGrid grid(cfg.spec.market.horizon, cfg.run.n_steps);
    Writer w(cfg);
    switch (cfg.run.mode) {
    case RunMode::equilibrium:
        run_equilibrium(cfg, grid, w);
        break;
    case RunMode::simulate:
        run_simulate(cfg, grid, w);
        break;
    case RunMode::nash_gap:
        run_nash_gap(cfg, grid, w);
        break;
    case RunMode::filter_demo:
        run_filter_demo(cfg, grid, w);
        break;
    }
    return w.result;
}

}  // namespace mfgexec
