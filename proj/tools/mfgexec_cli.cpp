#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfgexec/config.hpp"
#include "mfgexec/output.hpp"
#include "mfgexec/scenario.hpp"

namespace {

struct Overrides
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> reps;
};

void add_common(CLI::App* sub, Overrides& o)
{
    sub->add_option("--config", o.config, "scenario configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "random seed (overrides run.seed)");
    sub->add_option("--out", o.out, "output directory (overrides run.output_dir)");
    sub->add_option("--steps", o.steps, "grid steps (overrides run.n_steps)")->check(CLI::PositiveNumber);
    sub->add_option("--reps", o.reps, "replications (overrides run.replications)")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mean-field-game optimal execution engine"};
    app.set_version_flag("--version", mfgexec::engine_version());
    app.require_subcommand(1);

    Overrides o;
    const std::pair<const char*, mfgexec::RunMode> modes[] = {
        {"equilibrium", mfgexec::RunMode::equilibrium},
        {"simulate", mfgexec::RunMode::simulate},
        {"nash-gap", mfgexec::RunMode::nash_gap},
        {"filter-demo", mfgexec::RunMode::filter_demo},
    };
    for (const auto& [name, mode] : modes)
        add_common(app.add_subcommand(name, std::string("run the ") + name + " mode"), o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        mfgexec::ScenarioConfig cfg = mfgexec::parse_config(o.config);
        for (const auto& [name, mode] : modes)
            if (app.got_subcommand(name))
                cfg.run.mode = mode;
        if (o.seed)
            cfg.run.seed = *o.seed;
        if (o.out)
            cfg.run.output_dir = *o.out;
        if (o.steps)
            cfg.run.n_steps = *o.steps;
        if (o.reps)
            cfg.run.replications = *o.reps;
        const auto result = mfgexec::run_scenario(cfg);
        for (const auto& f : result.files)
            std::cout << f << '\n';
        return 0;
    } catch (const mfgexec::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 1;
    } catch (const mfgexec::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
