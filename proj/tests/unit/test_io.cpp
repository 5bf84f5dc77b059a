#include <catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfgexec/config.hpp"
#include "mfgexec/output.hpp"
#include "mfgexec/scenario.hpp"
#include "support.hpp"

using namespace mfgexec;
namespace fs = std::filesystem;

namespace {

const std::string kConfig = std::string(MFGEXEC_CONFIG_DIR) + "/two_subpop_switch.cfg";

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string replace(std::string text, const std::string& from, const std::string& to)
{
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    return text.replace(at, from.size(), to);
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("mfgexec_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(MFGEXEC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ScenarioConfig small_config(RunMode mode, const fs::path& out)
{
    auto cfg = parse_config(kConfig);
    cfg.run.mode = mode;
    cfg.run.n_steps = 100;
    cfg.run.output_dir = out.string();
    return cfg;
}

}  // namespace

TEST_CASE("shipped configuration encodes the two-population scenario", "[io][config]")
{
    const auto cfg = parse_config(kConfig);
    const auto expect = testdata::reference_spec(20, 10);
    CHECK(cfg.spec.population == expect.population);
    const auto& m = cfg.spec.market;
    CHECK(m.theta_states == expect.market.theta_states);
    CHECK(m.generator == expect.market.generator);
    CHECK(m.prior == expect.market.prior);
    CHECK(m.kappa == 360.0);
    CHECK(m.sigma == 120.24);
    CHECK(m.alpha_tick == 0.01);
    CHECK(m.f0 == 5.0);
    CHECK(m.horizon == 1.0);
    CHECK(cfg.spec.n_agents_per_subpop == expect.n_agents_per_subpop);
    CHECK(cfg.run.mode == RunMode::simulate);
    CHECK(cfg.run.n_steps == 1000);
    REQUIRE(cfg.run.forced_theta.has_value());
    CHECK(*cfg.run.forced_theta == testdata::switch_theta());
    CHECK(cfg.run.nash_n_values == std::vector<std::size_t>{5, 10, 30, 100, 300});
}

TEST_CASE("missing and misspelt keys are reported by name", "[io][config]")
{
    const std::string text = slurp(kConfig);
    try {
        parse_config_text(replace(text, "  lambda: 1.0e-3\n", ""));
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("population.lambda"));
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("missing"));
    }
    try {
        parse_config_text(replace(text, "  lambda: 1.0e-3\n", "  lambda: 1.0e-3\n  lamda: 2\n"));
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("unknown key"));
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("lamda"));
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("line"));
    }
    CHECK_THROWS_AS(parse_config_text(replace(text, "kappa: 360", "kappa: fast")), ConfigError);
    CHECK_THROWS_AS(parse_config_text("market: [1, 2"), ConfigError);
    CHECK_THROWS_AS(parse_config("/nonexistent/none.cfg"), ConfigError);
}

TEST_CASE("invalid values are forwarded as validation errors", "[io][config]")
{
    const std::string text = slurp(kConfig);
    try {
        parse_config_text(replace(text, "{a: 1.0e-4, phi: 1.0e-3", "{a: 0, phi: 1.0e-3"));
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "population.subpops[1].a");
    }
    CHECK_THROWS_AS(parse_config_text(replace(text, "prior: [0.5, 0.5]", "prior: [0.5, 0.6]")), ValidationError);
    CHECK_THROWS_AS(parse_config_text(replace(text, "mode: simulate", "mode: replay")), ConfigError);
}

TEST_CASE("emitted configuration parses back to itself", "[io][config][property]")
{
    auto cfg = parse_config(kConfig);
    CHECK(parse_config_text(emit_config(cfg)) == cfg);
    CHECK(parse_config_text(emit_config_inline(cfg)) == cfg);

    cfg.run.forced_theta.reset();
    cfg.run.mode = RunMode::nash_gap;
    cfg.run.seed = 18446744073709551615ull;
    cfg.run.initial_cash = 0.1 + 0.2;
    cfg.spec.population.lambda = 1.0 / 3.0;
    cfg.spec.market.sigma = 120.24000000000001;
    cfg.run.nash_method = "perturbation-family";
    const auto back = parse_config_text(emit_config(cfg));
    CHECK(back == cfg);
    CHECK(emit_config_inline(cfg).find('\n') == std::string::npos);
}

TEST_CASE("floating point fields keep every digit", "[io][csv]")
{
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(-2.0) == "-2");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(header_line("x: 1").rfind("# mfgexec ", 0) == 0);
}

TEST_CASE("equilibrium mode writes the documented columns", "[io][csv]")
{
    const auto dir = scratch("eq");
    const auto res = run_scenario(small_config(RunMode::equilibrium, dir));
    REQUIRE(res.files.size() == 1);
    const auto rows = lines(slurp(dir / "equilibrium.csv"));
    REQUIRE(rows.size() == 103);
    CHECK(rows[0].rfind("# mfgexec ", 0) == 0);
    CHECK(rows[0].find("config: ") != std::string::npos);
    CHECK(rows[1] == "t,g1_0,g1_1,g2_0_0,g2_0_1,g2_1_0,g2_1_1,nu_bar_0,nu_bar_1,q_bar_0,q_bar_1,h2_0,h2_1");
    CHECK(rows[2].rfind("0,", 0) == 0);
    CHECK(rows.back().rfind("1,", 0) == 0);

    // The header reproduces the run.
    const std::string inline_cfg = rows[0].substr(rows[0].find("config: ") + 8);
    CHECK(parse_config_text(inline_cfg) == small_config(RunMode::equilibrium, dir));
}

TEST_CASE("simulate mode writes paths and objectives", "[io][csv]")
{
    const auto dir = scratch("sim");
    auto cfg = small_config(RunMode::simulate, dir);
    cfg.run.replications = 2;
    const auto res = run_scenario(cfg);
    CHECK(res.files.size() == 4);
    const auto paths = lines(slurp(dir / "paths_1.csv"));
    REQUIRE(paths.size() == 103);
    CHECK(paths[1].rfind("t,S,F,theta,posterior_0,posterior_1,q_0,", 0) == 0);
    CHECK(paths[1].find(",q_29,nu_0,") != std::string::npos);
    CHECK(paths[1].substr(paths[1].size() - 6) == ",nu_29");
    CHECK(paths[2].rfind("0,", 0) == 0);
    CHECK(paths[2].find(",4.9500000000000002,") != std::string::npos);

    const auto obj = lines(slurp(dir / "objectives.csv"));
    REQUIRE(obj.size() == 2 + 30);
    CHECK(obj[1] == "agent,subpop,H_j");
    CHECK(obj[2].rfind("0,0,", 0) == 0);
    CHECK(obj[2 + 29].rfind("29,1,", 0) == 0);
}

TEST_CASE("nash-gap mode writes one row per population size", "[io][csv]")
{
    const auto dir = scratch("nash");
    auto cfg = small_config(RunMode::nash_gap, dir);
    cfg.run.nash_n_values = {5, 10, 30, 100};
    run_scenario(cfg);
    const auto rows = lines(slurp(dir / "nash_gap.csv"));
    REQUIRE(rows.size() == 2 + 4);
    CHECK(rows[1] == "N,gap,stderr,method");
    CHECK(rows[2].rfind("5,", 0) == 0);
    CHECK(rows[5].rfind("100,", 0) == 0);
    for (std::size_t r = 2; r < rows.size(); ++r)
        CHECK(rows[r].substr(rows[r].rfind(',') + 1) == "deterministic-best-response");

    cfg.run.forced_theta.reset();
    CHECK_THROWS_AS(run_scenario(cfg), ValidationError);
}

TEST_CASE("command line runs are reproducible", "[io][cli]")
{
    // Headers carry the output directory, so both runs write to the same place.
    const auto out = scratch("cli_out"), first = scratch("cli_first");
    const std::string common = "--config " + kConfig + " --steps 200 --reps 2 --out " + out.string();
    const std::vector<std::string> files{"equilibrium.csv", "paths_0.csv", "paths_1.csv", "objectives.csv"};
    REQUIRE(run_cli("simulate --seed 11 " + common) == 0);
    for (const auto& f : files)
        fs::copy_file(out / f, first / f);
    REQUIRE(run_cli("simulate --seed 11 " + common) == 0);
    for (const auto& f : files) {
        INFO(f);
        const std::string x = slurp(first / f);
        CHECK(!x.empty());
        CHECK(x == slurp(out / f));
    }
    const auto header = lines(slurp(first / "objectives.csv"))[0];
    CHECK(header.find("seed: 11") != std::string::npos);
    CHECK(header.find("n_steps: 200") != std::string::npos);

    REQUIRE(run_cli("simulate --seed 12 " + common) == 0);
    CHECK(lines(slurp(first / "paths_0.csv"))[2] != lines(slurp(out / "paths_0.csv"))[2]);
}

TEST_CASE("command line exit codes", "[io][cli]")
{
    const auto dir = scratch("cli_bad");
    const fs::path bad = dir / "bad.cfg";
    std::ofstream(bad) << replace(slurp(kConfig), "  lambda: 1.0e-3\n", "  lambda: 1.0e-3\n  lamda: 2\n");
    CHECK(run_cli("simulate --config " + bad.string()) == 1);
    const fs::path invalid = dir / "invalid.cfg";
    std::ofstream(invalid) << replace(slurp(kConfig), "psi: 100, m0: 0", "psi: -1, m0: 0");
    CHECK(run_cli("equilibrium --config " + invalid.string()) == 1);
    CHECK(run_cli("simulate") == 1);
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("equilibrium --config " + kConfig + " --steps 50 --out " + (dir / "ok").string()) == 0);
    CHECK(fs::exists(dir / "ok" / "equilibrium.csv"));
}
