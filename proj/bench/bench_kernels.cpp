// Serial references against their OpenMP counterparts. Results are bitwise
// identical (see the parallel test cases); only the timing differs.

#include <benchmark/benchmark.h>

#include "mfgexec/equilibrium.hpp"
#include "mfgexec/filter.hpp"
#include "mfgexec/market_sim.hpp"
#include "mfgexec/riccati.hpp"

using namespace mfgexec;

namespace {

PopulationSpec reference_population()
{
    PopulationSpec p;
    p.lambda = 1e-3;
    p.subpops = {{1e-4, 1e-2, 100.0, 2.0 / 3.0, 100.0, 50.0}, {1e-4, 1e-3, 100.0, 1.0 / 3.0, 0.0, 50.0}};
    return p;
}

LatentMarketModel reference_market()
{
    LatentMarketModel m;
    m.theta_states = Eigen::Vector2d(4.95, 5.05);
    m.generator = (Eigen::Matrix2d() << -1.0, 1.0, 1.0, -1.0).finished();
    m.prior = Eigen::Vector2d(0.5, 0.5);
    m.kappa = 360.0;
    m.sigma = 120.24;
    m.alpha_tick = 0.01;
    m.f0 = 5.0;
    m.horizon = 1.0;
    return m;
}

void BM_solve_g2(benchmark::State& state)
{
    const auto pop = reference_population();
    const TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_g2(pop, grid));
}

void BM_solve_g2_serial(benchmark::State& state)
{
    const auto pop = reference_population();
    const TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_g2_serial(pop, grid));
}

struct KernelInputs
{
    OrderedExponentialTable table;
    Eigen::MatrixXd weights;
};

KernelInputs kernel_inputs(std::size_t n)
{
    const auto pop = reference_population();
    const TimeGrid grid(1.0, n);
    return {ordered_exponential(pop, solve_g2(pop, grid).g2, grid), forecast_weights(reference_market(), grid.dt(), n)};
}

void BM_g1_kernel(benchmark::State& state)
{
    const auto in = kernel_inputs(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(G1Kernel::build(in.table, in.weights));
}

void BM_g1_kernel_serial(benchmark::State& state)
{
    const auto in = kernel_inputs(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(G1Kernel::build_serial(in.table, in.weights));
}

void game(benchmark::State& state, bool parallel)
{
    GameSpec spec;
    spec.population = reference_population();
    spec.market = reference_market();
    const auto n = static_cast<std::size_t>(state.range(0));
    spec.n_agents_per_subpop = {2 * n / 3, n - 2 * n / 3};
    GameOptions opt;
    opt.parallel_agents = parallel;
    const GameEngine engine(spec, TimeGrid(1.0, 1000), opt);
    std::uint64_t r = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(engine.run_replication(1, r++));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0) * 1000);
}

void BM_game(benchmark::State& state) { game(state, true); }
void BM_game_serial(benchmark::State& state) { game(state, false); }

}  // namespace

BENCHMARK(BM_solve_g2)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_solve_g2_serial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_g1_kernel)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_g1_kernel_serial)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_game)->Arg(30)->Arg(3000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_game_serial)->Arg(30)->Arg(3000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
