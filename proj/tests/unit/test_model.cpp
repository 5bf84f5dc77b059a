#include <catch_amalgamated.hpp>

#include <numeric>

#include "mfgexec/model.hpp"
#include "support.hpp"

using namespace mfgexec;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("reference scenario validates unchanged", "[model]")
{
    const GameSpec spec = testdata::reference_spec();
    const GameSpec once = validate(spec);
    CHECK(once.population == spec.population);
    CHECK(once.n_agents_per_subpop == spec.n_agents_per_subpop);
    const GameSpec twice = validate(once);
    CHECK(twice.population == once.population);
    CHECK(twice.market.generator == once.market.generator);
}

TEST_CASE("symmetric proportions are accepted", "[model]")
{
    GameSpec spec = testdata::reference_spec(5, 5);
    spec.population.subpops[0].p = 0.5;
    spec.population.subpops[1].p = 0.5;
    CHECK_NOTHROW(validate(spec));
}

TEST_CASE("zero temporary impact is rejected with the field name", "[model]")
{
    GameSpec spec = testdata::reference_spec();
    spec.population.subpops[1].a = 0.0;
    try {
        validate(spec);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "population.subpops[1].a");
        CHECK_THAT(e.what(), ContainsSubstring("temporary impact must be positive"));
    }
}

TEST_CASE("invalid specs name the offending field", "[model]")
{
    auto field_of = [](const GameSpec& s) {
        try {
            validate(s);
        } catch (const ValidationError& e) {
            return e.field();
        }
        return std::string("none");
    };
    GameSpec s = testdata::reference_spec();
    s.population.subpops[0].p = 0.5;
    CHECK(field_of(s) == "population.subpops.p");

    s = testdata::reference_spec();
    s.population.subpops[0].phi = -1.0;
    CHECK(field_of(s) == "population.subpops[0].phi");

    s = testdata::reference_spec();
    s.market.generator(0, 1) = -1.0;
    CHECK(field_of(s) == "market.generator");

    s = testdata::reference_spec();
    s.market.generator(0, 0) = -2.0;
    CHECK(field_of(s) == "market.generator");

    s = testdata::reference_spec();
    s.market.prior = Eigen::Vector2d(0.7, 0.7);
    CHECK(field_of(s) == "market.prior");

    s = testdata::reference_spec();
    s.n_agents_per_subpop = {20, 0};
    CHECK(field_of(s) == "n_agents_per_subpop[1]");

    s = testdata::reference_spec();
    s.population.subpops.clear();
    CHECK(field_of(s) == "population.subpops");

    s = testdata::reference_spec();
    s.target_shift = std::vector<double>(3, 0.0);
    CHECK(field_of(s) == "target_shift");
}

TEST_CASE("empirical proportions", "[model]")
{
    const std::vector<std::size_t> a{20, 10};
    const auto pa = empirical_proportions(a);
    CHECK(pa[0] == 2.0 / 3.0);
    CHECK(pa[1] == 1.0 / 3.0);

    const std::vector<std::size_t> b{5, 5};
    const auto pb = empirical_proportions(b);
    CHECK(pb == std::vector<double>{0.5, 0.5});

    const std::vector<std::size_t> c{1};
    CHECK(empirical_proportions(c) == std::vector<double>{1.0});
}

TEST_CASE("empirical proportions lie in (0,1] and sum to one", "[model][property]")
{
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> count(1, 1000), kdist(1, 6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> n(kdist(rng));
        for (auto& x : n)
            x = count(rng);
        const auto p = empirical_proportions(n);
        for (double x : p) {
            CHECK(x > 0.0);
            CHECK(x <= 1.0);
        }
        CHECK_THAT(std::accumulate(p.begin(), p.end(), 0.0), WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("proportional counts", "[model]")
{
    const std::vector<double> p{2.0 / 3.0, 1.0 / 3.0};
    CHECK(proportional_counts(p, 30) == std::vector<std::size_t>{20, 10});
    CHECK(proportional_counts(p, 5) == std::vector<std::size_t>{3, 2});
    CHECK(proportional_counts(p, 100) == std::vector<std::size_t>{67, 33});
    CHECK(proportional_counts(p, 2) == std::vector<std::size_t>{1, 1});
    CHECK_THROWS_AS(proportional_counts(p, 1), ValidationError);
}

TEST_CASE("population matrices", "[model]")
{
    const auto pop = testdata::reference_population();
    const Eigen::MatrixXd lam = pop.impact_coupling();
    CHECK_THAT(lam(0, 0), WithinRel(1e-3 * 2.0 / 3.0, 1e-15));
    CHECK_THAT(lam(1, 0), WithinRel(1e-3 * 2.0 / 3.0, 1e-15));
    CHECK_THAT(lam(0, 1), WithinRel(1e-3 / 3.0, 1e-15));
    CHECK(pop.inverse_double_impact()(0, 0) == 1.0 / 2e-4);
    CHECK(pop.inverse_double_impact()(0, 1) == 0.0);
    CHECK(pop.psi_matrix()(1, 1) == 100.0);
    CHECK(pop.phi_matrix()(1, 1) == 1e-3);
}

TEST_CASE("intensities and drift", "[model]")
{
    const auto m = testdata::reference_market();
    CHECK_THAT(m.up_intensity(5.05, 5.0), WithinRel(120.24 + 360 * 0.05, 1e-12));
    CHECK(m.down_intensity(5.05, 5.0) == 120.24);
    CHECK_THAT(m.down_intensity(4.95, 5.0), WithinRel(120.24 + 360 * 0.05, 1e-12));
    CHECK_THAT(m.total_intensity(4.95, 5.0), WithinRel(2 * 120.24 + 18, 1e-12));
    CHECK(m.drift_rate() == 0.01 * 360);
}

TEST_CASE("time grid", "[model]")
{
    const TimeGrid g(1.0, 1000);
    CHECK(g.size() == 1001);
    CHECK(g[0] == 0.0);
    CHECK(g[1000] == 1.0);
    CHECK(g.dt() == 1e-3);
    for (std::size_t i = 1; i < g.size(); ++i)
        CHECK(g[i] > g[i - 1]);
    CHECK(g.nearest(0.5004) == 500);
    CHECK(g.nearest(2.0) == 1000);
    CHECK(g.nearest(-1.0) == 0);
}

TEST_CASE("agent sub-population layout", "[model]")
{
    const auto spec = testdata::reference_spec(2, 3);
    CHECK(spec.total_agents() == 5);
    CHECK(spec.agent_subpops() == std::vector<std::size_t>{0, 0, 1, 1, 1});
}
