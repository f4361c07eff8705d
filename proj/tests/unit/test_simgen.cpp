#include <doctest.h>

#include "mobiscope/simgen.hpp"
#include "sim_checks.hpp"

using namespace mobiscope;
using namespace mobiscope::simgen;
namespace fs = std::filesystem;

namespace {

CityConfig short_city(int days = 120) {
    auto config = CityConfig::santiago();
    config.dates = DateIndex(config.dates.start(), days);
    return config;
}

}  // namespace

TEST_SUITE("simgen") {

TEST_CASE("default city satisfies the invariants") {
    const auto config = CityConfig::santiago();
    const auto city = generate(config);
    CHECK(testing::city_violation(city).empty());
    CHECK(city.communes.size() == 52);
    CHECK(city.dates.size() == 249);
    CHECK(city.truth.labels.size() == 52);
    CHECK(city.cases.size() == 52u * 249u);
    CHECK_FALSE(city.transitions.events.empty());
    CHECK_FALSE(city.od.empty());
}

TEST_CASE("same seed gives identical files") {
    auto config = short_city(60);
    config.seed = 99;
    const auto city = generate(config);
    testing::TempDir a, b;
    write_city(a.path(), city, config);
    write_city(b.path(), generate(config), config);
    CHECK(testing::differing_files(a.path(), b.path()).empty());
    for (const char* name : {"hex_scores.csv", "od.csv", "transitions.csv", "antennas.csv", "cases.csv", "socio.csv",
                             "schedule.csv", "ground_truth.json", "mobiscope.ini"}) {
        CHECK_MESSAGE(fs::exists(a / name), name);
    }

    config.seed = 100;
    testing::TempDir c;
    write_city(c.path(), generate(config), config);
    CHECK_FALSE(testing::differing_files(a.path(), c.path()).empty());
}

TEST_CASE("higher transmission never infects fewer people") {
    std::int64_t previous = -1;
    for (double beta : {0.1, 0.2, 0.3, 0.4, 0.5}) {
        auto config = short_city();
        config.epidemic.beta = beta;
        const auto total = testing::total_infections(simulate_epidemic(config));
        CHECK(total >= previous);
        previous = total;
    }
}

TEST_CASE("without commuting the epidemic stays in the seeded commune") {
    auto config = short_city(90);
    config.coupling = 0.0;
    config.effects.global = 0.0;
    const auto seeded = config.communes.front().commune.id;
    config.seeding.explicit_seeds = {{seeded, 10.0}};
    const auto run = simulate_epidemic(config);
    for (std::size_t c = 1; c < run.new_infections.size(); ++c) {
        CHECK(run.r[c].back() + run.i[c].back() + run.e[c].back() == 0);
    }
    CHECK(run.r[0].back() > 0);
}

TEST_CASE("a subcritical epidemic dies out") {
    auto config = short_city();
    config.epidemic.beta = 0.05;
    const auto run = simulate_epidemic(config);
    std::int64_t infected = 0, seeded = 0;
    for (std::size_t c = 0; c < run.i.size(); ++c) {
        infected += run.i[c].back() + run.e[c].back();
        seeded += run.population[c] - run.s[c].front() ;
    }
    CHECK(infected < seeded / 10);
}

TEST_CASE("the planted lifting effect is exact in expectation") {
    auto config = CityConfig::santiago();
    const int day = config.dates.offset_of(parse_date("2020-09-07"));
    const std::vector<std::string> cohort{santiago::id_of("Recoleta"), santiago::id_of("San Miguel")};
    config = plant_lifting_effect(config, cohort, day, 20.0);
    const auto city = generate(config, {false, false, false, true});
    CHECK(testing::city_violation(city).empty());
    REQUIRE(city.truth.counterfactual);
    const auto ids = config.commune_ids();
    for (std::size_t c = 0; c < ids.size(); ++c) {
        const bool treated = std::find(cohort.begin(), cohort.end(), ids[c]) != cohort.end();
        for (int t = 0; t < config.dates.size(); ++t) {
            const double diff = city.truth.expected_incidence[c][t] - city.truth.counterfactual_incidence[c][t];
            if (treated && t >= day) {
                CHECK(std::abs(diff - 20.0) < 1e-6);
            } else if (!treated) {
                CHECK(diff == 0.0);
            }
        }
    }
    CHECK_THROWS_AS(plant_lifting_effect(config, {"99999"}, day, 20.0), LookupError);
}

TEST_CASE("commute model rows are distributions") {
    const auto config = CityConfig::santiago();
    const auto model = commute_model(config);
    for (std::size_t c = 0; c < model.fraction.size(); ++c) {
        double sum = 0;
        for (double f : model.fraction[c]) sum += f;
        CHECK(sum == doctest::Approx(1.0));
        CHECK(model.fraction[c][c] == 0.0);
        CHECK(model.share[c] >= 0.0);
        CHECK(model.share[c] < 1.0);
    }
    const auto r = reduction_matrix(config, config.schedule);
    for (const auto& row : r) {
        for (double v : row) {
            CHECK(v >= 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("configuration validation") {
    auto config = short_city();
    config.epidemic.beta = -1;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = short_city();
    config.observation.reporting_rate = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("cross sections reuse covariates and redraw noise") {
    const auto config = CityConfig::santiago();
    const CrossSectionTruth truth;
    const auto a = cross_section(config, truth, 1);
    const auto b = cross_section(config, truth, 2);
    CHECK(a.columns == std::vector<std::string>{"(Intercept)", "MobIn", "MobOut", "Flow", "Score", "MobOut:Flow"});
    CHECK(a.x == b.x);
    CHECK(a.y != b.y);
    CHECK(cross_section(config, truth, 1).y == a.y);
}

}
