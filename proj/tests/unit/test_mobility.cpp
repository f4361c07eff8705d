#include <doctest.h>

#include "mobiscope/mobility.hpp"
#include "support.hpp"

using namespace mobiscope;

namespace {

ingest::HexRecord hex(const char* date, const char* id, const char* commune, long n) {
    return {parse_date(date), id, commune, n};
}

}  // namespace

TEST_SUITE("mobility") {

TEST_CASE("percentile score counts ties as at-or-below") {
    const DateIndex dates(parse_date("2020-03-01"), 2);
    Warnings w;
    const auto grid = mobility::score_hexagons(
        {hex("2020-03-01", "h1", "a", 10), hex("2020-03-01", "h2", "a", 20), hex("2020-03-01", "h3", "b", 20),
         hex("2020-03-01", "h4", "b", 40), hex("2020-03-02", "h1", "a", 5)},
        dates, w);
    CHECK(grid.scores[0].at("h1") == doctest::Approx(25.0));
    CHECK(grid.scores[0].at("h2") == doctest::Approx(75.0));
    CHECK(grid.scores[0].at("h3") == doctest::Approx(75.0));
    CHECK(grid.scores[0].at("h4") == doctest::Approx(100.0));
    CHECK(grid.scores[1].at("h1") == doctest::Approx(100.0));
    CHECK(w.empty());

    const auto a = mobility::commune_score(grid, "a");
    CHECK(a.value(0) == doctest::Approx(50.0));
    CHECK(a.value(1) == doctest::Approx(100.0));
    const auto b = mobility::commune_score(grid, "b");
    CHECK(b.value(0) == doctest::Approx(87.5));
    CHECK(b.is_missing(1));
    CHECK_NOTHROW(b.validate());
    CHECK_THROWS_AS(mobility::commune_score(grid, "zz"), ConfigError);
}

TEST_CASE("score grid skips empty days and out-of-window rows") {
    const DateIndex dates(parse_date("2020-03-01"), 3);
    Warnings w;
    const auto grid = mobility::score_hexagons(
        {hex("2020-03-01", "h1", "a", 1), hex("2020-03-03", "h1", "a", 2), hex("2020-05-01", "h1", "a", 2)}, dates,
        w);
    CHECK(grid.scores[1].empty());
    CHECK(w.items().size() == 2);
    CHECK_THROWS_AS(mobility::score_hexagons({hex("2020-03-01", "h1", "a", 1), hex("2020-03-02", "h1", "b", 1)},
                                             dates, w),
                    ArgumentError);
}

TEST_CASE("transition counting follows the commune rule") {
    TransitionLog log;
    log.antennas = {{"A1", {"x", 0, 0}}, {"A2", {"x", 0, 0}}, {"B1", {"y", 0, 0}}};
    auto ev = [](const char* dev, const char* ts, const char* ant) {
        return TransitionEvent{dev, parse_timestamp(ts), ant};
    };
    log.events = {
        ev("d1", "2020-03-01T07:00:00", "A1"),
        ev("d1", "2020-03-01T07:10:00", "A2"),  // x -> x: MobIn(x)
        ev("d1", "2020-03-01T07:20:00", "A2"),  // same antenna: nothing
        ev("d1", "2020-03-01T23:59:00", "B1"),  // x -> y: MobOut(x) on day 0
        ev("d1", "2020-03-02T00:01:00", "A1"),  // y -> x: MobOut(y) on day 1
        ev("d2", "2020-03-01T06:00:00", "B1"),  // new device, no pair with d1
    };
    const std::vector<std::string> communes{"x", "y"};
    const auto p = mobility::mobility_indices(log, DateIndex(parse_date("2020-03-01"), 2), communes, 1.0);
    CHECK(p.raw_in.at("x") == std::vector<long>{1, 0});
    CHECK(p.raw_out.at("x") == std::vector<long>{1, 0});
    CHECK(p.raw_out.at("y") == std::vector<long>{0, 1});
    CHECK(p.raw_in.at("y") == std::vector<long>{0, 0});
    CHECK(p.total_transitions == 3);
    CHECK(p.mobility_index.at("x").value(0) == doctest::Approx(2.0));

    const auto mean_norm = mobility::mobility_indices(log, DateIndex(parse_date("2020-03-01"), 2), communes);
    CHECK(mean_norm.normalizer == doctest::Approx(0.75));

    log.events.push_back(ev("d3", "2020-03-01T06:00:00", "A1"));
    log.events.push_back(ev("d3", "2020-03-01T06:05:00", "Q9"));
    CHECK_THROWS_AS(mobility::mobility_indices(log, DateIndex(parse_date("2020-03-01"), 2), communes), LookupError);
}

TEST_CASE("risk set takes the top k with id tie breaks") {
    const std::map<std::string, double> rates{{"a", 5}, {"b", 9}, {"c", 5}, {"d", 1}};
    CHECK(mobility::risk_set(rates, 2) == std::set<std::string>{"a", "b"});
    CHECK(mobility::risk_set(rates, 10).size() == 4);
    CHECK_THROWS_AS(mobility::risk_set(rates, 0), ArgumentError);
}

TEST_CASE("flow vector normalises commuting into the risk set") {
    const DateIndex dates(parse_date("2020-03-01"), 3);
    ODMatrix m1{parse_date("2020-03-01"), TimeSlot{390}, {{{"a", "r"}, 10}, {{"b", "r"}, 4}, {{"a", "b"}, 99}}};
    ODMatrix m2{parse_date("2020-03-02"), TimeSlot{600}, {{{"a", "r"}, 50}}};  // outside the slot filter
    ODMatrix m3{parse_date("2020-03-03"), TimeSlot{360}, {{{"a", "r"}, 70}}};  // outside the window
    ODMatrix m4{parse_date("2020-03-02"), TimeSlot{450}, {{{"r", "a"}, 8}, {{"a", "r"}, 10}}};
    const std::map<std::string, long> pop{{"a", 100}, {"b", 200}, {"r", 50}};
    const auto fv = mobility::flow_vector({m1, m2, m3, m4}, {"r"}, dates, DayWindow{0, 2}, pop);
    CHECK(fv.flow.at("a") == doctest::Approx(0.2));
    CHECK(fv.flow.at("b") == doctest::Approx(0.02));
    CHECK(fv.flow.at("r") == 0.0);

    CHECK_THROWS_AS(mobility::flow_vector({m1}, {}, dates, DayWindow{0, 2}, pop), ArgumentError);
    CHECK_THROWS_AS(mobility::flow_vector({m1}, {"zz"}, dates, DayWindow{0, 2}, pop), ArgumentError);
    CHECK_THROWS_AS(mobility::flow_vector({m1}, {"r"}, dates, DayWindow{1, 1}, pop), ArgumentError);
}

TEST_CASE("case rates per 100k at a cutoff") {
    StudyRegion region({{"a", "A", 50000, 0.5, false}, {"b", "B", 200000, 0.5, false}},
                       DateIndex(parse_date("2020-03-01"), 2));
    region.add_panel(PanelSeries::complete("a", Variable::cum_cases, {1, 10}));
    region.add_panel(PanelSeries("b", Variable::cum_cases, {0, 0}, {false, true}));
    const auto r = mobility::case_rates_at(region, 1);
    CHECK(r.at("a") == doctest::Approx(20.0));
    CHECK_FALSE(r.contains("b"));
    CHECK_THROWS_AS(mobility::case_rates_at(region, 5), RangeError);
}

TEST_CASE("od graph sums positive trips") {
    const DateIndex dates(parse_date("2020-03-01"), 2);
    ODMatrix m1{parse_date("2020-03-01"), TimeSlot{390}, {{{"a", "b"}, 3}, {{"b", "c"}, 0}}};
    ODMatrix m2{parse_date("2020-03-02"), TimeSlot{1200}, {{{"a", "b"}, 2}, {{"c", "a"}, 1}}};
    const auto g = mobility::od_graph({m1, m2}, dates, dates.full());
    CHECK(g.edges.at({"a", "b"}) == 5);
    CHECK_FALSE(g.edges.contains({"b", "c"}));
    CHECK(g.out_degree.at("b") == 0);
    CHECK(g.out_degree.at("a") == 5);
    CHECK(g.total_weight() == 6);

    testing::TempDir dir;
    mobility::write_od_graph(dir.path(), g);
    CHECK(testing::read_text(dir / "edges.csv").rfind("origin,destination,weight\n", 0) == 0);
    CHECK(testing::read_text(dir / "nodes.csv").find("a,5") != std::string::npos);
}

}
