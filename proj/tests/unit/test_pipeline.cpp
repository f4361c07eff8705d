#include <doctest.h>

#include <cstdlib>

#include <json.hpp>

#include "mobiscope/pipeline.hpp"
#include "support.hpp"

using namespace mobiscope;
using namespace mobiscope::cli;
using testing::TempDir;
using testing::read_text;
using testing::write_text;

namespace {

// One generated city shared by the tests in this file.
const fs::path& city_dir() {
    static TempDir dir;
    static const bool ready = [] {
        PipelineConfig config;
        config.out_dir = dir.path();
        config.seed = 5;
        run_simgen(config);
        return true;
    }();
    (void)ready;
    return dir.path();
}

PipelineConfig city_config(const fs::path& out) {
    auto config = load_config(city_dir() / "mobiscope.ini");
    Overrides o;
    o.out = out;
    o.threads = 1;
    apply_overrides(config, o);
    return config;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MOBISCOPE_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("k ranges") {
    CHECK(parse_k_range("2..6") == std::pair{2, 6});
    CHECK(parse_k_range("4") == std::pair{4, 4});
    CHECK_THROWS_AS(parse_k_range("two"), ConfigError);
    PipelineConfig config;
    Overrides o;
    o.k_range = parse_k_range("6..2");
    CHECK_THROWS_AS(apply_overrides(config, o), ConfigError);
    o.k_range = parse_k_range("1..3");
    CHECK_THROWS_AS(apply_overrides(config, o), ConfigError);
}

TEST_CASE("configuration errors name the key") {
    TempDir dir;
    CHECK_THROWS_AS(load_config(dir / "absent.ini"), ConfigError);

    write_text(dir / "broken.ini", "[input\nhex_scores = x\n");
    CHECK_THROWS_AS(load_config(dir / "broken.ini"), ConfigError);

    auto ini = read_text(city_dir() / "mobiscope.ini");
    ini.replace(ini.find("pre = 42"), 8, "pre = forty");
    write_text(dir / "bad_value.ini", ini);
    try {
        load_config(dir / "bad_value.ini");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("[scm] pre") != std::string::npos);
    }

    auto missing = read_text(city_dir() / "mobiscope.ini");
    missing.erase(missing.find("cases = cases.csv"), 18);
    write_text(dir / "missing.ini", missing);
    try {
        load_config(dir / "missing.ini");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("[input] cases") != std::string::npos);
    }
}

TEST_CASE("paths resolve against the config file") {
    const auto config = load_config(city_dir() / "mobiscope.ini");
    CHECK(config.input.cases == city_dir() / "cases.csv");
    CHECK(config.out_dir == city_dir() / "out");
    CHECK(config.cohort.size() == 6);
    CHECK(config.echo.at("scm.pre") == "42");
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(SchemaError("f", 3, "bad")) == 2);
    CHECK(exit_code_for(StageFailure("scm", "x", 7)) == 7);
    CHECK(exit_code_for(EstimationError("x")) == 1);
}

TEST_CASE("cluster stage over a k range") {
    TempDir out;
    auto config = city_config(out.path());
    Overrides o;
    o.k_range = std::pair{2, 6};
    apply_overrides(config, o);
    Workspace ws(config);
    const auto result = run_cluster(ws);
    CHECK(result.stage == "cluster");
    const auto cvi = read_text(out / "cvi.csv");
    CHECK(std::count(cvi.begin(), cvi.end(), '\n') == 6);
    CHECK(fs::exists(out / "dendrogram.csv"));
    CHECK(fs::exists(out / "clusters.csv"));

    const auto manifest = nlohmann::json::parse(read_text(result.manifest));
    CHECK(manifest["subcommand"] == "cluster");
    CHECK(manifest["seed"] == config.seed);
    CHECK(manifest["inputs"].size() >= 1);
    for (const auto& input : manifest["inputs"]) CHECK(input["sha256"].get<std::string>().size() == 64);
    CHECK(manifest["outputs"].size() == result.outputs.size());
}

TEST_CASE("validate reports repairs as warnings and schema errors as failures") {
    TempDir dir;
    for (const auto& e : fs::directory_iterator(city_dir())) {
        if (e.is_regular_file()) fs::copy_file(e.path(), dir / e.path().filename().string());
    }
    // make one commune's cumulative count dip for a day
    auto cases = read_text(dir / "cases.csv");
    const auto line_start = cases.find("2020-06-01,13101,");
    REQUIRE(line_start != std::string::npos);
    const auto value_start = line_start + std::string("2020-06-01,13101,").size();
    const auto value_end = cases.find('\n', value_start);
    cases.replace(value_start, value_end - value_start, "0");
    write_text(dir / "cases.csv", cases);

    auto config = load_config(dir / "mobiscope.ini");
    Workspace ws(config);
    const auto result = run_validate(ws);
    bool named = false;
    for (const auto& w : result.warnings.items()) named |= w.find("13101") != std::string::npos;
    CHECK(named);

    write_text(dir / "od.csv", "date,slot,origin,destination,trips\n2020-03-02,06:00,13101,13102,many\n");
    CHECK(run_cli("validate --config " + (dir / "mobiscope.ini").string()) == 2);
}

TEST_CASE("command line exit codes") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("cluster") == 2);
    CHECK(run_cli("cluster --config /nonexistent/mobiscope.ini") == 2);
    CHECK(run_cli("--version") == 0);
    TempDir out;
    CHECK(run_cli("regress --config " + (city_dir() / "mobiscope.ini").string() + " --out " + out.path().string()) == 0);
    CHECK(fs::exists(out / "fit_report.txt"));
    CHECK(fs::exists(out / "manifest-regress.json"));
}

}
