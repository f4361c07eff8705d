#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mobiscope/core.hpp"
#include "mobiscope/tsclust.hpp"

namespace mobiscope::cli {

namespace fs = std::filesystem;

struct InputPaths {
    fs::path hex_scores;
    fs::path od;
    fs::path transitions;
    fs::path antennas;
    fs::path cases;
    fs::path socio;
    fs::path schedule;  // optional
};

struct SimgenSettings {
    std::optional<double> delta = 20.0;  // planted lifting effect per 100k per day; nullopt = no plant
    Date plant_date{std::chrono::year{2020}, std::chrono::month{9}, std::chrono::day{7}};
    std::vector<std::string> cohort;  // empty = the 2020-09-07 phase 2 cohort
    std::optional<double> beta;
    std::optional<double> coupling;
    std::optional<double> reporting_rate;
    std::optional<double> delay_noise;
    std::optional<double> hex_noise;
};

/// Parsed INI configuration. Relative paths are resolved against the file's directory.
struct PipelineConfig {
    fs::path source;  // config file, empty when built from defaults
    InputPaths input;

    std::optional<Date> start;
    std::optional<int> days;

    double normalizer = 0.0;  // <= 0: panel mean
    int risk_k = 7;
    Date risk_cutoff{std::chrono::year{2020}, std::chrono::month{3}, std::chrono::day{30}};
    SlotFilter flow_slots{};
    std::optional<Date> graph_from;
    std::optional<Date> graph_to;
    SlotFilter graph_slots = SlotFilter::all();

    tsclust::DtwConfig dtw;
    int k_min = 2;
    int k_max = 6;
    int k_report = 4;

    Date regress_from{std::chrono::year{2020}, std::chrono::month{2}, std::chrono::day{20}};
    Date regress_to{std::chrono::year{2020}, std::chrono::month{3}, std::chrono::day{30}};
    bool per_100k = false;
    int name_width = 0;

    Variable corr_variable = Variable::mobility_index;
    Date early_from{std::chrono::year{2020}, std::chrono::month{3}, std::chrono::day{26}};
    Date early_to{std::chrono::year{2020}, std::chrono::month{4}, std::chrono::day{30}};
    Date late_from{std::chrono::year{2020}, std::chrono::month{9}, std::chrono::day{28}};
    Date late_to{std::chrono::year{2020}, std::chrono::month{10}, std::chrono::day{25}};

    std::string scm_outcome = "new_cases";  // new_cases | mobility_index
    std::vector<std::string> cohort;
    std::vector<std::string> donors;  // empty = every non-cohort commune
    int pre = 42;
    int post = 28;
    std::optional<int> donor_lag;
    std::optional<double> lambda;
    bool same_cluster = false;
    bool placebo = true;
    bool demean = true;

    SimgenSettings simgen;

    fs::path out_dir = "out";
    unsigned threads = 0;
    std::uint64_t seed = 42;

    /// Every key as read, "section.key" -> value, echoed into manifests.
    std::map<std::string, std::string> echo;
};

/// Throws ConfigError naming the section and key for missing or malformed values.
PipelineConfig load_config(const fs::path& file);

struct Overrides {
    std::optional<fs::path> out;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::pair<int, int>> k_range;
};

void apply_overrides(PipelineConfig& config, const Overrides& overrides);

/// "2..6" or "4".
std::pair<int, int> parse_k_range(std::string_view text);

/// Input data shared by the stages, loaded on first use.
class Workspace {
public:
    explicit Workspace(PipelineConfig config);
    ~Workspace();
    Workspace(Workspace&&) noexcept;

    const PipelineConfig& config() const noexcept;

    struct Impl;
    Impl& impl() noexcept { return *impl_; }

private:
    std::unique_ptr<Impl> impl_;
};

struct StageResult {
    std::string stage;
    std::vector<fs::path> outputs;
    Warnings warnings;
    fs::path manifest;
};

StageResult run_validate(Workspace& ws);
StageResult run_mobility(Workspace& ws);
StageResult run_cluster(Workspace& ws);
StageResult run_regress(Workspace& ws);
StageResult run_corr(Workspace& ws);
StageResult run_scm(Workspace& ws);
/// Writes a synthetic city into the output directory.
StageResult run_simgen(const PipelineConfig& config);

/// validate -> mobility -> cluster -> regress -> corr -> scm; a failure is rethrown as
/// StageFailure naming the stage.
std::vector<StageResult> run_all(Workspace& ws);

class StageFailure : public Error {
public:
    StageFailure(std::string stage, const std::string& message, int exit_code)
        : Error("stage " + stage + " failed: " + message), stage_(std::move(stage)), exit_code_(exit_code) {}
    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

/// 2 for configuration and input validation errors, 1 otherwise.
int exit_code_for(const std::exception& e);

/// Hex-encoded SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

}  // namespace mobiscope::cli
