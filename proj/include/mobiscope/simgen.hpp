#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mobiscope/core.hpp"
#include "mobiscope/inference.hpp"
#include "mobiscope/ingest.hpp"
#include "mobiscope/reference.hpp"

namespace mobiscope::simgen {

struct CityCommune {
    Commune commune;
    santiago::ScoreBand band = santiago::ScoreBand::mid;
};

struct EpidemicParams {
    double beta = 0.35;         // transmission rate, 1/day
    double sigma = 1.0 / 5.2;   // incubation exit rate
    double gamma = 1.0 / 10.0;  // recovery rate
    double vulnerability = 0.2; // beta_i = beta * (1 + vulnerability * (1 - income_i))
};

/// Contact and mobility reductions in (0, 1], scaled per commune by compliance
/// compliance_low + (compliance_high - compliance_low) * income.
struct InterventionEffects {
    double partial = 0.35;
    double total = 0.8;
    double phase2_weekday = 0.15;
    double phase2_weekend = 0.6;
    Date global_from{std::chrono::year{2020}, std::chrono::month{3}, std::chrono::day{16}};
    double global = 0.25;  // region-wide reduction (school closures) from global_from
    double compliance_low = 0.6;
    double compliance_high = 1.0;
};

struct SeedRule {
    int top_income = 5;       // seeded communes, by descending income
    double exposed = 4.0;     // initial exposed persons per seeded commune
    int day = 0;              // offset of the seeding day
    std::map<std::string, double> explicit_seeds;  // overrides the income rule when non-empty
};

struct ObservationParams {
    double reporting_rate = 0.1;  // share of infections reported as cases
    double delay_noise = 0.3;     // max share of a day's cases reported the next day
    double hex_noise = 0.25;      // daily lognormal sd of hexagon counts
    double hex_spread = 0.15;     // fixed lognormal sd of hexagon size within a band
};

/// Planted effect of lifting quarantine: from `day`, the cohort's expected reported new
/// cases exceed the locked-down counterfactual by `delta` per 100k inhabitants per day.
struct LiftingPlant {
    std::vector<std::string> cohort;
    int day = 0;
    double delta = 0.0;
};

struct CityConfig {
    std::vector<CityCommune> communes;
    DateIndex dates;
    InterventionSchedule schedule;
    EpidemicParams epidemic;
    InterventionEffects effects;
    SeedRule seeding;
    ObservationParams observation;
    double coupling = 1.0;  // multiplies every commune's commuting share
    std::array<double, 4> band_levels{30.0, 120.0, 480.0, 1920.0};
    std::array<int, 4> hexes_per_band{10, 8, 4, 5};
    double transitions_per_day = 48.0;  // expected antenna transitions per commune-day at unit mobility level
    double od_trip_rate = 0.5;          // public-transport trips per commuter per morning
    int od_destinations = 8;
    int risk_set_size = 7;
    std::optional<LiftingPlant> plant;
    std::uint64_t seed = 42;

    /// 52 Santiago communes, 249 days from 2020-02-20, the 2020 confinement timeline.
    static CityConfig santiago();
    void validate() const;

    std::vector<std::string> commune_ids() const;
};

/// Returns a copy with the lifting effect planted; throws LookupError for unknown cohort ids.
CityConfig plant_lifting_effect(CityConfig config, std::vector<std::string> cohort, int day, double delta);

/// Per-commune, per-day intervention reduction r in [0, 1); mobility and contact scale by 1 - r.
std::vector<std::vector<double>> reduction_matrix(const CityConfig& config, const InterventionSchedule& schedule);

/// Commute destination fractions (rows sum to 1, zero diagonal) and commuting shares.
struct CommuteModel {
    std::vector<std::vector<double>> fraction;
    std::vector<double> share;
};
CommuteModel commute_model(const CityConfig& config);

/// Compartments are stored in integer micro-persons so that S + E + I + R = N holds exactly.
inline constexpr std::int64_t kMicro = 1'000'000;

struct EpidemicRun {
    std::vector<std::vector<std::int64_t>> s, e, i, r;  // [commune][day], micro-persons, end of day
    std::vector<std::vector<std::int64_t>> new_infections;
    std::vector<std::int64_t> population;  // micro-persons
};

/// Discrete-day SEIR with commute coupling driven by the schedule. With a plant, every
/// commune follows the counterfactual in which the cohort stays locked down, and the cohort
/// additionally receives the planted extra infections, which are not passed on to other
/// communes. The counterfactual run is stored in `counterfactual` when given.
EpidemicRun simulate_epidemic(const CityConfig& config, EpidemicRun* counterfactual = nullptr);

struct GroundTruth {
    std::map<std::string, int> labels;  // 1 = rural-low ... 4 = high
    std::vector<std::string> coefficient_names;
    std::vector<double> coefficients;
    double noise_sd = 0.0;
    std::optional<LiftingPlant> plant;
    EpidemicRun run;
    std::optional<EpidemicRun> counterfactual;
    /// Expected reported new cases per 100k before observation noise, [commune][day].
    std::vector<std::vector<double>> expected_incidence;
    std::vector<std::vector<double>> counterfactual_incidence;
};

struct GenerateOptions {
    bool hex = true;
    bool od = true;
    bool transitions = true;
    bool epidemic = true;
};

struct City {
    std::vector<Commune> communes;
    DateIndex dates;
    InterventionSchedule schedule;
    std::vector<ingest::HexRecord> hex;
    std::vector<ODMatrix> od;
    TransitionLog transitions;
    std::vector<ingest::CaseRecord> cases;
    GroundTruth truth;
};

City generate(const CityConfig& config, const GenerateOptions& options = {});

/// Writes every ingest CSV, ground_truth.json and a ready-to-run mobiscope.ini.
void write_city(const std::filesystem::path& dir, const City& city, const CityConfig& config);

/// Planted cross-sectional regression: fixed covariates derived from the city, fresh
/// Gaussian noise per replication.
struct CrossSectionTruth {
    std::vector<double> beta{-150.0, 20.0, 7.0, 50.0, 1.2, -7.0};
    double sigma = 25.0;
};

inference::DesignMatrix cross_section(const CityConfig& config, const CrossSectionTruth& truth,
                                      std::uint64_t replication);

}  // namespace mobiscope::simgen
