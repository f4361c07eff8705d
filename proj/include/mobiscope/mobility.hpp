#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mobiscope/core.hpp"
#include "mobiscope/ingest.hpp"

namespace mobiscope::mobility {

/// Daily hexagon percentile scores plus the hexagon -> commune assignment.
struct HexScoreGrid {
    DateIndex dates;
    std::vector<std::map<std::string, double>> scores;  // per day offset: hex -> score
    std::map<std::string, std::string> hex_commune;

    std::vector<std::string> hexagons_of(std::string_view commune) const;
};

/// score(h) = 100 * #{g : count(g) <= count(h)} / N over the hexagons reporting that day.
/// Days with no reporting hexagon and records outside `dates` are skipped with a warning.
HexScoreGrid score_hexagons(const std::vector<ingest::HexRecord>& records, const DateIndex& dates,
                            Warnings& warnings);

/// Unweighted daily mean over the commune's reporting hexagons; missing when none report.
PanelSeries commune_score(const HexScoreGrid& grid, std::string_view commune);

struct MobilityPanels {
    /// Raw transition counts per commune and day.
    std::map<std::string, std::vector<long>> raw_in;
    std::map<std::string, std::vector<long>> raw_out;
    /// Normalized indices: raw counts divided by `normalizer`.
    std::map<std::string, PanelSeries> mob_in;
    std::map<std::string, PanelSeries> mob_out;
    std::map<std::string, PanelSeries> mobility_index;
    double normalizer = 1.0;
    long total_transitions = 0;
};

/// Counts antenna transitions per commune-day. A transition is a pair of consecutive
/// events of one device on different antennas, dated by the later event. Both antennas
/// in X count toward MobIn(X); X -> Y counts toward MobOut(X) only.
/// `normalizer` <= 0 selects the panel-wide mean of daily MobIn + MobOut counts.
MobilityPanels mobility_indices(const TransitionLog& log, const DateIndex& dates,
                                std::span<const std::string> communes, double normalizer = 0.0);

struct FlowVector {
    std::map<std::string, double> flow;
    std::set<std::string> risk_set;
    DayWindow window;
    SlotFilter slots;
};

/// Flow_i = sum over window, slots and risk-set destinations of trips(i -> d) / population_i,
/// and 0 for risk-set members.
FlowVector flow_vector(const std::vector<ODMatrix>& od, const std::set<std::string>& risk_set,
                       const DateIndex& dates, DayWindow window, const std::map<std::string, long>& populations,
                       SlotFilter slots = {});

/// Top-k communes by rate; ties broken by the lexicographically smaller id.
std::set<std::string> risk_set(const std::map<std::string, double>& rates, int k);

/// Cumulative cases per 100k at `day`, for communes with a value on that day.
std::map<std::string, double> case_rates_at(const StudyRegion& region, int day);

struct OdGraph {
    std::map<std::string, double> out_degree;
    std::map<std::pair<std::string, std::string>, double> edges;

    double total_weight() const;
};

OdGraph od_graph(const std::vector<ODMatrix>& od, const DateIndex& dates, DayWindow window,
                 SlotFilter slots = SlotFilter::all());

/// nodes.csv (commune_id,outdeg) and edges.csv (origin,destination,weight).
void write_od_graph(const std::filesystem::path& dir, const OdGraph& graph);

}  // namespace mobiscope::mobility
