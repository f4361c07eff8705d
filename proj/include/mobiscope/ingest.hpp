#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mobiscope/core.hpp"

namespace mobiscope::ingest {

namespace fs = std::filesystem;

inline constexpr const char* kHexScoresHeader = "date,hex_id,commune_id,displacements";
inline constexpr const char* kOdHeader = "date,slot,origin,destination,trips";
inline constexpr const char* kTransitionsHeader = "device,timestamp,antenna_id";
inline constexpr const char* kAntennasHeader = "antenna_id,commune_id,lat,lon";
inline constexpr const char* kCasesHeader = "date,commune_id,cum_cases";
inline constexpr const char* kSocioHeader = "commune_id,name,population,income_index,is_rural";
inline constexpr const char* kScheduleHeader = "commune_id,start,end,kind";

struct HexRecord {
    Date date;
    std::string hex_id;
    std::string commune_id;
    long displacements = 0;

    bool operator==(const HexRecord&) const = default;
};

/// Raw cumulative case observation, one per (date, commune).
struct CaseRecord {
    Date date;
    std::string commune_id;
    long cum_cases = 0;

    bool operator==(const CaseRecord&) const = default;
};

std::vector<HexRecord> read_hex_scores(const fs::path& path);
void write_hex_scores(const fs::path& path, const std::vector<HexRecord>& records);

/// `known` restricts origin/destination ids; an empty set accepts any id.
std::vector<ODMatrix> read_od(const fs::path& path, const std::set<std::string>& known = {});
void write_od(const fs::path& path, const std::vector<ODMatrix>& matrices);

std::map<std::string, Antenna> read_antennas(const fs::path& path);
/// Events are returned sorted by (device, timestamp).
TransitionLog read_transitions(const fs::path& path, const fs::path& antenna_map_path);
void write_antennas(const fs::path& path, const std::map<std::string, Antenna>& antennas);
void write_transitions(const fs::path& path, const TransitionLog& log);

std::vector<CaseRecord> read_case_records(const fs::path& path);
void write_cases(const fs::path& path, const std::vector<CaseRecord>& records);

/// Builds one cum_cases series per commune over `index`. Days without a row are missing;
/// rows outside the index are ignored. Decreasing values are repaired with a running
/// maximum and reported through `warnings`.
std::map<std::string, PanelSeries> read_cases(const fs::path& path, const DateIndex& index,
                                              Warnings& warnings);
std::map<std::string, PanelSeries> cases_to_panels(const std::vector<CaseRecord>& records,
                                                   const DateIndex& index, Warnings& warnings,
                                                   const std::string& source = "cases");

std::vector<Commune> read_socio(const fs::path& path);
void write_socio(const fs::path& path, const std::vector<Commune>& communes);

InterventionSchedule read_schedule(const fs::path& path);
void write_schedule(const fs::path& path, const InterventionSchedule& schedule);

/// Splits one CSV line. Double-quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace mobiscope::ingest
