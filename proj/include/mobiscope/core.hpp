#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mobiscope/errors.hpp"

namespace mobiscope {

using Date = std::chrono::year_month_day;

/// Parses `YYYY-MM-DD`. Throws ArgumentError on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date d);
Date add_days(Date d, int days);
int days_between(Date from, Date to);
/// 0 = Monday ... 6 = Sunday.
int weekday_index(Date d);

/// Collects recoverable problems (repairs, skipped days) so callers can surface them
/// in run manifests as well as the log.
class Warnings {
public:
    void add(std::string message);
    const std::vector<std::string>& items() const noexcept { return items_; }
    bool empty() const noexcept { return items_.empty(); }
    void append(const Warnings& other);

private:
    std::vector<std::string> items_;
};

struct Commune {
    std::string id;
    std::string name;
    long population = 1;
    double income_index = 0.0;
    bool is_rural = false;
};

/// Half-open day window [begin, end) in DateIndex offsets.
struct DayWindow {
    int begin = 0;
    int end = 0;

    int size() const noexcept { return end - begin; }
    bool empty() const noexcept { return end <= begin; }
    bool contains(int day) const noexcept { return day >= begin && day < end; }
};

class DateIndex {
public:
    DateIndex() = default;
    DateIndex(Date start, int n_days);

    Date start() const noexcept { return start_; }
    int size() const noexcept { return n_days_; }
    Date date_at(int offset) const;
    /// Offset of `d` relative to start; may lie outside [0, size).
    int offset_of(Date d) const;
    bool contains(int offset) const noexcept { return offset >= 0 && offset < n_days_; }
    DayWindow full() const noexcept { return {0, n_days_}; }
    /// Window covering [from, to] inclusive, clipped to the index.
    DayWindow window(Date from, Date to) const;

    bool operator==(const DateIndex&) const = default;

private:
    Date start_{std::chrono::year{2020}, std::chrono::month{1}, std::chrono::day{1}};
    int n_days_ = 0;
};

enum class Variable { score, mob_in, mob_out, mobility_index, cum_cases, cum_cases_per_100k, new_cases };

std::string_view to_string(Variable v);
Variable parse_variable(std::string_view name);

/// Date-indexed series for one unit. Missing days are flagged in the mask; their stored
/// value is meaningless and never read by numerical code.
class PanelSeries {
public:
    PanelSeries() = default;
    PanelSeries(std::string unit_id, Variable variable, std::vector<double> values,
                std::vector<bool> missing);
    static PanelSeries complete(std::string unit_id, Variable variable, std::vector<double> values);
    static PanelSeries all_missing(std::string unit_id, Variable variable, std::size_t n);

    const std::string& unit_id() const noexcept { return unit_id_; }
    Variable variable() const noexcept { return variable_; }
    std::size_t size() const noexcept { return values_.size(); }
    double value(std::size_t i) const { return values_.at(i); }
    bool is_missing(std::size_t i) const { return missing_.at(i); }
    bool has_value(std::size_t i) const { return !missing_.at(i); }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<bool>& missing_mask() const noexcept { return missing_; }
    std::size_t count_present() const noexcept;

    /// Checks the per-variable invariants: scores in [0,100], cumulative counts non-decreasing.
    void validate() const;

    bool operator==(const PanelSeries& other) const;

private:
    std::string unit_id_;
    Variable variable_ = Variable::score;
    std::vector<double> values_;
    std::vector<bool> missing_;
};

/// Sub-series over [window.begin, window.end). Throws RangeError outside [0, size].
PanelSeries align(const PanelSeries& series, DayWindow window);

/// Start of a half-hour time-of-day interval, in minutes since midnight.
struct TimeSlot {
    int start_minute = 0;

    static TimeSlot parse(std::string_view hhmm);
    std::string to_string() const;
    auto operator<=>(const TimeSlot&) const = default;
};

/// Half-open filter [from, to) over slot start times.
struct SlotFilter {
    int from_minute = 6 * 60;
    int to_minute = 8 * 60;

    bool accepts(TimeSlot s) const noexcept {
        return s.start_minute >= from_minute && s.start_minute < to_minute;
    }
    static SlotFilter all() { return {0, 24 * 60}; }
    static SlotFilter parse(std::string_view text);  // "06:00-08:00"
};

struct ODMatrix {
    Date date;
    TimeSlot slot;
    std::map<std::pair<std::string, std::string>, long> trips;
};

struct TransitionEvent {
    std::string device;
    std::int64_t timestamp = 0;  // seconds since 1970-01-01 local civil time
    std::string antenna;
};

struct Antenna {
    std::string commune;
    double lat = 0.0;
    double lon = 0.0;
};

struct TransitionLog {
    std::vector<TransitionEvent> events;
    std::map<std::string, Antenna> antennas;
};

std::int64_t parse_timestamp(std::string_view text);  // YYYY-MM-DDTHH:MM:SS
std::string format_timestamp(std::int64_t seconds);
Date date_of_timestamp(std::int64_t seconds);

enum class InterventionKind { partial_lockdown, total_lockdown, phase2_transition };

std::string_view to_string(InterventionKind k);
InterventionKind parse_intervention_kind(std::string_view name);

struct InterventionEntry {
    std::string commune;
    Date start;
    std::optional<Date> end;  // inclusive; nullopt = still in force
    InterventionKind kind = InterventionKind::partial_lockdown;

    bool covers(Date d) const;
};

class InterventionSchedule {
public:
    InterventionSchedule() = default;
    /// Validates: start <= end, and no overlapping entries of one kind per commune.
    explicit InterventionSchedule(std::vector<InterventionEntry> entries);

    const std::vector<InterventionEntry>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    std::vector<InterventionEntry> for_commune(std::string_view commune) const;
    std::set<std::string> communes() const;
    /// Kinds in force for the commune on `d`.
    std::vector<InterventionKind> active(std::string_view commune, Date d) const;

private:
    std::vector<InterventionEntry> entries_;
};

/// Day offset of the first `kind` entry for the commune, or nullopt if never treated.
std::optional<int> treatment_day(const InterventionSchedule& schedule, const DateIndex& index,
                                 std::string_view commune, InterventionKind kind);

class StudyRegion {
public:
    StudyRegion(std::vector<Commune> communes, DateIndex index, InterventionSchedule schedule = {});

    const std::vector<Commune>& communes() const noexcept { return communes_; }
    const DateIndex& dates() const noexcept { return index_; }
    const InterventionSchedule& schedule() const noexcept { return schedule_; }

    bool has_commune(std::string_view id) const;
    const Commune& commune(std::string_view id) const;
    std::vector<std::string> commune_ids() const;

    /// Throws LookupError for unknown units, DuplicateKeyError for a second series of the
    /// same (unit, variable), RangeError on length mismatch.
    void add_panel(PanelSeries series);
    void replace_panel(PanelSeries series);
    bool has_panel(std::string_view unit, Variable v) const;
    const PanelSeries& panel(std::string_view unit, Variable v) const;

private:
    std::vector<Commune> communes_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
    DateIndex index_;
    InterventionSchedule schedule_;
    std::map<std::pair<std::string, Variable>, PanelSeries> panels_;
};

/// treatment_day restricted to the region's communes; unknown ids raise LookupError.
std::optional<int> treatment_day(const StudyRegion& region, std::string_view commune,
                                 InterventionKind kind);

}  // namespace mobiscope
