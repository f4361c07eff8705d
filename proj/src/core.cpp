#include "mobiscope/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "mobiscope/logging.hpp"

namespace mobiscope {

namespace chr = std::chrono;

namespace {

int parse_int(std::string_view text, std::string_view what) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ArgumentError(fmt::format("invalid {} '{}'", what, text));
    }
    return value;
}

}  // namespace

Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw ArgumentError(fmt::format("invalid date '{}', expected YYYY-MM-DD", text));
    }
    const int y = parse_int(text.substr(0, 4), "year");
    const int m = parse_int(text.substr(5, 2), "month");
    const int d = parse_int(text.substr(8, 2), "day");
    Date date{chr::year{y}, chr::month{static_cast<unsigned>(m)}, chr::day{static_cast<unsigned>(d)}};
    if (!date.ok()) {
        throw ArgumentError(fmt::format("invalid calendar date '{}'", text));
    }
    return date;
}

std::string format_date(Date d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()),
                       static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

Date add_days(Date d, int days) {
    return Date{chr::sys_days{d} + chr::days{days}};
}

int days_between(Date from, Date to) {
    return static_cast<int>((chr::sys_days{to} - chr::sys_days{from}).count());
}

int weekday_index(Date d) {
    // iso_encoding: Monday = 1 ... Sunday = 7
    return static_cast<int>(chr::weekday{chr::sys_days{d}}.iso_encoding()) - 1;
}

void Warnings::add(std::string message) {
    log::warn(message);
    items_.push_back(std::move(message));
}

void Warnings::append(const Warnings& other) {
    items_.insert(items_.end(), other.items_.begin(), other.items_.end());
}

DateIndex::DateIndex(Date start, int n_days) : start_(start), n_days_(n_days) {
    if (!start.ok()) throw ArgumentError("DateIndex start is not a valid date");
    if (n_days < 1) throw ArgumentError("DateIndex needs at least one day");
}

Date DateIndex::date_at(int offset) const {
    return add_days(start_, offset);
}

int DateIndex::offset_of(Date d) const {
    return days_between(start_, d);
}

DayWindow DateIndex::window(Date from, Date to) const {
    const int a = std::max(0, offset_of(from));
    const int b = std::min(n_days_, offset_of(to) + 1);
    return {a, std::max(a, b)};
}

std::string_view to_string(Variable v) {
    switch (v) {
        case Variable::score: return "score";
        case Variable::mob_in: return "mob_in";
        case Variable::mob_out: return "mob_out";
        case Variable::mobility_index: return "mobility_index";
        case Variable::cum_cases: return "cum_cases";
        case Variable::cum_cases_per_100k: return "cum_cases_per_100k";
        case Variable::new_cases: return "new_cases";
    }
    return "unknown";
}

Variable parse_variable(std::string_view name) {
    for (auto v : {Variable::score, Variable::mob_in, Variable::mob_out, Variable::mobility_index,
                   Variable::cum_cases, Variable::cum_cases_per_100k, Variable::new_cases}) {
        if (to_string(v) == name) return v;
    }
    throw ArgumentError(fmt::format("unknown variable '{}'", name));
}

PanelSeries::PanelSeries(std::string unit_id, Variable variable, std::vector<double> values,
                         std::vector<bool> missing)
    : unit_id_(std::move(unit_id)), variable_(variable), values_(std::move(values)),
      missing_(std::move(missing)) {
    if (values_.size() != missing_.size()) {
        throw ArgumentError(fmt::format("series {}: {} values but {} mask entries", unit_id_,
                                        values_.size(), missing_.size()));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (missing_[i]) values_[i] = 0.0;
    }
}

PanelSeries PanelSeries::complete(std::string unit_id, Variable variable, std::vector<double> values) {
    std::vector<bool> mask(values.size(), false);
    return PanelSeries(std::move(unit_id), variable, std::move(values), std::move(mask));
}

PanelSeries PanelSeries::all_missing(std::string unit_id, Variable variable, std::size_t n) {
    return PanelSeries(std::move(unit_id), variable, std::vector<double>(n, 0.0),
                       std::vector<bool>(n, true));
}

std::size_t PanelSeries::count_present() const noexcept {
    return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), false));
}

void PanelSeries::validate() const {
    if (variable_ == Variable::score) {
        for (std::size_t i = 0; i < size(); ++i) {
            if (has_value(i) && (values_[i] < 0.0 || values_[i] > 100.0)) {
                throw RangeError(fmt::format("score series {} day {}: {} outside [0,100]", unit_id_,
                                             i, values_[i]));
            }
        }
    }
    if (variable_ == Variable::cum_cases || variable_ == Variable::cum_cases_per_100k) {
        std::optional<double> last;
        for (std::size_t i = 0; i < size(); ++i) {
            if (!has_value(i)) continue;
            if (last && values_[i] < *last) {
                throw RangeError(fmt::format("cumulative series {} decreases at day {}", unit_id_, i));
            }
            last = values_[i];
        }
    }
}

bool PanelSeries::operator==(const PanelSeries& other) const {
    if (unit_id_ != other.unit_id_ || variable_ != other.variable_ || missing_ != other.missing_ ||
        values_.size() != other.values_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!missing_[i] && values_[i] != other.values_[i]) return false;
    }
    return true;
}

PanelSeries align(const PanelSeries& series, DayWindow window) {
    const auto n = static_cast<int>(series.size());
    if (window.begin < 0 || window.end > n || window.begin > window.end) {
        throw RangeError(fmt::format("window [{}, {}) outside series of length {}", window.begin,
                                     window.end, n));
    }
    std::vector<double> values(series.values().begin() + window.begin,
                               series.values().begin() + window.end);
    std::vector<bool> mask(series.missing_mask().begin() + window.begin,
                           series.missing_mask().begin() + window.end);
    return PanelSeries(series.unit_id(), series.variable(), std::move(values), std::move(mask));
}

TimeSlot TimeSlot::parse(std::string_view hhmm) {
    if (hhmm.size() != 5 || hhmm[2] != ':') {
        throw ArgumentError(fmt::format("invalid time slot '{}', expected HH:MM", hhmm));
    }
    const int h = parse_int(hhmm.substr(0, 2), "hour");
    const int m = parse_int(hhmm.substr(3, 2), "minute");
    if (h < 0 || h > 23 || (m != 0 && m != 30)) {
        throw ArgumentError(fmt::format("time slot '{}' is not a half-hour boundary", hhmm));
    }
    return TimeSlot{h * 60 + m};
}

std::string TimeSlot::to_string() const {
    return fmt::format("{:02d}:{:02d}", start_minute / 60, start_minute % 60);
}

SlotFilter SlotFilter::parse(std::string_view text) {
    const auto dash = text.find('-');
    if (dash == std::string_view::npos) {
        throw ArgumentError(fmt::format("invalid slot range '{}', expected HH:MM-HH:MM", text));
    }
    const auto from = TimeSlot::parse(text.substr(0, dash));
    const auto to_text = text.substr(dash + 1);
    // The upper bound may be 24:00.
    const int to = to_text == "24:00" ? 24 * 60 : TimeSlot::parse(to_text).start_minute;
    if (to <= from.start_minute) throw ArgumentError(fmt::format("empty slot range '{}'", text));
    return {from.start_minute, to};
}

std::int64_t parse_timestamp(std::string_view text) {
    if (text.size() != 19 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':' ||
        text[16] != ':') {
        throw ArgumentError(fmt::format("invalid timestamp '{}', expected YYYY-MM-DDTHH:MM:SS", text));
    }
    const Date d = parse_date(text.substr(0, 10));
    const int h = parse_int(text.substr(11, 2), "hour");
    const int m = parse_int(text.substr(14, 2), "minute");
    const int s = parse_int(text.substr(17, 2), "second");
    if (h > 23 || m > 59 || s > 59 || h < 0 || m < 0 || s < 0) {
        throw ArgumentError(fmt::format("invalid time of day in '{}'", text));
    }
    const auto days = chr::sys_days{d}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + h * 3600 + m * 60 + s;
}

Date date_of_timestamp(std::int64_t seconds) {
    auto days = seconds / 86400;
    if (seconds % 86400 < 0) --days;
    return Date{chr::sys_days{chr::days{days}}};
}

std::string format_timestamp(std::int64_t seconds) {
    const Date d = date_of_timestamp(seconds);
    std::int64_t rem = seconds - static_cast<std::int64_t>(chr::sys_days{d}.time_since_epoch().count()) * 86400;
    return fmt::format("{}T{:02d}:{:02d}:{:02d}", format_date(d), rem / 3600, (rem % 3600) / 60, rem % 60);
}

std::string_view to_string(InterventionKind k) {
    switch (k) {
        case InterventionKind::partial_lockdown: return "partial_lockdown";
        case InterventionKind::total_lockdown: return "total_lockdown";
        case InterventionKind::phase2_transition: return "phase2_transition";
    }
    return "unknown";
}

InterventionKind parse_intervention_kind(std::string_view name) {
    for (auto k : {InterventionKind::partial_lockdown, InterventionKind::total_lockdown,
                   InterventionKind::phase2_transition}) {
        if (to_string(k) == name) return k;
    }
    throw ArgumentError(fmt::format("unknown intervention kind '{}'", name));
}

bool InterventionEntry::covers(Date d) const {
    if (chr::sys_days{d} < chr::sys_days{start}) return false;
    return !end || chr::sys_days{d} <= chr::sys_days{*end};
}

InterventionSchedule::InterventionSchedule(std::vector<InterventionEntry> entries)
    : entries_(std::move(entries)) {
    for (const auto& e : entries_) {
        if (e.end && chr::sys_days{*e.end} < chr::sys_days{e.start}) {
            throw ArgumentError(fmt::format("schedule entry for {} ends ({}) before it starts ({})",
                                            e.commune, format_date(*e.end), format_date(e.start)));
        }
    }
    // Sort by (commune, kind, start) so overlap checks only compare neighbours.
    std::stable_sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
        if (a.commune != b.commune) return a.commune < b.commune;
        if (a.kind != b.kind) return a.kind < b.kind;
        return chr::sys_days{a.start} < chr::sys_days{b.start};
    });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        const auto& prev = entries_[i - 1];
        const auto& cur = entries_[i];
        if (prev.commune != cur.commune || prev.kind != cur.kind) continue;
        if (!prev.end || chr::sys_days{cur.start} <= chr::sys_days{*prev.end}) {
            throw ArgumentError(fmt::format("overlapping {} entries for commune {} starting {} and {}",
                                            to_string(cur.kind), cur.commune,
                                            format_date(prev.start), format_date(cur.start)));
        }
    }
}

std::vector<InterventionEntry> InterventionSchedule::for_commune(std::string_view commune) const {
    std::vector<InterventionEntry> out;
    for (const auto& e : entries_) {
        if (e.commune == commune) out.push_back(e);
    }
    return out;
}

std::set<std::string> InterventionSchedule::communes() const {
    std::set<std::string> out;
    for (const auto& e : entries_) out.insert(e.commune);
    return out;
}

std::vector<InterventionKind> InterventionSchedule::active(std::string_view commune, Date d) const {
    std::vector<InterventionKind> out;
    for (const auto& e : entries_) {
        if (e.commune == commune && e.covers(d)) out.push_back(e.kind);
    }
    return out;
}

std::optional<int> treatment_day(const InterventionSchedule& schedule, const DateIndex& index,
                                 std::string_view commune, InterventionKind kind) {
    std::optional<int> first;
    for (const auto& e : schedule.entries()) {
        if (e.commune != commune || e.kind != kind) continue;
        const int offset = index.offset_of(e.start);
        if (!first || offset < *first) first = offset;
    }
    return first;
}

StudyRegion::StudyRegion(std::vector<Commune> communes, DateIndex index, InterventionSchedule schedule)
    : communes_(std::move(communes)), index_(index), schedule_(std::move(schedule)) {
    for (std::size_t i = 0; i < communes_.size(); ++i) {
        const auto& c = communes_[i];
        if (c.population < 1) {
            throw ArgumentError(fmt::format("commune {} has population {}", c.id, c.population));
        }
        if (!by_id_.emplace(c.id, i).second) {
            throw DuplicateKeyError(fmt::format("duplicate commune id {}", c.id));
        }
    }
    for (const auto& id : schedule_.communes()) {
        if (!by_id_.contains(id)) {
            throw LookupError(fmt::format("schedule references unknown commune {}", id));
        }
    }
}

bool StudyRegion::has_commune(std::string_view id) const {
    return by_id_.find(id) != by_id_.end();
}

const Commune& StudyRegion::commune(std::string_view id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw LookupError(fmt::format("unknown commune {}", id));
    return communes_[it->second];
}

std::vector<std::string> StudyRegion::commune_ids() const {
    std::vector<std::string> ids;
    ids.reserve(communes_.size());
    for (const auto& c : communes_) ids.push_back(c.id);
    return ids;
}

void StudyRegion::add_panel(PanelSeries series) {
    if (!has_commune(series.unit_id())) {
        throw LookupError(fmt::format("panel for unknown unit {}", series.unit_id()));
    }
    if (static_cast<int>(series.size()) != index_.size()) {
        throw RangeError(fmt::format("panel {}/{} has {} days, index has {}", series.unit_id(),
                                     to_string(series.variable()), series.size(), index_.size()));
    }
    auto key = std::make_pair(series.unit_id(), series.variable());
    if (panels_.contains(key)) {
        throw DuplicateKeyError(fmt::format("second {} series for {}", to_string(key.second), key.first));
    }
    panels_.emplace(std::move(key), std::move(series));
}

void StudyRegion::replace_panel(PanelSeries series) {
    auto key = std::make_pair(series.unit_id(), series.variable());
    panels_.erase(key);
    add_panel(std::move(series));
}

bool StudyRegion::has_panel(std::string_view unit, Variable v) const {
    return panels_.contains(std::make_pair(std::string(unit), v));
}

const PanelSeries& StudyRegion::panel(std::string_view unit, Variable v) const {
    auto it = panels_.find(std::make_pair(std::string(unit), v));
    if (it == panels_.end()) {
        throw LookupError(fmt::format("no {} series for {}", to_string(v), unit));
    }
    return it->second;
}

std::optional<int> treatment_day(const StudyRegion& region, std::string_view commune,
                                 InterventionKind kind) {
    if (!region.has_commune(commune)) throw LookupError(fmt::format("unknown commune {}", commune));
    return treatment_day(region.schedule(), region.dates(), commune, kind);
}

}  // namespace mobiscope
