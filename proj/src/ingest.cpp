#include "mobiscope/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <tuple>

#include <fmt/format.h>
#include <fmt/os.h>

namespace mobiscope::ingest {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Line-oriented reader that enforces the exact header and tracks 1-based line numbers.
class CsvReader {
public:
    CsvReader(const fs::path& path, std::string_view header, std::size_t columns)
        : path_(path.string()), in_(path), columns_(columns) {
        if (!in_) throw SchemaError(path_, 1, "cannot open file");
        std::string line;
        if (!std::getline(in_, line)) throw SchemaError(path_, 1, "missing header row");
        line_no_ = 1;
        auto got = trim(line);
        // Tolerate a UTF-8 byte order mark.
        if (got.starts_with("\xEF\xBB\xBF")) got.remove_prefix(3);
        if (got != header) {
            throw SchemaError(path_, 1, fmt::format("header '{}' does not match '{}'", got, header));
        }
    }

    /// Next non-blank row, or false at end of file.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (trim(line).empty()) continue;
            fields = split_csv_line(line);
            for (auto& f : fields) f = std::string(trim(f));
            if (fields.size() != columns_) {
                fail(fmt::format("expected {} fields, found {}", columns_, fields.size()));
            }
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& reason) const {
        throw SchemaError(path_, line_no_, reason);
    }

    template <class F>
    auto parse(F&& f) const -> decltype(f()) {
        try {
            return f();
        } catch (const ArgumentError& e) {
            fail(e.what());
        }
    }

    long parse_count(const std::string& text, std::string_view what) const {
        long value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            fail(fmt::format("{} '{}' is not an integer", what, text));
        }
        if (value < 0) fail(fmt::format("{} must be non-negative, got {}", what, value));
        return value;
    }

    double parse_real(const std::string& text, std::string_view what) const {
        if (text.empty()) fail(fmt::format("missing {}", what));
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            fail(fmt::format("{} '{}' is not a number", what, text));
        }
        return value;
    }

    void require_nonempty(const std::string& text, std::string_view what) const {
        if (text.empty()) fail(fmt::format("missing {}", what));
    }

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_no_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t columns_;
    std::size_t line_no_ = 0;
};

std::string quote_if_needed(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

fmt::ostream open_output(const fs::path& path, const char* header) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto out = fmt::output_file(path.string());
    out.print("{}\n", header);
    return out;
}

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else if (c != '\r' && c != '\n') {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::vector<HexRecord> read_hex_scores(const fs::path& path) {
    CsvReader reader(path, kHexScoresHeader, 4);
    std::vector<HexRecord> out;
    std::set<std::pair<int, std::string>> seen;
    std::vector<std::string> f;
    while (reader.next(f)) {
        HexRecord r;
        r.date = reader.parse([&] { return parse_date(f[0]); });
        reader.require_nonempty(f[1], "hex_id");
        reader.require_nonempty(f[2], "commune_id");
        r.hex_id = f[1];
        r.commune_id = f[2];
        r.displacements = reader.parse_count(f[3], "displacements");
        const int day = days_between(Date{std::chrono::year{1970}, std::chrono::January, std::chrono::day{1}}, r.date);
        if (!seen.emplace(day, r.hex_id).second) {
            throw DuplicateKeyError(fmt::format("{}:{}: duplicate (date, hex) ({}, {})", reader.path(),
                                                reader.line(), f[0], r.hex_id));
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_hex_scores(const fs::path& path, const std::vector<HexRecord>& records) {
    auto out = open_output(path, kHexScoresHeader);
    for (const auto& r : records) {
        out.print("{},{},{},{}\n", format_date(r.date), r.hex_id, r.commune_id, r.displacements);
    }
}

std::vector<ODMatrix> read_od(const fs::path& path, const std::set<std::string>& known) {
    CsvReader reader(path, kOdHeader, 5);
    std::map<std::pair<int, int>, ODMatrix> grouped;
    const Date epoch{std::chrono::year{1970}, std::chrono::January, std::chrono::day{1}};
    std::vector<std::string> f;
    while (reader.next(f)) {
        const Date date = reader.parse([&] { return parse_date(f[0]); });
        const TimeSlot slot = reader.parse([&] { return TimeSlot::parse(f[1]); });
        reader.require_nonempty(f[2], "origin");
        reader.require_nonempty(f[3], "destination");
        for (int k : {2, 3}) {
            if (!known.empty() && !known.contains(f[k])) {
                reader.fail(fmt::format("unknown commune id {}", f[k]));
            }
        }
        const long trips = reader.parse_count(f[4], "trips");
        auto& m = grouped[{days_between(epoch, date), slot.start_minute}];
        m.date = date;
        m.slot = slot;
        if (!m.trips.emplace(std::make_pair(f[2], f[3]), trips).second) {
            throw DuplicateKeyError(fmt::format("{}:{}: duplicate OD row ({}, {}, {}, {})", reader.path(),
                                                reader.line(), f[0], f[1], f[2], f[3]));
        }
    }
    std::vector<ODMatrix> out;
    out.reserve(grouped.size());
    for (auto& [key, m] : grouped) out.push_back(std::move(m));
    return out;
}

void write_od(const fs::path& path, const std::vector<ODMatrix>& matrices) {
    auto out = open_output(path, kOdHeader);
    for (const auto& m : matrices) {
        const auto date = format_date(m.date);
        const auto slot = m.slot.to_string();
        for (const auto& [od, trips] : m.trips) {
            out.print("{},{},{},{},{}\n", date, slot, od.first, od.second, trips);
        }
    }
}

std::map<std::string, Antenna> read_antennas(const fs::path& path) {
    CsvReader reader(path, kAntennasHeader, 4);
    std::map<std::string, Antenna> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        reader.require_nonempty(f[0], "antenna_id");
        reader.require_nonempty(f[1], "commune_id");
        Antenna a{f[1], reader.parse_real(f[2], "lat"), reader.parse_real(f[3], "lon")};
        if (!out.emplace(f[0], std::move(a)).second) {
            throw DuplicateKeyError(fmt::format("{}:{}: duplicate antenna {}", reader.path(), reader.line(), f[0]));
        }
    }
    return out;
}

TransitionLog read_transitions(const fs::path& path, const fs::path& antenna_map_path) {
    TransitionLog log;
    log.antennas = read_antennas(antenna_map_path);
    CsvReader reader(path, kTransitionsHeader, 3);
    std::vector<std::string> f;
    while (reader.next(f)) {
        reader.require_nonempty(f[0], "device");
        const auto ts = reader.parse([&] { return parse_timestamp(f[1]); });
        if (!log.antennas.contains(f[2])) {
            reader.fail(fmt::format("antenna {} is not in the antenna map", f[2]));
        }
        log.events.push_back({f[0], ts, f[2]});
    }
    std::stable_sort(log.events.begin(), log.events.end(), [](const auto& a, const auto& b) {
        return std::tie(a.device, a.timestamp) < std::tie(b.device, b.timestamp);
    });
    return log;
}

void write_antennas(const fs::path& path, const std::map<std::string, Antenna>& antennas) {
    auto out = open_output(path, kAntennasHeader);
    for (const auto& [id, a] : antennas) {
        out.print("{},{},{:.6f},{:.6f}\n", id, a.commune, a.lat, a.lon);
    }
}

void write_transitions(const fs::path& path, const TransitionLog& log) {
    auto out = open_output(path, kTransitionsHeader);
    for (const auto& e : log.events) {
        out.print("{},{},{}\n", e.device, format_timestamp(e.timestamp), e.antenna);
    }
}

std::vector<CaseRecord> read_case_records(const fs::path& path) {
    CsvReader reader(path, kCasesHeader, 3);
    std::vector<CaseRecord> out;
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<std::string> f;
    while (reader.next(f)) {
        CaseRecord r;
        r.date = reader.parse([&] { return parse_date(f[0]); });
        reader.require_nonempty(f[1], "commune_id");
        r.commune_id = f[1];
        r.cum_cases = reader.parse_count(f[2], "cum_cases");
        if (!seen.emplace(f[0], f[1]).second) {
            throw DuplicateKeyError(fmt::format("{}:{}: duplicate (date, commune) ({}, {})", reader.path(),
                                                reader.line(), f[0], f[1]));
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_cases(const fs::path& path, const std::vector<CaseRecord>& records) {
    auto out = open_output(path, kCasesHeader);
    for (const auto& r : records) {
        out.print("{},{},{}\n", format_date(r.date), r.commune_id, r.cum_cases);
    }
}

std::map<std::string, PanelSeries> cases_to_panels(const std::vector<CaseRecord>& records,
                                                   const DateIndex& index, Warnings& warnings,
                                                   const std::string& source) {
    const auto n = static_cast<std::size_t>(index.size());
    std::map<std::string, std::pair<std::vector<double>, std::vector<bool>>> raw;
    std::size_t outside = 0;
    for (const auto& r : records) {
        auto& [values, mask] = raw[r.commune_id];
        if (values.empty()) {
            values.assign(n, 0.0);
            mask.assign(n, true);
        }
        const int day = index.offset_of(r.date);
        if (!index.contains(day)) {
            ++outside;
            continue;
        }
        values[day] = static_cast<double>(r.cum_cases);
        mask[day] = false;
    }
    if (outside > 0) {
        warnings.add(fmt::format("{}: {} rows outside the study window ignored", source, outside));
    }
    std::map<std::string, PanelSeries> out;
    for (auto& [commune, vm] : raw) {
        auto& [values, mask] = vm;
        double running = -1.0;
        std::size_t repaired = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask[i]) continue;
            if (values[i] < running) {
                values[i] = running;
                ++repaired;
            }
            running = values[i];
        }
        if (repaired > 0) {
            warnings.add(fmt::format("{}: cumulative cases for commune {} decreased on {} day(s); "
                                     "repaired by running maximum", source, commune, repaired));
        }
        out.emplace(commune, PanelSeries(commune, Variable::cum_cases, std::move(values), std::move(mask)));
    }
    return out;
}

std::map<std::string, PanelSeries> read_cases(const fs::path& path, const DateIndex& index,
                                              Warnings& warnings) {
    return cases_to_panels(read_case_records(path), index, warnings, path.string());
}

std::vector<Commune> read_socio(const fs::path& path) {
    CsvReader reader(path, kSocioHeader, 5);
    std::vector<Commune> out;
    std::set<std::string> seen;
    std::vector<std::string> f;
    while (reader.next(f)) {
        Commune c;
        reader.require_nonempty(f[0], "commune_id");
        c.id = f[0];
        c.name = f[1];
        reader.require_nonempty(f[2], "population");
        c.population = reader.parse_count(f[2], "population");
        if (c.population < 1) reader.fail("population must be at least 1");
        c.income_index = reader.parse_real(f[3], "income_index");
        if (f[4] == "true" || f[4] == "1") {
            c.is_rural = true;
        } else if (f[4] == "false" || f[4] == "0") {
            c.is_rural = false;
        } else {
            reader.fail(fmt::format("is_rural '{}' is not a boolean", f[4]));
        }
        if (!seen.insert(c.id).second) {
            throw DuplicateKeyError(fmt::format("{}:{}: duplicate commune {}", reader.path(), reader.line(), c.id));
        }
        out.push_back(std::move(c));
    }
    return out;
}

void write_socio(const fs::path& path, const std::vector<Commune>& communes) {
    auto out = open_output(path, kSocioHeader);
    for (const auto& c : communes) {
        out.print("{},{},{},{},{}\n", c.id, quote_if_needed(c.name), c.population, c.income_index,
                  c.is_rural ? "true" : "false");
    }
}

InterventionSchedule read_schedule(const fs::path& path) {
    CsvReader reader(path, kScheduleHeader, 4);
    std::vector<InterventionEntry> entries;
    std::vector<std::string> f;
    while (reader.next(f)) {
        InterventionEntry e;
        reader.require_nonempty(f[0], "commune_id");
        e.commune = f[0];
        e.start = reader.parse([&] { return parse_date(f[1]); });
        if (!f[2].empty()) e.end = reader.parse([&] { return parse_date(f[2]); });
        e.kind = reader.parse([&] { return parse_intervention_kind(f[3]); });
        if (e.end && days_between(e.start, *e.end) < 0) reader.fail("end date before start date");
        entries.push_back(std::move(e));
    }
    try {
        return InterventionSchedule(std::move(entries));
    } catch (const ArgumentError& e) {
        throw SchemaError(path.string(), reader.line() == 0 ? 1 : reader.line(), e.what());
    }
}

void write_schedule(const fs::path& path, const InterventionSchedule& schedule) {
    auto out = open_output(path, kScheduleHeader);
    for (const auto& e : schedule.entries()) {
        out.print("{},{},{},{}\n", e.commune, format_date(e.start), e.end ? format_date(*e.end) : "",
                  to_string(e.kind));
    }
}

}  // namespace mobiscope::ingest
