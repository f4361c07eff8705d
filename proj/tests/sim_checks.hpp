#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mobiscope/simgen.hpp"
#include "support.hpp"

namespace testing {

// First violated invariant of a generated city, or an empty string.
inline std::string city_violation(const mobiscope::simgen::City& city) {
    const auto& run = city.truth.run;
    for (std::size_t c = 0; c < run.population.size(); ++c) {
        for (std::size_t t = 0; t < run.s[c].size(); ++t) {
            const auto total = run.s[c][t] + run.e[c][t] + run.i[c][t] + run.r[c][t];
            if (total != run.population[c]) {
                return fmt::format("conservation broken for commune {} day {}: {} != {}", c, t, total,
                                   run.population[c]);
            }
            if (run.s[c][t] < 0 || run.e[c][t] < 0 || run.i[c][t] < 0 || run.r[c][t] < 0 ||
                run.new_infections[c][t] < 0) {
                return fmt::format("negative compartment for commune {} day {}", c, t);
            }
            if (t > 0 && (run.s[c][t] > run.s[c][t - 1] || run.r[c][t] < run.r[c][t - 1])) {
                return fmt::format("S increased or R decreased for commune {} day {}", c, t);
            }
        }
    }
    std::map<std::string, std::vector<std::pair<int, long>>> by_commune;
    for (const auto& rec : city.cases) {
        if (rec.cum_cases < 0) return fmt::format("negative case count for {}", rec.commune_id);
        by_commune[rec.commune_id].emplace_back(city.dates.offset_of(rec.date), rec.cum_cases);
    }
    for (auto& [id, rows] : by_commune) {
        std::sort(rows.begin(), rows.end());
        for (std::size_t k = 1; k < rows.size(); ++k) {
            if (rows[k].second < rows[k - 1].second) return fmt::format("cumulative cases of {} decrease", id);
        }
    }
    for (const auto& h : city.hex) {
        if (h.displacements < 0) return fmt::format("negative displacement count for {}", h.hex_id);
    }
    for (const auto& m : city.od) {
        for (const auto& [key, trips] : m.trips) {
            if (trips < 0) return fmt::format("negative trips {} -> {}", key.first, key.second);
        }
    }
    for (const auto& row : city.truth.expected_incidence) {
        for (double v : row) {
            if (v < 0) return "negative expected incidence";
        }
    }
    return {};
}

inline std::int64_t total_infections(const mobiscope::simgen::EpidemicRun& run) {
    std::int64_t total = 0;
    for (const auto& row : run.new_infections) {
        for (auto v : row) total += v;
    }
    return total;
}

// Last reported cumulative count per commune.
inline std::map<std::string, long> final_cases(const mobiscope::simgen::City& city) {
    std::map<std::string, std::pair<int, long>> last;
    for (const auto& rec : city.cases) {
        const int day = city.dates.offset_of(rec.date);
        auto [it, fresh] = last.try_emplace(rec.commune_id, day, rec.cum_cases);
        if (!fresh && day > it->second.first) it->second = {day, rec.cum_cases};
    }
    std::map<std::string, long> out;
    for (const auto& [id, v] : last) out[id] = v.second;
    return out;
}

// Names of files whose bytes differ between two directories (or exist in only one).
inline std::vector<std::string> differing_files(const fs::path& a, const fs::path& b) {
    std::vector<std::string> out;
    std::map<std::string, int> names;
    for (const auto& e : fs::directory_iterator(a)) names[e.path().filename().string()] |= 1;
    for (const auto& e : fs::directory_iterator(b)) names[e.path().filename().string()] |= 2;
    for (const auto& [name, where] : names) {
        if (where != 3 || read_text(a / name) != read_text(b / name)) out.push_back(name);
    }
    return out;
}

}  // namespace testing
