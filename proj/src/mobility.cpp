#include "mobiscope/mobility.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/os.h>

namespace mobiscope::mobility {

std::vector<std::string> HexScoreGrid::hexagons_of(std::string_view commune) const {
    std::vector<std::string> out;
    for (const auto& [hex, c] : hex_commune) {
        if (c == commune) out.push_back(hex);
    }
    return out;
}

HexScoreGrid score_hexagons(const std::vector<ingest::HexRecord>& records, const DateIndex& dates,
                            Warnings& warnings) {
    HexScoreGrid grid;
    grid.dates = dates;
    grid.scores.resize(static_cast<std::size_t>(dates.size()));

    std::vector<std::vector<std::pair<std::string, long>>> per_day(grid.scores.size());
    std::size_t outside = 0;
    for (const auto& r : records) {
        auto [it, inserted] = grid.hex_commune.emplace(r.hex_id, r.commune_id);
        if (!inserted && it->second != r.commune_id) {
            throw ArgumentError(fmt::format("hexagon {} assigned to both {} and {}", r.hex_id,
                                            it->second, r.commune_id));
        }
        const int day = dates.offset_of(r.date);
        if (!dates.contains(day)) {
            ++outside;
            continue;
        }
        if (r.displacements < 0) {
            throw ArgumentError(fmt::format("negative displacement count for hexagon {}", r.hex_id));
        }
        per_day[day].emplace_back(r.hex_id, r.displacements);
    }
    if (outside > 0) {
        warnings.add(fmt::format("hex scores: {} records outside the study window ignored", outside));
    }

    std::size_t empty_days = 0;
    std::vector<long> sorted;
    for (std::size_t day = 0; day < per_day.size(); ++day) {
        const auto& counts = per_day[day];
        if (counts.empty()) {
            ++empty_days;
            continue;
        }
        sorted.clear();
        for (const auto& [hex, c] : counts) sorted.push_back(c);
        std::sort(sorted.begin(), sorted.end());
        const double n = static_cast<double>(sorted.size());
        for (const auto& [hex, c] : counts) {
            const auto rank = std::upper_bound(sorted.begin(), sorted.end(), c) - sorted.begin();
            grid.scores[day][hex] = 100.0 * static_cast<double>(rank) / n;
        }
    }
    if (empty_days > 0) {
        warnings.add(fmt::format("hex scores: {} day(s) without reporting hexagons skipped", empty_days));
    }
    return grid;
}

PanelSeries commune_score(const HexScoreGrid& grid, std::string_view commune) {
    const auto hexes = grid.hexagons_of(commune);
    if (hexes.empty()) {
        throw ConfigError(fmt::format("commune {} has no assigned hexagons", commune));
    }
    const auto n = grid.scores.size();
    std::vector<double> values(n, 0.0);
    std::vector<bool> mask(n, true);
    for (std::size_t day = 0; day < n; ++day) {
        double sum = 0.0;
        int count = 0;
        for (const auto& hex : hexes) {
            auto it = grid.scores[day].find(hex);
            if (it == grid.scores[day].end()) continue;
            sum += it->second;
            ++count;
        }
        if (count > 0) {
            values[day] = sum / count;
            mask[day] = false;
        }
    }
    return PanelSeries(std::string(commune), Variable::score, std::move(values), std::move(mask));
}

MobilityPanels mobility_indices(const TransitionLog& log, const DateIndex& dates,
                                std::span<const std::string> communes, double normalizer) {
    MobilityPanels out;
    const auto n = static_cast<std::size_t>(dates.size());
    std::vector<std::string> units(communes.begin(), communes.end());
    if (units.empty()) {
        std::set<std::string> from_map;
        for (const auto& [id, a] : log.antennas) from_map.insert(a.commune);
        units.assign(from_map.begin(), from_map.end());
    }
    for (const auto& c : units) {
        out.raw_in[c].assign(n, 0);
        out.raw_out[c].assign(n, 0);
    }

    // Events may be interleaved across devices; order them per device.
    std::vector<std::size_t> order(log.events.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = log.events[a];
        const auto& eb = log.events[b];
        if (ea.device != eb.device) return ea.device < eb.device;
        return ea.timestamp < eb.timestamp;
    });

    auto commune_of = [&](const std::string& antenna) -> const std::string& {
        auto it = log.antennas.find(antenna);
        if (it == log.antennas.end()) throw LookupError(fmt::format("antenna {} not mapped", antenna));
        return it->second.commune;
    };

    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& prev = log.events[order[k - 1]];
        const auto& cur = log.events[order[k]];
        if (prev.device != cur.device || prev.antenna == cur.antenna) continue;
        const int day = dates.offset_of(date_of_timestamp(cur.timestamp));
        if (!dates.contains(day)) continue;
        const auto& from = commune_of(prev.antenna);
        const auto& to = commune_of(cur.antenna);
        if (from == to) {
            auto it = out.raw_in.find(from);
            if (it != out.raw_in.end()) ++it->second[day];
        } else {
            auto it = out.raw_out.find(from);
            if (it != out.raw_out.end()) ++it->second[day];
        }
    }

    double total = 0.0;
    for (const auto& c : units) {
        for (std::size_t d = 0; d < n; ++d) total += static_cast<double>(out.raw_in[c][d] + out.raw_out[c][d]);
    }
    out.total_transitions = static_cast<long>(total);
    if (normalizer <= 0.0) {
        const double cells = static_cast<double>(units.size() * n);
        normalizer = (cells > 0 && total > 0) ? total / cells : 1.0;
    }
    out.normalizer = normalizer;

    for (const auto& c : units) {
        std::vector<double> in(n), ot(n), idx(n);
        for (std::size_t d = 0; d < n; ++d) {
            in[d] = static_cast<double>(out.raw_in[c][d]) / normalizer;
            ot[d] = static_cast<double>(out.raw_out[c][d]) / normalizer;
            idx[d] = in[d] + ot[d];
        }
        out.mob_in.emplace(c, PanelSeries::complete(c, Variable::mob_in, std::move(in)));
        out.mob_out.emplace(c, PanelSeries::complete(c, Variable::mob_out, std::move(ot)));
        out.mobility_index.emplace(c, PanelSeries::complete(c, Variable::mobility_index, std::move(idx)));
    }
    return out;
}

FlowVector flow_vector(const std::vector<ODMatrix>& od, const std::set<std::string>& risk_set,
                       const DateIndex& dates, DayWindow window, const std::map<std::string, long>& populations,
                       SlotFilter slots) {
    if (window.empty()) throw ArgumentError("flow_vector: empty date window");
    if (risk_set.empty()) throw ArgumentError("flow_vector: empty risk set");
    for (const auto& r : risk_set) {
        if (!populations.contains(r)) {
            throw ArgumentError(fmt::format("flow_vector: risk-set commune {} is not in the region", r));
        }
    }
    for (const auto& [id, pop] : populations) {
        if (pop <= 0) throw ArgumentError(fmt::format("flow_vector: population of {} is {}", id, pop));
    }

    FlowVector fv;
    fv.risk_set = risk_set;
    fv.window = window;
    fv.slots = slots;
    std::map<std::string, double> trips;
    for (const auto& m : od) {
        if (!window.contains(dates.offset_of(m.date)) || !slots.accepts(m.slot)) continue;
        for (const auto& [key, count] : m.trips) {
            if (risk_set.contains(key.second)) trips[key.first] += static_cast<double>(count);
        }
    }
    for (const auto& [id, pop] : populations) {
        if (risk_set.contains(id)) {
            fv.flow[id] = 0.0;
        } else {
            auto it = trips.find(id);
            fv.flow[id] = it == trips.end() ? 0.0 : it->second / static_cast<double>(pop);
        }
    }
    return fv;
}

std::set<std::string> risk_set(const std::map<std::string, double>& rates, int k) {
    if (k < 1) throw ArgumentError(fmt::format("risk_set: k must be >= 1, got {}", k));
    std::vector<std::pair<std::string, double>> ranked(rates.begin(), rates.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::set<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < k; ++i) out.insert(ranked[i].first);
    return out;
}

std::map<std::string, double> case_rates_at(const StudyRegion& region, int day) {
    if (!region.dates().contains(day)) {
        throw RangeError(fmt::format("cutoff day {} outside the study window", day));
    }
    std::map<std::string, double> rates;
    for (const auto& c : region.communes()) {
        if (region.has_panel(c.id, Variable::cum_cases_per_100k)) {
            const auto& s = region.panel(c.id, Variable::cum_cases_per_100k);
            if (s.has_value(day)) rates[c.id] = s.value(day);
        } else if (region.has_panel(c.id, Variable::cum_cases)) {
            const auto& s = region.panel(c.id, Variable::cum_cases);
            if (s.has_value(day)) rates[c.id] = s.value(day) * 1e5 / static_cast<double>(c.population);
        }
    }
    return rates;
}

double OdGraph::total_weight() const {
    double total = 0.0;
    for (const auto& [key, w] : edges) total += w;
    return total;
}

OdGraph od_graph(const std::vector<ODMatrix>& od, const DateIndex& dates, DayWindow window, SlotFilter slots) {
    OdGraph g;
    for (const auto& m : od) {
        if (!window.contains(dates.offset_of(m.date)) || !slots.accepts(m.slot)) continue;
        for (const auto& [key, count] : m.trips) {
            g.out_degree.try_emplace(key.first, 0.0);
            g.out_degree.try_emplace(key.second, 0.0);
            if (count <= 0) continue;
            g.edges[key] += static_cast<double>(count);
            g.out_degree[key.first] += static_cast<double>(count);
        }
    }
    return g;
}

void write_od_graph(const std::filesystem::path& dir, const OdGraph& graph) {
    std::filesystem::create_directories(dir);
    auto nodes = fmt::output_file((dir / "nodes.csv").string());
    nodes.print("commune_id,outdeg\n");
    for (const auto& [id, deg] : graph.out_degree) nodes.print("{},{}\n", id, deg);
    auto edges = fmt::output_file((dir / "edges.csv").string());
    edges.print("origin,destination,weight\n");
    for (const auto& [key, w] : graph.edges) edges.print("{},{},{}\n", key.first, key.second, w);
}

}  // namespace mobiscope::mobility
