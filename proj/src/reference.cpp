#include "mobiscope/reference.hpp"

#include <fmt/format.h>

namespace mobiscope::santiago {

namespace {

ReferenceCommune make(const char* id, const char* name, long pop, double income, ScoreBand band) {
    return {Commune{id, name, pop, income, band == ScoreBand::rural_low}, band};
}

}  // namespace

const std::vector<ReferenceCommune>& communes() {
    using B = ScoreBand;
    static const std::vector<ReferenceCommune> table = {
        make("13101", "Santiago", 503147, 0.62, B::high),
        make("13102", "Cerrillos", 88956, 0.35, B::mid),
        make("13103", "Cerro Navia", 142465, 0.15, B::mid),
        make("13104", "Conchalí", 139195, 0.22, B::mid),
        make("13105", "El Bosque", 172000, 0.20, B::mid),
        make("13106", "Estación Central", 206792, 0.40, B::high),
        make("13107", "Huechuraba", 112528, 0.45, B::mid),
        make("13108", "Independencia", 142065, 0.38, B::mid),
        make("13109", "La Cisterna", 100434, 0.40, B::mid),
        make("13110", "La Florida", 402433, 0.48, B::high),
        make("13111", "La Granja", 122557, 0.18, B::mid),
        make("13112", "La Pintana", 189335, 0.10, B::mid),
        make("13113", "La Reina", 100252, 0.82, B::mid),
        make("13114", "Las Condes", 330759, 0.95, B::high),
        make("13115", "Lo Barnechea", 124076, 0.90, B::mid),
        make("13116", "Lo Espejo", 103865, 0.12, B::mid),
        make("13117", "Lo Prado", 104316, 0.20, B::mid),
        make("13118", "Macul", 134635, 0.50, B::mid),
        make("13119", "Maipú", 578605, 0.45, B::high),
        make("13120", "Ñuñoa", 250192, 0.80, B::high),
        make("13121", "Pedro Aguirre Cerda", 107803, 0.18, B::mid),
        make("13122", "Peñalolén", 266798, 0.42, B::mid),
        make("13123", "Providencia", 157749, 0.92, B::high),
        make("13124", "Pudahuel", 253139, 0.28, B::mid),
        make("13125", "Quilicura", 254694, 0.35, B::mid),
        make("13126", "Quinta Normal", 136368, 0.25, B::mid),
        make("13127", "Recoleta", 190075, 0.22, B::mid),
        make("13128", "Renca", 160847, 0.18, B::mid),
        make("13129", "San Joaquín", 103485, 0.28, B::mid),
        make("13130", "San Miguel", 133059, 0.50, B::mid),
        make("13131", "San Ramón", 86510, 0.12, B::mid),
        make("13132", "Vitacura", 96774, 0.98, B::high),
        make("13201", "Puente Alto", 645909, 0.22, B::high),
        make("13202", "Pirque", 26521, 0.45, B::rural_low),
        make("13203", "San José de Maipo", 18189, 0.30, B::rural_low),
        make("13301", "Colina", 180353, 0.35, B::low),
        make("13302", "Lampa", 126898, 0.25, B::low),
        make("13303", "Tiltil", 21477, 0.15, B::rural_low),
        make("13401", "San Bernardo", 334836, 0.25, B::low),
        make("13402", "Buin", 109641, 0.28, B::low),
        make("13403", "Calera de Tango", 28525, 0.40, B::rural_low),
        make("13404", "Paine", 82766, 0.22, B::rural_low),
        make("13501", "Melipilla", 135013, 0.25, B::low),
        make("13502", "Alhué", 7405, 0.15, B::rural_low),
        make("13503", "Curacaví", 35791, 0.20, B::rural_low),
        make("13504", "María Pinto", 14702, 0.15, B::rural_low),
        make("13505", "San Pedro", 10393, 0.12, B::rural_low),
        make("13601", "Talagante", 81000, 0.28, B::low),
        make("13602", "El Monte", 41000, 0.22, B::rural_low),
        make("13603", "Isla de Maipo", 41000, 0.22, B::rural_low),
        make("13604", "Padre Hurtado", 67000, 0.30, B::low),
        make("13605", "Peñaflor", 100000, 0.30, B::low),
    };
    return table;
}

std::string id_of(std::string_view name) {
    for (const auto& rc : communes()) {
        if (rc.commune.name == name) return rc.commune.id;
    }
    throw LookupError(fmt::format("no reference commune named '{}'", name));
}

InterventionSchedule schedule_2020() {
    std::vector<InterventionEntry> entries;
    auto add = [&](std::string_view name, const char* start, const char* end, InterventionKind kind) {
        std::optional<Date> e;
        if (end) e = parse_date(end);
        entries.push_back({id_of(name), parse_date(start), e, kind});
    };
    constexpr auto partial = InterventionKind::partial_lockdown;
    constexpr auto total = InterventionKind::total_lockdown;
    constexpr auto phase2 = InterventionKind::phase2_transition;

    // Dynamic partial lockdowns, March 26 to the start of the total lockdown.
    add("Las Condes", "2020-03-26", "2020-04-15", partial);
    add("Vitacura", "2020-03-26", "2020-04-08", partial);
    add("Lo Barnechea", "2020-03-26", "2020-04-08", partial);
    add("Providencia", "2020-03-26", "2020-04-08", partial);
    add("Santiago", "2020-03-26", "2020-05-11", partial);
    add("Ñuñoa", "2020-03-26", "2020-05-14", partial);
    add("Independencia", "2020-03-26", "2020-04-01", partial);
    add("Independencia", "2020-04-30", "2020-05-11", partial);
    add("Puente Alto", "2020-04-09", "2020-05-11", partial);
    add("El Bosque", "2020-04-16", "2020-05-14", partial);
    add("San Bernardo", "2020-04-16", "2020-05-11", partial);
    add("Quinta Normal", "2020-04-23", "2020-05-11", partial);
    add("Pedro Aguirre Cerda", "2020-04-23", "2020-05-11", partial);
    add("Estación Central", "2020-04-30", "2020-05-11", partial);
    add("San Ramón", "2020-04-30", "2020-05-11", partial);
    add("Quilicura", "2020-05-07", "2020-05-11", partial);
    add("Recoleta", "2020-05-07", "2020-05-11", partial);
    add("Cerrillos", "2020-05-07", "2020-05-11", partial);

    struct Exit {
        const char* date;
        std::vector<const char*> names;
    };
    const std::vector<Exit> exits = {
        {"2020-07-28", {"Colina", "La Reina", "Las Condes", "Lo Barnechea", "Tiltil", "Vitacura"}},
        {"2020-08-10", {"Lampa", "Melipilla", "Providencia"}},
        {"2020-08-17", {"Santiago", "Estación Central"}},
        {"2020-08-24", {"San José de Maipo", "Peñalolén", "Padre Hurtado", "Peñaflor"}},
        {"2020-08-31", {"La Florida", "Maipú", "Cerrillos", "Calera de Tango", "El Monte",
                        "Pedro Aguirre Cerda", "Macul", "Talagante", "Huechuraba"}},
        {"2020-09-07", {"Recoleta", "San Ramón", "La Cisterna", "La Granja", "San Joaquín", "San Miguel"}},
        {"2020-09-14", {"Quilicura", "Isla de Maipo", "San Bernardo"}},
        {"2020-09-21", {"Pudahuel", "Independencia", "El Bosque"}},
        {"2020-09-28", {"Quinta Normal", "La Pintana", "Lo Prado", "Cerro Navia", "Buin", "Conchalí",
                        "Puente Alto", "Lo Espejo"}},
    };
    // Communes under total lockdown from May 12; the rest of the region followed on May 15.
    const std::vector<const char*> early_total = {
        "Santiago", "Quilicura", "Conchalí", "Cerro Navia", "Renca", "Recoleta", "Independencia",
        "Quinta Normal", "Macul", "Lo Espejo", "San Miguel", "San Joaquín", "Peñalolén", "La Florida",
        "La Granja", "La Cisterna", "La Pintana", "Estación Central", "Cerrillos", "Pedro Aguirre Cerda",
        "San Ramón", "San Bernardo", "Puente Alto"};

    auto exit_date = [&](std::string_view name) -> std::optional<std::string> {
        for (const auto& ex : exits) {
            for (const char* n : ex.names) {
                if (name == n) return std::string(ex.date);
            }
        }
        return std::nullopt;
    };
    auto is_early = [&](std::string_view name) {
        for (const char* n : early_total) {
            if (name == n) return true;
        }
        return false;
    };

    std::vector<std::string> locked;
    for (const auto& ex : exits) {
        for (const char* n : ex.names) locked.emplace_back(n);
    }
    locked.emplace_back("Ñuñoa");
    locked.emplace_back("Renca");

    for (const auto& name : locked) {
        const char* start = is_early(name) ? "2020-05-12" : "2020-05-15";
        const auto exit = exit_date(name);
        if (exit) {
            const std::string last = format_date(add_days(parse_date(*exit), -1));
            add(name, start, last.c_str(), total);
            add(name, exit->c_str(), nullptr, phase2);
        } else {
            add(name, start, nullptr, total);
        }
    }
    add("Paine", "2020-08-24", nullptr, total);

    return InterventionSchedule(std::move(entries));
}

}  // namespace mobiscope::santiago
