#include "mobiscope/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>
#include <fmt/os.h>
#include <fmt/ranges.h>
#include <json.hpp>

namespace mobiscope::simgen {

namespace {

using Rng = std::mt19937_64;

enum Stream : std::uint64_t { hex_stream = 1, od_stream, transition_stream, report_stream, section_stream, jitter_stream };

Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(sub),
                      static_cast<std::uint32_t>(sub >> 32)};
    return Rng(seq);
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double compliance(const CityConfig& config, const Commune& c) {
    const auto& fx = config.effects;
    return fx.compliance_low + (fx.compliance_high - fx.compliance_low) * clamp01(c.income_index);
}

double weekly_factor(Date d) { return weekday_index(d) >= 5 ? 0.8 : 1.0; }

double mobility_level(const Commune& c) { return 0.5 + 1.5 * clamp01(c.income_index); }

double kind_reduction(const InterventionEffects& fx, InterventionKind k, Date d) {
    switch (k) {
        case InterventionKind::partial_lockdown:
            return fx.partial;
        case InterventionKind::total_lockdown:
            return fx.total;
        case InterventionKind::phase2_transition:
            return weekday_index(d) >= 5 ? fx.phase2_weekend : fx.phase2_weekday;
    }
    return 0.0;
}

/// Contact reductions with the plant's cohort held in total lockdown from the plant day.
std::vector<std::vector<double>> counterfactual_reductions(const CityConfig& config) {
    auto red = reduction_matrix(config, config.schedule);
    if (!config.plant) return red;
    const auto ids = config.commune_ids();
    for (const auto& unit : config.plant->cohort) {
        const auto i = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), unit) - ids.begin());
        const auto& c = config.communes[i].commune;
        for (int t = std::max(0, config.plant->day); t < config.dates.size(); ++t) {
            const Date d = config.dates.date_at(t);
            const double glob = d >= config.effects.global_from ? config.effects.global : 0.0;
            const double local = compliance(config, c) * config.effects.total;
            red[i][static_cast<std::size_t>(t)] = 1.0 - (1.0 - glob) * (1.0 - local);
        }
    }
    return red;
}

std::vector<double> seed_exposed(const CityConfig& config) {
    const auto n = config.communes.size();
    std::vector<double> seeds(n, 0.0);
    if (!config.seeding.explicit_seeds.empty()) {
        const auto ids = config.commune_ids();
        for (const auto& [id, count] : config.seeding.explicit_seeds) {
            const auto it = std::find(ids.begin(), ids.end(), id);
            if (it == ids.end()) throw LookupError(fmt::format("seed commune {} is not in the city", id));
            seeds[static_cast<std::size_t>(it - ids.begin())] = count;
        }
        return seeds;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return config.communes[a].commune.income_index > config.communes[b].commune.income_index;
    });
    for (int k = 0; k < std::min<int>(config.seeding.top_income, static_cast<int>(n)); ++k) {
        seeds[order[static_cast<std::size_t>(k)]] = config.seeding.exposed;
    }
    return seeds;
}

std::int64_t to_micro(double persons) { return std::llround(persons * static_cast<double>(kMicro)); }

struct Overrides {
    const EpidemicRun* counterfactual = nullptr;
    std::vector<bool> cohort;
    std::vector<std::int64_t> extra;  // micro-persons per day
    int day = 0;
};

EpidemicRun run_seir(const CityConfig& config, const std::vector<std::vector<double>>& reductions,
                     const Overrides* overrides) {
    const auto n = config.communes.size();
    const int days = config.dates.size();
    const auto commute = commute_model(config);
    const auto seeds = seed_exposed(config);
    const auto& epi = config.epidemic;

    EpidemicRun run;
    auto sized = [&] { return std::vector<std::vector<std::int64_t>>(n, std::vector<std::int64_t>(days, 0)); };
    run.s = sized();
    run.e = sized();
    run.i = sized();
    run.r = sized();
    run.new_infections = sized();
    std::vector<std::int64_t> s(n), e(n, 0), inf(n, 0), rec(n, 0);
    std::vector<double> beta(n);
    for (std::size_t c = 0; c < n; ++c) {
        const auto& cm = config.communes[c].commune;
        run.population.push_back(cm.population * kMicro);
        s[c] = run.population[c];
        beta[c] = epi.beta * (1.0 + epi.vulnerability * (1.0 - clamp01(cm.income_index)));
    }

    std::vector<double> prevalence(n);
    std::vector<std::int64_t> fresh(n);
    for (int t = 0; t < days; ++t) {
        if (t == config.seeding.day) {
            for (std::size_t c = 0; c < n; ++c) {
                const auto moved = std::min(s[c], to_micro(seeds[c]));
                s[c] -= moved;
                e[c] += moved;
            }
        }
        const bool override_now = overrides && t >= overrides->day;
        for (std::size_t c = 0; c < n; ++c) {
            const std::int64_t infectious = override_now && overrides->cohort[c] && t > 0
                                                ? overrides->counterfactual->i[c][static_cast<std::size_t>(t - 1)]
                                                : inf[c];
            prevalence[c] = static_cast<double>(infectious) / static_cast<double>(run.population[c]);
        }
        for (std::size_t c = 0; c < n; ++c) {
            const double contact = 1.0 - reductions[c][static_cast<std::size_t>(t)];
            const double m = commute.share[c] * contact;
            double away = 0.0;
            for (std::size_t j = 0; j < n; ++j) away += commute.fraction[c][j] * prevalence[j];
            const double own = static_cast<double>(inf[c]) / static_cast<double>(run.population[c]);
            const double lambda = beta[c] * contact * ((1.0 - m) * own + m * away);
            std::int64_t infections = std::llround(static_cast<double>(s[c]) * (1.0 - std::exp(-lambda)));
            if (override_now && overrides->cohort[c]) {
                infections = overrides->counterfactual->new_infections[c][static_cast<std::size_t>(t)] + overrides->extra[c];
            }
            fresh[c] = std::clamp<std::int64_t>(infections, 0, s[c]);
        }
        for (std::size_t c = 0; c < n; ++c) {
            const auto onset = std::clamp<std::int64_t>(std::llround(epi.sigma * static_cast<double>(e[c])), 0, e[c]);
            const auto recovery = std::clamp<std::int64_t>(std::llround(epi.gamma * static_cast<double>(inf[c])), 0, inf[c]);
            s[c] -= fresh[c];
            e[c] += fresh[c] - onset;
            inf[c] += onset - recovery;
            rec[c] += recovery;
            const auto d = static_cast<std::size_t>(t);
            run.s[c][d] = s[c];
            run.e[c][d] = e[c];
            run.i[c][d] = inf[c];
            run.r[c][d] = rec[c];
            run.new_infections[c][d] = fresh[c];
        }
    }
    return run;
}

std::vector<std::vector<double>> incidence(const CityConfig& config, const EpidemicRun& run) {
    std::vector<std::vector<double>> out;
    const double rho = config.observation.reporting_rate;
    for (std::size_t c = 0; c < run.new_infections.size(); ++c) {
        std::vector<double> row;
        for (auto v : run.new_infections[c]) {
            row.push_back(rho * static_cast<double>(v) * 1e5 / static_cast<double>(run.population[c]));
        }
        out.push_back(std::move(row));
    }
    return out;
}

std::int64_t epoch_seconds(Date d) {
    return static_cast<std::int64_t>(std::chrono::sys_days(d).time_since_epoch().count()) * 86400;
}

std::string hex_id(std::size_t commune, int k) { return fmt::format("88b2{:04x}{:02x}fffff", commune + 1, k); }

std::string antenna_id(const std::string& commune, int k) { return fmt::format("A{}-{}", commune, k); }

double band_center(santiago::ScoreBand b) {
    switch (b) {
        case santiago::ScoreBand::rural_low:
            return 20.0;
        case santiago::ScoreBand::low:
            return 45.0;
        case santiago::ScoreBand::mid:
            return 70.0;
        case santiago::ScoreBand::high:
            return 92.0;
    }
    return 50.0;
}

}  // namespace

CityConfig CityConfig::santiago() {
    CityConfig c;
    for (const auto& rc : santiago::communes()) c.communes.push_back({rc.commune, rc.band});
    c.dates = DateIndex(parse_date("2020-02-20"), 249);
    c.schedule = santiago::schedule_2020();
    return c;
}

std::vector<std::string> CityConfig::commune_ids() const {
    std::vector<std::string> ids;
    for (const auto& c : communes) ids.push_back(c.commune.id);
    return ids;
}

void CityConfig::validate() const {
    if (communes.empty()) throw ConfigError("city has no communes");
    if (dates.size() < 1) throw ConfigError("city date index is empty");
    std::set<std::string> ids;
    for (const auto& c : communes) {
        if (c.commune.population < 1) throw ConfigError(fmt::format("commune {} has no population", c.commune.id));
        if (!ids.insert(c.commune.id).second) throw ConfigError(fmt::format("duplicate commune {}", c.commune.id));
    }
    if (!(epidemic.beta > 0 && epidemic.sigma > 0 && epidemic.gamma > 0)) {
        throw ConfigError("epidemic rates must be positive");
    }
    if (epidemic.sigma > 1.0 || epidemic.gamma > 1.0) throw ConfigError("daily exit rates must not exceed 1");
    for (double r : {effects.partial, effects.total, effects.phase2_weekday, effects.phase2_weekend, effects.global}) {
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("intervention reductions must lie in [0, 1]");
    }
    if (!(effects.compliance_low >= 0.0 && effects.compliance_high <= 1.0 &&
          effects.compliance_low <= effects.compliance_high)) {
        throw ConfigError("compliance bounds must satisfy 0 <= low <= high <= 1");
    }
    if (!(coupling >= 0.0)) throw ConfigError("coupling must be non-negative");
    if (!(observation.reporting_rate > 0.0 && observation.reporting_rate <= 1.0)) {
        throw ConfigError("reporting rate must lie in (0, 1]");
    }
    if (!(observation.delay_noise >= 0.0 && observation.delay_noise <= 1.0)) {
        throw ConfigError("delay noise must lie in [0, 1]");
    }
    for (const auto& e : schedule.entries()) {
        if (!ids.contains(e.commune)) throw ConfigError(fmt::format("schedule names unknown commune {}", e.commune));
    }
    if (plant) {
        for (const auto& u : plant->cohort) {
            if (!ids.contains(u)) throw LookupError(fmt::format("plant cohort commune {} is not in the city", u));
        }
        if (!dates.contains(plant->day)) throw ConfigError("plant day lies outside the study window");
    }
}

CityConfig plant_lifting_effect(CityConfig config, std::vector<std::string> cohort, int day, double delta) {
    const auto ids = config.commune_ids();
    for (const auto& u : cohort) {
        if (std::find(ids.begin(), ids.end(), u) == ids.end()) {
            throw LookupError(fmt::format("cohort commune {} is not in the city", u));
        }
    }
    config.plant = LiftingPlant{std::move(cohort), day, delta};
    return config;
}

std::vector<std::vector<double>> reduction_matrix(const CityConfig& config, const InterventionSchedule& schedule) {
    const auto& fx = config.effects;
    std::vector<std::vector<double>> out;
    for (const auto& cc : config.communes) {
        const auto& c = cc.commune;
        const double comp = compliance(config, c);
        const auto entries = schedule.for_commune(c.id);
        std::vector<double> row(static_cast<std::size_t>(config.dates.size()));
        for (int t = 0; t < config.dates.size(); ++t) {
            const Date d = config.dates.date_at(t);
            double local = 0.0;
            for (const auto& e : entries) {
                if (e.covers(d)) local = std::max(local, kind_reduction(fx, e.kind, d));
            }
            const double glob = d >= fx.global_from ? fx.global : 0.0;
            row[static_cast<std::size_t>(t)] = 1.0 - (1.0 - glob) * (1.0 - comp * local);
        }
        out.push_back(std::move(row));
    }
    return out;
}

CommuteModel commute_model(const CityConfig& config) {
    const auto n = config.communes.size();
    CommuteModel m;
    std::vector<double> pull(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& c = config.communes[j].commune;
        pull[j] = std::sqrt(static_cast<double>(c.population)) * (0.3 + clamp01(c.income_index));
        if (config.communes[j].band == santiago::ScoreBand::high) pull[j] *= 2.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = config.communes[i].commune;
        const double base = c.is_rural ? 0.08 : 0.12 + 0.2 * (1.0 - clamp01(c.income_index));
        m.share.push_back(std::min(0.9, config.coupling * base));
        std::vector<double> row(n, 0.0);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) total += pull[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && total > 0.0) row[j] = pull[j] / total;
        }
        m.fraction.push_back(std::move(row));
    }
    return m;
}

EpidemicRun simulate_epidemic(const CityConfig& config, EpidemicRun* counterfactual) {
    config.validate();
    const auto reductions = counterfactual_reductions(config);
    if (!config.plant) {
        auto run = run_seir(config, reductions, nullptr);
        if (counterfactual) *counterfactual = run;
        return run;
    }
    const EpidemicRun cf = run_seir(config, reductions, nullptr);
    Overrides ov;
    ov.counterfactual = &cf;
    ov.day = config.plant->day;
    ov.cohort.assign(config.communes.size(), false);
    ov.extra.assign(config.communes.size(), 0);
    const auto ids = config.commune_ids();
    for (const auto& u : config.plant->cohort) {
        const auto c = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), u) - ids.begin());
        ov.cohort[c] = true;
        const double persons = config.plant->delta * static_cast<double>(config.communes[c].commune.population) /
                               (1e5 * config.observation.reporting_rate);
        ov.extra[c] = to_micro(persons);
    }
    auto run = run_seir(config, reductions, &ov);
    if (counterfactual) *counterfactual = cf;
    return run;
}

City generate(const CityConfig& config, const GenerateOptions& options) {
    config.validate();
    City city;
    for (const auto& c : config.communes) city.communes.push_back(c.commune);
    city.dates = config.dates;
    city.schedule = config.schedule;
    const auto n = config.communes.size();
    const int days = config.dates.size();
    const auto reductions = reduction_matrix(config, config.schedule);
    const auto commute = commute_model(config);

    auto& truth = city.truth;
    for (const auto& c : config.communes) truth.labels[c.commune.id] = static_cast<int>(c.band) + 1;
    const CrossSectionTruth cs;
    truth.coefficient_names = {"(Intercept)", "MobIn", "MobOut", "Flow", "Score", "MobOut:Flow"};
    truth.coefficients = cs.beta;
    truth.noise_sd = cs.sigma;
    truth.plant = config.plant;

    if (options.epidemic) {
        EpidemicRun cf;
        truth.run = simulate_epidemic(config, &cf);
        truth.expected_incidence = incidence(config, truth.run);
        if (config.plant) {
            truth.counterfactual_incidence = incidence(config, cf);
            truth.counterfactual = std::move(cf);
        }
        // Reported cases with a random share of each day's cases reported the next day.
        const double rho = config.observation.reporting_rate;
        for (std::size_t c = 0; c < n; ++c) {
            auto rng = make_rng(config.seed, report_stream, c);
            std::uniform_real_distribution<double> delay(0.0, 1.0);
            double carried = 0.0, cumulative = 0.0;
            for (int t = 0; t < days; ++t) {
                const double f = config.observation.delay_noise * delay(rng);
                const double reported =
                    rho * static_cast<double>(truth.run.new_infections[c][static_cast<std::size_t>(t)]) /
                    static_cast<double>(kMicro);
                cumulative += (1.0 - f) * reported + carried;
                carried = f * reported;
                city.cases.push_back({config.dates.date_at(t), config.communes[c].commune.id,
                                      static_cast<long>(std::floor(cumulative + 1e-9))});
            }
        }
        std::stable_sort(city.cases.begin(), city.cases.end(), [](const auto& a, const auto& b) {
            return a.date < b.date;
        });
    }

    if (options.hex) {
        for (std::size_t c = 0; c < n; ++c) {
            auto rng = make_rng(config.seed, hex_stream, c);
            std::normal_distribution<double> normal(0.0, 1.0);
            const auto band = static_cast<std::size_t>(config.communes[c].band);
            const int hexes = config.hexes_per_band[band];
            std::vector<double> size(static_cast<std::size_t>(hexes));
            for (auto& s : size) s = std::exp(config.observation.hex_spread * normal(rng));
            for (int t = 0; t < days; ++t) {
                const Date d = config.dates.date_at(t);
                const double activity =
                    config.band_levels[band] * (1.0 - 0.5 * reductions[c][static_cast<std::size_t>(t)]) * weekly_factor(d);
                for (int h = 0; h < hexes; ++h) {
                    const double noise = std::exp(config.observation.hex_noise * normal(rng));
                    city.hex.push_back({d, hex_id(c, h), config.communes[c].commune.id,
                                        std::lround(activity * size[static_cast<std::size_t>(h)] * noise)});
                }
            }
        }
        std::stable_sort(city.hex.begin(), city.hex.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    }

    if (options.od) {
        static const int morning[] = {360, 390, 420, 450};
        static const double weight[] = {0.2, 0.3, 0.3, 0.2};
        std::vector<std::vector<std::size_t>> top(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return commute.fraction[i][a] > commute.fraction[i][b];
            });
            for (std::size_t k = 0; k < order.size() && static_cast<int>(top[i].size()) < config.od_destinations; ++k) {
                if (order[k] != i) top[i].push_back(order[k]);
            }
        }
        auto rng = make_rng(config.seed, od_stream);
        for (int t = 0; t < days; ++t) {
            const Date d = config.dates.date_at(t);
            for (int s = 0; s < 8; ++s) {
                const bool evening = s >= 4;
                ODMatrix m;
                m.date = d;
                m.slot = TimeSlot{evening ? morning[s - 4] + 12 * 60 : morning[s]};
                for (std::size_t i = 0; i < n; ++i) {
                    const double commuters = static_cast<double>(config.communes[i].commune.population) *
                                             commute.share[i] * (1.0 - reductions[i][static_cast<std::size_t>(t)]) *
                                             weekly_factor(d);
                    for (auto j : top[i]) {
                        const double mean = commuters * config.od_trip_rate * commute.fraction[i][j] * weight[s % 4];
                        if (mean <= 0.0) continue;
                        std::poisson_distribution<long> draw(mean);
                        const long trips = draw(rng);
                        if (trips <= 0) continue;
                        const auto& a = config.communes[i].commune.id;
                        const auto& b = config.communes[j].commune.id;
                        m.trips[evening ? std::pair(b, a) : std::pair(a, b)] += trips;
                    }
                }
                if (!m.trips.empty()) city.od.push_back(std::move(m));
            }
        }
    }

    if (options.transitions) {
        for (std::size_t c = 0; c < n; ++c) {
            const auto& id = config.communes[c].commune.id;
            for (int k = 0; k < 3; ++k) {
                city.transitions.antennas[antenna_id(id, k)] =
                    Antenna{id, -33.45 + 0.01 * static_cast<double>(c % 8) + 0.002 * k,
                            -70.65 + 0.01 * static_cast<double>(c / 8) + 0.002 * k};
            }
        }
        auto rng = make_rng(config.seed, transition_stream);
        std::vector<std::discrete_distribution<std::size_t>> destination;
        for (std::size_t c = 0; c < n; ++c) {
            destination.emplace_back(commute.fraction[c].begin(), commute.fraction[c].end());
        }
        for (int t = 0; t < days; ++t) {
            const Date d = config.dates.date_at(t);
            const std::int64_t base = epoch_seconds(d);
            for (std::size_t c = 0; c < n; ++c) {
                const auto& cm = config.communes[c].commune;
                const double rate = config.transitions_per_day * mobility_level(cm) *
                                    (1.0 - reductions[c][static_cast<std::size_t>(t)]) * weekly_factor(d);
                std::poisson_distribution<int> inside(0.65 * rate), outside(0.35 * rate);
                const int n_in = inside(rng);
                const int n_out = outside(rng);
                if (n_in > 0) {
                    const auto device = fmt::format("{}{:03d}i", cm.id, t);
                    const std::int64_t step = 14 * 3600 / (n_in + 1);
                    for (int k = 0; k <= n_in; ++k) {
                        city.transitions.events.push_back({device, base + 7 * 3600 + k * step, antenna_id(cm.id, k % 3)});
                    }
                }
                if (n_out > 0 && n > 1) {
                    const std::int64_t step = 12 * 3600 / n_out;
                    for (int k = 0; k < n_out; ++k) {
                        const auto j = destination[c](rng);
                        const auto device = fmt::format("{}{:03d}o{:03d}", cm.id, t, k);
                        const std::int64_t at = base + 7 * 3600 + k * step;
                        city.transitions.events.push_back({device, at, antenna_id(cm.id, k % 3)});
                        city.transitions.events.push_back(
                            {device, at + 1200, antenna_id(config.communes[j].commune.id, k % 3)});
                    }
                }
            }
        }
    }
    return city;
}

namespace {

nlohmann::json run_json(const CityConfig& config, const EpidemicRun& run,
                        const std::vector<std::vector<double>>& incidence_rows) {
    nlohmann::json out = nlohmann::json::object();
    auto persons = [](const std::vector<std::int64_t>& v) {
        std::vector<double> o;
        o.reserve(v.size());
        for (auto x : v) o.push_back(static_cast<double>(x) / static_cast<double>(kMicro));
        return o;
    };
    for (std::size_t c = 0; c < config.communes.size(); ++c) {
        nlohmann::json j;
        j["S"] = persons(run.s[c]);
        j["E"] = persons(run.e[c]);
        j["I"] = persons(run.i[c]);
        j["R"] = persons(run.r[c]);
        j["new_infections"] = persons(run.new_infections[c]);
        j["expected_incidence_per_100k"] = incidence_rows[c];
        out[config.communes[c].commune.id] = std::move(j);
    }
    return out;
}

std::string join_ids(const std::vector<std::string>& ids) {
    return fmt::format("{}", fmt::join(ids, ","));
}

}  // namespace

void write_city(const std::filesystem::path& dir, const City& city, const CityConfig& config) {
    std::filesystem::create_directories(dir);
    ingest::write_hex_scores(dir / "hex_scores.csv", city.hex);
    ingest::write_od(dir / "od.csv", city.od);
    ingest::write_antennas(dir / "antennas.csv", city.transitions.antennas);
    ingest::write_transitions(dir / "transitions.csv", city.transitions);
    ingest::write_cases(dir / "cases.csv", city.cases);
    ingest::write_socio(dir / "socio.csv", city.communes);
    ingest::write_schedule(dir / "schedule.csv", city.schedule);

    const auto& truth = city.truth;
    nlohmann::json gt;
    gt["seed"] = config.seed;
    gt["start_date"] = format_date(city.dates.start());
    gt["n_days"] = city.dates.size();
    gt["labels"] = truth.labels;
    gt["label_names"] = {"rural_low", "low", "mid", "high"};
    gt["coefficients"] = {{"names", truth.coefficient_names}, {"values", truth.coefficients}, {"noise_sd", truth.noise_sd}};
    gt["epidemic"] = {{"beta", config.epidemic.beta},
                      {"sigma", config.epidemic.sigma},
                      {"gamma", config.epidemic.gamma},
                      {"vulnerability", config.epidemic.vulnerability},
                      {"reporting_rate", config.observation.reporting_rate},
                      {"delay_noise", config.observation.delay_noise}};
    if (truth.plant) {
        gt["lifting_effect"] = {{"cohort", truth.plant->cohort},
                                {"date", format_date(city.dates.date_at(truth.plant->day))},
                                {"day", truth.plant->day},
                                {"delta", truth.plant->delta}};
    } else {
        gt["lifting_effect"] = nullptr;
    }
    if (!truth.run.s.empty()) {
        gt["latent"] = run_json(config, truth.run, truth.expected_incidence);
        if (truth.counterfactual) {
            gt["counterfactual"] = run_json(config, *truth.counterfactual, truth.counterfactual_incidence);
        }
    }
    {
        auto out = fmt::output_file((dir / "ground_truth.json").string());
        out.print("{}\n", gt.dump(1));
    }

    const auto last = format_date(city.dates.date_at(city.dates.size() - 1));
    auto ini = fmt::output_file((dir / "mobiscope.ini").string());
    ini.print("[input]\nhex_scores = hex_scores.csv\nod = od.csv\ntransitions = transitions.csv\n"
              "antennas = antennas.csv\ncases = cases.csv\nsocio = socio.csv\nschedule = schedule.csv\n\n");
    ini.print("[study]\nstart = {}\ndays = {}\n\n", format_date(city.dates.start()), city.dates.size());
    ini.print("[mobility]\nrisk_k = {}\nrisk_cutoff = 2020-03-30\nflow_slots = 06:00-08:00\n\n", config.risk_set_size);
    ini.print("[cluster]\nk_min = 2\nk_max = 6\nk_report = 4\n\n");
    ini.print("[regress]\nfrom = {}\nto = 2020-03-30\n\n", format_date(city.dates.start()));
    ini.print("[corr]\nearly_from = 2020-03-26\nearly_to = 2020-04-30\nlate_from = 2020-09-28\nlate_to = {}\n\n", last);
    if (truth.plant) {
        std::vector<std::string> donors;
        const std::set<std::string> cohort(truth.plant->cohort.begin(), truth.plant->cohort.end());
        const int post = 21;
        for (const auto& c : city.communes) {
            if (cohort.contains(c.id)) continue;
            const auto tau = treatment_day(city.schedule, city.dates, c.id, InterventionKind::phase2_transition);
            if (tau && *tau >= truth.plant->day + post) donors.push_back(c.id);
        }
        ini.print("[scm]\ncohort = {}\ndonors = {}\npre = 42\npost = {}\n\n", join_ids(truth.plant->cohort),
                  join_ids(donors), post);
    }
    ini.print("[output]\ndir = out\n");
}

inference::DesignMatrix cross_section(const CityConfig& config, const CrossSectionTruth& truth,
                                      std::uint64_t replication) {
    config.validate();
    if (truth.beta.size() != 6) throw ArgumentError("cross_section: expected 6 coefficients");
    const auto n = config.communes.size();
    const auto commute = commute_model(config);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return config.communes[a].commune.income_index > config.communes[b].commune.income_index;
    });
    std::set<std::size_t> risk(order.begin(), order.begin() + std::min<std::size_t>(n, static_cast<std::size_t>(config.risk_set_size)));

    auto jitter_rng = make_rng(config.seed, jitter_stream);
    std::normal_distribution<double> jitter(0.0, 1.0);
    Eigen::MatrixXd slopes(static_cast<Eigen::Index>(n), 5);
    std::vector<std::string> units;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& cc = config.communes[i];
        const double level = mobility_level(cc.commune);
        const double mob_in = 6.0 * level * std::exp(0.1 * jitter(jitter_rng));
        const double mob_out = 15.0 * commute.share[i] * std::exp(0.1 * jitter(jitter_rng));
        double flow = 0.0;
        if (!risk.contains(i)) {
            for (auto j : risk) flow += commute.fraction[i][j];
            flow *= 10.0 * commute.share[i] * std::exp(0.1 * jitter(jitter_rng));
        }
        const double score = std::clamp(band_center(cc.band) + 4.0 * jitter(jitter_rng), 0.0, 100.0);
        const auto r = static_cast<Eigen::Index>(i);
        slopes(r, 0) = mob_in;
        slopes(r, 1) = mob_out;
        slopes(r, 2) = flow;
        slopes(r, 3) = score;
        slopes(r, 4) = mob_out * flow;
        units.push_back(cc.commune.id);
    }
    auto rng = make_rng(config.seed, section_stream, replication);
    std::normal_distribution<double> noise(0.0, truth.sigma);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double v = truth.beta[0];
        for (int k = 0; k < 5; ++k) v += truth.beta[static_cast<std::size_t>(k + 1)] * slopes(i, k);
        y(i) = v + noise(rng);
    }
    return inference::make_design(std::move(units), {"MobIn", "MobOut", "Flow", "Score", "MobOut:Flow"}, slopes,
                                  std::move(y), "CumCases");
}

}  // namespace mobiscope::simgen
