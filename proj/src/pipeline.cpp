#include "mobiscope/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>
#include <fmt/format.h>
#include <fmt/os.h>
#include <fmt/ranges.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "mobiscope/inference.hpp"
#include "mobiscope/ingest.hpp"
#include "mobiscope/logging.hpp"
#include "mobiscope/mobility.hpp"
#include "mobiscope/simgen.hpp"
#include "mobiscope/synthctl.hpp"

namespace mobiscope::cli {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : text) {
        if (ch == ',') {
            if (auto t = trim(item); !t.empty()) out.push_back(t);
            item.clear();
        } else {
            item += ch;
        }
    }
    if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
}

class IniReader {
public:
    explicit IniReader(const fs::path& file) : file_(file) {
        try {
            pt::read_ini(file.string(), tree_);
        } catch (const pt::ini_parser_error& e) {
            throw ConfigError(fmt::format("{}: {}", file.string(), e.message()));
        }
        for (const auto& [section, keys] : tree_) {
            for (const auto& [key, value] : keys) echo_[section + "." + key] = trim(value.data());
        }
    }

    std::optional<std::string> get(const std::string& section, const std::string& key) const {
        const auto it = echo_.find(section + "." + key);
        if (it == echo_.end()) return std::nullopt;
        return it->second;
    }

    std::string require(const std::string& section, const std::string& key) const {
        auto v = get(section, key);
        if (!v || v->empty()) throw ConfigError(fmt::format("missing config key [{}] {}", section, key));
        return *v;
    }

    template <class T, class Parse>
    void read(const std::string& section, const std::string& key, T& target, Parse parse) const {
        const auto v = get(section, key);
        if (!v) return;
        try {
            target = parse(*v);
        } catch (const std::exception& e) {
            throw ConfigError(fmt::format("config key [{}] {} = '{}': {}", section, key, *v, e.what()));
        }
    }

    fs::path path(const std::string& raw) const {
        fs::path p(raw);
        return p.is_absolute() ? p : file_.parent_path() / p;
    }

    const std::map<std::string, std::string>& echo() const { return echo_; }

private:
    fs::path file_;
    pt::ptree tree_;
    std::map<std::string, std::string> echo_;
};

int to_int(const std::string& s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw ArgumentError("not an integer");
    return v;
}

double to_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ArgumentError("not a number");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
    if (s == "false" || s == "no" || s == "0" || s == "off") return false;
    throw ArgumentError("expected true or false");
}

Date to_date(const std::string& s) { return parse_date(s); }

std::string hex_digest(const unsigned char* data, unsigned len) {
    std::string out;
    for (unsigned i = 0; i < len; ++i) out += fmt::format("{:02x}", data[i]);
    return out;
}

}  // namespace

std::pair<int, int> parse_k_range(std::string_view text) {
    const auto dots = text.find("..");
    try {
        if (dots == std::string_view::npos) {
            const int k = to_int(std::string(text));
            return {k, k};
        }
        return {to_int(std::string(text.substr(0, dots))), to_int(std::string(text.substr(dots + 2)))};
    } catch (const ArgumentError&) {
        throw ConfigError(fmt::format("k range '{}' is not of the form a..b", text));
    }
}

PipelineConfig load_config(const fs::path& file) {
    if (!fs::exists(file)) throw ConfigError(fmt::format("config file {} not found", file.string()));
    const IniReader ini(file);
    PipelineConfig c;
    c.source = file;
    c.echo = ini.echo();

    auto path_of = [&](const std::string& key) { return ini.path(ini.require("input", key)); };
    c.input.hex_scores = path_of("hex_scores");
    c.input.od = path_of("od");
    c.input.transitions = path_of("transitions");
    c.input.antennas = path_of("antennas");
    c.input.cases = path_of("cases");
    c.input.socio = path_of("socio");
    if (auto s = ini.get("input", "schedule"); s && !s->empty()) c.input.schedule = ini.path(*s);

    ini.read("study", "start", c.start, [](const std::string& s) { return std::optional<Date>(to_date(s)); });
    ini.read("study", "days", c.days, [](const std::string& s) {
        const int d = to_int(s);
        if (d < 1) throw ArgumentError("must be positive");
        return std::optional<int>(d);
    });

    ini.read("mobility", "normalizer", c.normalizer, to_double);
    ini.read("mobility", "risk_k", c.risk_k, to_int);
    ini.read("mobility", "risk_cutoff", c.risk_cutoff, to_date);
    ini.read("mobility", "flow_slots", c.flow_slots, [](const std::string& s) { return SlotFilter::parse(s); });
    ini.read("mobility", "graph_from", c.graph_from, [](const std::string& s) { return std::optional<Date>(to_date(s)); });
    ini.read("mobility", "graph_to", c.graph_to, [](const std::string& s) { return std::optional<Date>(to_date(s)); });
    ini.read("mobility", "graph_slots", c.graph_slots, [](const std::string& s) { return SlotFilter::parse(s); });

    ini.read("dtw", "step_pattern", c.dtw.step_pattern, [](const std::string& s) { return tsclust::parse_step_pattern(s); });
    ini.read("dtw", "window", c.dtw.window, [](const std::string& s) {
        if (s == "none") return std::optional<int>();
        return std::optional<int>(to_int(s));
    });
    ini.read("dtw", "normalize", c.dtw.normalize, to_bool);
    ini.read("dtw", "znormalize", c.dtw.znormalize, to_bool);

    ini.read("cluster", "k_min", c.k_min, to_int);
    ini.read("cluster", "k_max", c.k_max, to_int);
    ini.read("cluster", "k_report", c.k_report, to_int);

    ini.read("regress", "from", c.regress_from, to_date);
    ini.read("regress", "to", c.regress_to, to_date);
    ini.read("regress", "per_100k", c.per_100k, to_bool);
    ini.read("regress", "name_width", c.name_width, to_int);

    ini.read("corr", "variable", c.corr_variable, [](const std::string& s) { return parse_variable(s); });
    ini.read("corr", "early_from", c.early_from, to_date);
    ini.read("corr", "early_to", c.early_to, to_date);
    ini.read("corr", "late_from", c.late_from, to_date);
    ini.read("corr", "late_to", c.late_to, to_date);

    ini.read("scm", "outcome", c.scm_outcome, [](const std::string& s) {
        if (s != "new_cases" && s != "mobility_index") throw ArgumentError("expected new_cases or mobility_index");
        return s;
    });
    ini.read("scm", "cohort", c.cohort, split_list);
    ini.read("scm", "donors", c.donors, split_list);
    ini.read("scm", "pre", c.pre, to_int);
    ini.read("scm", "post", c.post, to_int);
    ini.read("scm", "donor_lag", c.donor_lag, [](const std::string& s) { return std::optional<int>(to_int(s)); });
    ini.read("scm", "lambda", c.lambda, [](const std::string& s) {
        if (s == "auto") return std::optional<double>();
        const double v = to_double(s);
        if (v < 0.0) throw ArgumentError("must be non-negative");
        return std::optional<double>(v);
    });
    ini.read("scm", "same_cluster", c.same_cluster, to_bool);
    ini.read("scm", "placebo", c.placebo, to_bool);
    ini.read("scm", "demean", c.demean, to_bool);

    auto& sg = c.simgen;
    auto opt_double = [](const std::string& s) { return std::optional<double>(to_double(s)); };
    ini.read("simgen", "seed", c.seed, [](const std::string& s) { return std::stoull(s); });
    ini.read("simgen", "delta", sg.delta, [](const std::string& s) {
        if (s == "none") return std::optional<double>();
        return std::optional<double>(to_double(s));
    });
    ini.read("simgen", "plant_date", sg.plant_date, to_date);
    ini.read("simgen", "cohort", sg.cohort, split_list);
    ini.read("simgen", "beta", sg.beta, opt_double);
    ini.read("simgen", "coupling", sg.coupling, opt_double);
    ini.read("simgen", "reporting_rate", sg.reporting_rate, opt_double);
    ini.read("simgen", "delay_noise", sg.delay_noise, opt_double);
    ini.read("simgen", "hex_noise", sg.hex_noise, opt_double);

    ini.read("output", "dir", c.out_dir, [&](const std::string& s) { return ini.path(s); });
    ini.read("output", "threads", c.threads, [](const std::string& s) {
        const int t = to_int(s);
        if (t < 0) throw ArgumentError("must be non-negative");
        return static_cast<unsigned>(t);
    });

    if (c.k_min < 2 || c.k_max < c.k_min) {
        throw ConfigError(fmt::format("cluster k range {}..{} must satisfy 2 <= k_min <= k_max", c.k_min, c.k_max));
    }
    if (c.pre < 2 || c.post < 1) throw ConfigError("scm pre must be >= 2 and post >= 1");
    return c;
}

void apply_overrides(PipelineConfig& config, const Overrides& o) {
    if (o.out) config.out_dir = *o.out;
    if (o.threads) config.threads = *o.threads;
    if (o.seed) config.seed = *o.seed;
    if (o.k_range) {
        config.k_min = o.k_range->first;
        config.k_max = o.k_range->second;
        if (config.k_min < 2 || config.k_max < config.k_min) {
            throw ConfigError(fmt::format("k range {}..{} must satisfy 2 <= min <= max", config.k_min, config.k_max));
        }
        config.k_report = std::clamp(config.k_report, config.k_min, config.k_max);
    }
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LookupError(fmt::format("cannot open {}", path.string()));
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    return hex_digest(md, len);
}

int exit_code_for(const std::exception& e) {
    if (const auto* f = dynamic_cast<const StageFailure*>(&e)) return f->exit_code();
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SchemaError*>(&e)) return 2;
    return 1;
}

struct Workspace::Impl {
    PipelineConfig config;
    Warnings warnings;
    std::vector<fs::path> inputs;

    std::optional<std::vector<Commune>> communes;
    std::optional<InterventionSchedule> schedule;
    std::optional<std::vector<ingest::CaseRecord>> case_records;
    std::optional<DateIndex> dates;
    std::optional<std::vector<ingest::HexRecord>> hex;
    std::optional<TransitionLog> transitions;
    std::optional<std::vector<ODMatrix>> od;
    std::optional<mobility::MobilityPanels> panels;
    std::unique_ptr<StudyRegion> region;

    void note_input(const fs::path& p) {
        if (std::find(inputs.begin(), inputs.end(), p) == inputs.end()) inputs.push_back(p);
    }

    const std::vector<Commune>& get_communes() {
        if (!communes) {
            note_input(config.input.socio);
            communes = ingest::read_socio(config.input.socio);
        }
        return *communes;
    }

    std::set<std::string> known_ids() {
        std::set<std::string> ids;
        for (const auto& c : get_communes()) ids.insert(c.id);
        return ids;
    }

    const InterventionSchedule& get_schedule() {
        if (!schedule) {
            if (config.input.schedule.empty()) {
                schedule = InterventionSchedule{};
            } else {
                note_input(config.input.schedule);
                schedule = ingest::read_schedule(config.input.schedule);
                const auto ids = known_ids();
                for (const auto& e : schedule->entries()) {
                    if (!ids.contains(e.commune)) {
                        throw SchemaError(config.input.schedule.string(), 0,
                                          fmt::format("unknown commune {}", e.commune));
                    }
                }
            }
        }
        return *schedule;
    }

    const std::vector<ingest::CaseRecord>& get_case_records() {
        if (!case_records) {
            note_input(config.input.cases);
            case_records = ingest::read_case_records(config.input.cases);
        }
        return *case_records;
    }

    const DateIndex& get_dates() {
        if (!dates) {
            if (config.start && config.days) {
                dates = DateIndex(*config.start, *config.days);
            } else {
                const auto& rec = get_case_records();
                if (rec.empty()) throw ConfigError("[study] start/days missing and the cases file is empty");
                auto [lo, hi] = std::minmax_element(rec.begin(), rec.end(),
                                                    [](const auto& a, const auto& b) { return a.date < b.date; });
                const Date start = config.start.value_or(lo->date);
                dates = DateIndex(start, config.days.value_or(days_between(start, hi->date) + 1));
            }
        }
        return *dates;
    }

    const std::vector<ingest::HexRecord>& get_hex() {
        if (!hex) {
            note_input(config.input.hex_scores);
            hex = ingest::read_hex_scores(config.input.hex_scores);
        }
        return *hex;
    }

    const TransitionLog& get_transitions() {
        if (!transitions) {
            note_input(config.input.transitions);
            note_input(config.input.antennas);
            transitions = ingest::read_transitions(config.input.transitions, config.input.antennas);
        }
        return *transitions;
    }

    const std::vector<ODMatrix>& get_od() {
        if (!od) {
            note_input(config.input.od);
            od = ingest::read_od(config.input.od, known_ids());
        }
        return *od;
    }

    const mobility::MobilityPanels& get_panels() {
        if (!panels) {
            const auto ids = get_region_ids();
            panels = mobility::mobility_indices(get_transitions(), get_dates(), ids, config.normalizer);
        }
        return *panels;
    }

    std::vector<std::string> get_region_ids() {
        std::vector<std::string> ids;
        for (const auto& c : get_communes()) ids.push_back(c.id);
        return ids;
    }

    StudyRegion& get_region() {
        if (region) return *region;
        const auto& index = get_dates();
        auto r = std::make_unique<StudyRegion>(get_communes(), index, get_schedule());
        for (auto& [unit, series] : ingest::cases_to_panels(get_case_records(), index, warnings,
                                                            config.input.cases.filename().string())) {
            if (!r->has_commune(unit)) {
                warnings.add(fmt::format("cases: commune {} is not in the socio table; ignored", unit));
                continue;
            }
            r->add_panel(std::move(series));
        }
        const auto grid = mobility::score_hexagons(get_hex(), index, warnings);
        for (const auto& c : r->communes()) {
            auto s = mobility::commune_score(grid, c.id);
            if (s.count_present() == 0) {
                warnings.add(fmt::format("hex_scores: commune {} has no hexagon", c.id));
                continue;
            }
            r->add_panel(std::move(s));
        }
        const auto& p = get_panels();
        for (const auto& [unit, s] : p.mob_in) r->add_panel(s);
        for (const auto& [unit, s] : p.mob_out) r->add_panel(s);
        for (const auto& [unit, s] : p.mobility_index) r->add_panel(s);
        region = std::move(r);
        return *region;
    }
};

Workspace::Workspace(PipelineConfig config) : impl_(std::make_unique<Impl>()) { impl_->config = std::move(config); }
Workspace::~Workspace() = default;
Workspace::Workspace(Workspace&&) noexcept = default;
const PipelineConfig& Workspace::config() const noexcept { return impl_->config; }

namespace {

nlohmann::json versions() {
    return {{"mobiscope", MOBISCOPE_VERSION},
            {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"fmt", FMT_VERSION}};
}

void write_manifest(StageResult& result, const PipelineConfig& config, const std::vector<fs::path>& inputs) {
    nlohmann::json m;
    m["subcommand"] = result.stage;
    m["versions"] = versions();
    m["seed"] = config.seed;
    m["config_file"] = config.source.empty() ? "" : config.source.filename().string();
    m["config"] = config.echo;
    nlohmann::json in = nlohmann::json::array();
    for (const auto& p : inputs) {
        in.push_back({{"path", p.filename().string()}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
    }
    m["inputs"] = in;
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : result.outputs) {
        out.push_back({{"path", p.filename().string()}, {"sha256", sha256_file(p)}});
    }
    m["outputs"] = out;
    m["warnings"] = result.warnings.items();
    result.manifest = config.out_dir / fmt::format("manifest-{}.json", result.stage);
    auto f = fmt::output_file(result.manifest.string());
    f.print("{}\n", m.dump(2));
    for (const auto& w : result.warnings.items()) log::warn(fmt::format("{}: {}", result.stage, w));
    log::info(fmt::format("{}: wrote {} files", result.stage, result.outputs.size()));
}

std::vector<fs::path> stage_inputs(Workspace& ws) {
    auto inputs = ws.impl().inputs;
    if (!ws.config().source.empty()) inputs.insert(inputs.begin(), ws.config().source);
    return inputs;
}

StageResult begin(Workspace& ws, std::string stage) {
    fs::create_directories(ws.config().out_dir);
    ws.impl().warnings = Warnings{};
    StageResult r;
    r.stage = std::move(stage);
    return r;
}

void finish(Workspace& ws, StageResult& r) {
    r.warnings.append(ws.impl().warnings);
    write_manifest(r, ws.config(), stage_inputs(ws));
}

fs::path out_file(const PipelineConfig& c, std::string_view name) { return c.out_dir / name; }

DayWindow window_of(const DateIndex& dates, Date from, Date to, std::string_view what) {
    const auto w = dates.window(from, to);
    if (w.empty()) {
        throw ConfigError(fmt::format("{} window {}..{} does not overlap the study period", what, format_date(from),
                                      format_date(to)));
    }
    return w;
}

std::map<std::string, long> populations(const StudyRegion& region) {
    std::map<std::string, long> out;
    for (const auto& c : region.communes()) out[c.id] = c.population;
    return out;
}

}  // namespace

StageResult run_validate(Workspace& ws) {
    auto r = begin(ws, "validate");
    auto& impl = ws.impl();
    auto& region = impl.get_region();
    impl.get_od();
    const auto ids = impl.known_ids();
    for (const auto& [id, a] : impl.get_transitions().antennas) {
        if (!ids.contains(a.commune)) {
            throw SchemaError(impl.config.input.antennas.string(), 0,
                              fmt::format("antenna {} maps to unknown commune {}", id, a.commune));
        }
    }
    for (const auto& c : region.communes()) {
        if (!region.has_panel(c.id, Variable::cum_cases)) r.warnings.add(fmt::format("commune {} has no case rows", c.id));
    }
    finish(ws, r);
    return r;
}

StageResult run_mobility(Workspace& ws) {
    auto r = begin(ws, "mobility");
    auto& impl = ws.impl();
    const auto& c = ws.config();
    auto& region = impl.get_region();
    const auto& dates = region.dates();

    const auto panel_path = out_file(c, "mobility_panel.csv");
    {
        auto f = fmt::output_file(panel_path.string());
        f.print("date,commune_id,score,mob_in,mob_out,mobility_index\n");
        auto cell = [&](const std::string& id, Variable v, int day) -> std::string {
            if (!region.has_panel(id, v)) return "NA";
            const auto& s = region.panel(id, v);
            return s.has_value(static_cast<std::size_t>(day)) ? fmt::format("{}", s.value(static_cast<std::size_t>(day)))
                                                              : "NA";
        };
        for (int day = 0; day < dates.size(); ++day) {
            const auto d = format_date(dates.date_at(day));
            for (const auto& cm : region.communes()) {
                f.print("{},{},{},{},{},{}\n", d, cm.id, cell(cm.id, Variable::score, day),
                        cell(cm.id, Variable::mob_in, day), cell(cm.id, Variable::mob_out, day),
                        cell(cm.id, Variable::mobility_index, day));
            }
        }
    }
    r.outputs.push_back(panel_path);

    const auto cutoff = dates.offset_of(c.risk_cutoff);
    if (!dates.contains(cutoff)) throw ConfigError("[mobility] risk_cutoff lies outside the study period");
    const auto risk = mobility::risk_set(mobility::case_rates_at(region, cutoff), c.risk_k);
    const auto window = window_of(dates, c.regress_from, c.regress_to, "[regress]");
    const auto flow = mobility::flow_vector(impl.get_od(), risk, dates, window, populations(region), c.flow_slots);
    const auto flow_path = out_file(c, "flow.csv");
    {
        auto f = fmt::output_file(flow_path.string());
        f.print("commune_id,flow,risk_set\n");
        for (const auto& [id, v] : flow.flow) f.print("{},{},{}\n", id, v, risk.contains(id) ? 1 : 0);
    }
    r.outputs.push_back(flow_path);

    const auto graph_window = window_of(dates, c.graph_from.value_or(dates.start()),
                                        c.graph_to.value_or(dates.date_at(dates.size() - 1)), "[mobility] graph");
    const auto graph = mobility::od_graph(impl.get_od(), dates, graph_window, c.graph_slots);
    mobility::write_od_graph(c.out_dir, graph);
    r.outputs.push_back(c.out_dir / "nodes.csv");
    r.outputs.push_back(c.out_dir / "edges.csv");
    finish(ws, r);
    return r;
}

namespace {

struct Clustering {
    tsclust::DistanceMatrix dm;
    tsclust::Dendrogram dendrogram;
    std::vector<double> mean_score;
};

Clustering cluster_scores(Workspace& ws, Warnings& warnings) {
    const auto& c = ws.config();
    auto& region = ws.impl().get_region();
    std::vector<tsclust::LabeledSeries> series;
    Clustering out;
    for (const auto& cm : region.communes()) {
        if (!region.has_panel(cm.id, Variable::score)) {
            warnings.add(fmt::format("commune {} has no score series; left out of clustering", cm.id));
            continue;
        }
        auto values = tsclust::fill_missing(region.panel(cm.id, Variable::score));
        out.mean_score.push_back(std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size()));
        series.push_back({cm.id, std::move(values)});
    }
    const int n = static_cast<int>(series.size());
    if (c.k_max > n) throw ConfigError(fmt::format("cluster k_max {} exceeds the {} clustered communes", c.k_max, n));
    out.dm = tsclust::distance_matrix(series, c.dtw, c.threads);
    out.dendrogram = tsclust::hcluster(out.dm);
    return out;
}

}  // namespace

StageResult run_cluster(Workspace& ws) {
    auto r = begin(ws, "cluster");
    const auto& c = ws.config();
    const auto cl = cluster_scores(ws, r.warnings);
    std::vector<std::pair<int, tsclust::ValidityIndices>> rows;
    std::optional<tsclust::ClusterSolution> report;
    for (int k = c.k_min; k <= c.k_max; ++k) {
        const auto sol = tsclust::order_clusters(tsclust::cut(cl.dendrogram, cl.dm, k), cl.mean_score);
        rows.emplace_back(k, tsclust::validity_indices(cl.dm, sol));
        if (k == c.k_report) report = sol;
    }
    if (!report) {
        report = tsclust::order_clusters(tsclust::cut(cl.dendrogram, cl.dm, c.k_report), cl.mean_score);
    }
    tsclust::write_dendrogram(out_file(c, "dendrogram.csv"), cl.dendrogram);
    tsclust::write_clusters(out_file(c, "clusters.csv"), *report);
    tsclust::write_cvi(out_file(c, "cvi.csv"), rows);
    const auto dist_path = out_file(c, "distance_matrix.csv");
    {
        auto f = fmt::output_file(dist_path.string());
        f.print("commune_id,{}\n", fmt::join(cl.dm.labels, ","));
        for (std::size_t i = 0; i < cl.dm.size(); ++i) {
            f.print("{}", cl.dm.labels[i]);
            for (std::size_t j = 0; j < cl.dm.size(); ++j) {
                f.print(",{}", cl.dm.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
            f.print("\n");
        }
    }
    const auto rep_path = out_file(c, "representatives.csv");
    {
        auto f = fmt::output_file(rep_path.string());
        f.print("label,representative,size\n");
        const auto members = report->members();
        for (int k = 0; k < report->k; ++k) {
            f.print("{},{},{}\n", k + 1, report->representatives[static_cast<std::size_t>(k)],
                    members[static_cast<std::size_t>(k)].size());
        }
    }
    r.outputs = {out_file(c, "dendrogram.csv"), out_file(c, "clusters.csv"), out_file(c, "cvi.csv"), dist_path,
                 rep_path};
    finish(ws, r);
    return r;
}

StageResult run_regress(Workspace& ws) {
    auto r = begin(ws, "regress");
    auto& impl = ws.impl();
    const auto& c = ws.config();
    auto& region = impl.get_region();
    const auto& dates = region.dates();
    const auto cutoff = dates.offset_of(c.risk_cutoff);
    if (!dates.contains(cutoff)) throw ConfigError("[mobility] risk_cutoff lies outside the study period");
    const auto risk = mobility::risk_set(mobility::case_rates_at(region, cutoff), c.risk_k);
    const auto window = window_of(dates, c.regress_from, c.regress_to, "[regress]");
    const auto flow = mobility::flow_vector(impl.get_od(), risk, dates, window, populations(region), c.flow_slots);
    const auto design = inference::build_design(region, flow, window, {c.per_100k});
    for (const auto& u : design.dropped) r.warnings.add(fmt::format("regress: commune {} dropped for missing data", u));
    auto fit = inference::ols_fit(design);
    fit.n_dropped = static_cast<int>(design.dropped.size());
    inference::write_fit_report(out_file(c, "fit_report.txt"), fit, {c.name_width});
    inference::write_fit_report_csv(out_file(c, "fit_report.csv"), fit);
    r.outputs = {out_file(c, "fit_report.txt"), out_file(c, "fit_report.csv")};
    finish(ws, r);
    return r;
}

StageResult run_corr(Workspace& ws) {
    auto r = begin(ws, "corr");
    const auto& c = ws.config();
    auto& region = ws.impl().get_region();
    const auto& dates = region.dates();
    const auto series = inference::cross_sectional_corr(region, c.corr_variable, Variable::cum_cases_per_100k, &r.warnings);
    inference::write_corr_evolution(out_file(c, "corr_evolution.csv"), series);
    inference::write_corr_matrix(out_file(c, "corr_matrix.csv"), inference::mobility_corr_matrix(region, c.corr_variable));

    const auto early = window_of(dates, c.early_from, c.early_to, "[corr] early");
    const auto late = window_of(dates, c.late_from, c.late_to, "[corr] late");
    auto na = [](std::optional<double> v) { return v ? fmt::format("{}", *v) : std::string("NA"); };
    auto snapshot = [&](DayWindow w) -> std::optional<double> {
        try {
            return inference::r_squared_snapshot(region, w.end - 1, c.corr_variable);
        } catch (const EstimationError& e) {
            r.warnings.add(e.what());
            return std::nullopt;
        }
    };
    const auto summary = out_file(c, "corr_summary.csv");
    {
        auto f = fmt::output_file(summary.string());
        f.print("metric,value\n");
        f.print("early_mean_r,{}\n", na(inference::mean_correlation(series, early)));
        f.print("late_mean_r,{}\n", na(inference::mean_correlation(series, late)));
        f.print("early_r_squared,{}\n", na(snapshot(early)));
        f.print("late_r_squared,{}\n", na(snapshot(late)));
    }
    r.outputs = {out_file(c, "corr_evolution.csv"), out_file(c, "corr_matrix.csv"), summary};
    finish(ws, r);
    return r;
}

namespace {

std::map<std::string, int> read_cluster_labels(const fs::path& path) {
    if (!fs::exists(path)) {
        throw ConfigError(fmt::format("[scm] same_cluster needs {} from the cluster stage", path.string()));
    }
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    std::map<std::string, int> out;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto f = ingest::split_csv_line(line);
        if (f.size() != 2) throw SchemaError(path.string(), n, "expected unit,label");
        out[f[0]] = to_int(f[1]);
    }
    return out;
}

}  // namespace

StageResult run_scm(Workspace& ws) {
    auto r = begin(ws, "scm");
    const auto& c = ws.config();
    auto& region = ws.impl().get_region();
    if (c.cohort.empty()) throw ConfigError("missing config key [scm] cohort");
    for (const auto& u : c.cohort) {
        if (!region.has_commune(u)) throw ConfigError(fmt::format("[scm] cohort commune {} is unknown", u));
    }
    for (const auto& u : c.donors) {
        if (!region.has_commune(u)) throw ConfigError(fmt::format("[scm] donor commune {} is unknown", u));
    }

    synthctl::StaggeredConfig sc;
    std::map<std::string, PanelSeries> outcomes;
    for (const auto& cm : region.communes()) {
        if (c.scm_outcome == "new_cases") {
            if (region.has_panel(cm.id, Variable::cum_cases)) {
                std::vector<int> breaks;
                if (auto tau = treatment_day(region, cm.id, sc.kind)) breaks.push_back(*tau);
                outcomes.emplace(cm.id, synthctl::smoothed_incidence(region.panel(cm.id, Variable::cum_cases),
                                                                     cm.population, breaks));
            }
        } else if (region.has_panel(cm.id, Variable::mobility_index)) {
            outcomes.emplace(cm.id, region.panel(cm.id, Variable::mobility_index));
        }
    }

    sc.pre = c.pre;
    sc.post = c.post;
    sc.donor_lag = c.donor_lag;
    sc.lambda.fixed = c.lambda;
    sc.demean = c.demean;
    sc.threads = c.threads;
    if (c.same_cluster) sc.same_cluster = read_cluster_labels(out_file(c, "clusters.csv"));

    const auto result = synthctl::staggered_ascm(outcomes, region, c.cohort, c.donors, sc, r.warnings);
    synthctl::write_gap(out_file(c, "gap.csv"), result);
    synthctl::write_weights(out_file(c, "weights.csv"), result);
    r.outputs = {out_file(c, "gap.csv"), out_file(c, "weights.csv")};

    const auto summary = out_file(c, "scm_summary.csv");
    {
        auto f = fmt::output_file(summary.string());
        f.print("treated,treatment_date,n_donors,lambda,att,scm_pre_rmse,ascm_pre_rmse\n");
        for (const auto& t : result.fits) {
            f.print("{},{},{},{},{},{},{}\n", t.unit, format_date(region.dates().date_at(t.treatment_day)),
                    t.fit.donors.size(), t.fit.lambda, t.fit.att, std::sqrt(t.fit.scm_pre_sse / c.pre),
                    std::sqrt(t.fit.ascm_pre_sse / c.pre));
        }
        f.print("ALL,,,,{},,\n", result.att);
    }
    r.outputs.push_back(summary);

    if (c.placebo) {
        // Pseudo effects averaged per donor over the treated units that used it.
        std::map<std::string, std::pair<double, int>> pooled;
        for (const auto& t : result.fits) {
            Warnings ignored;
            const auto problem = synthctl::event_time_problem(outcomes, region, t.unit, c.donors, sc, ignored);
            if (!problem || problem->donors.size() < 3) {
                r.warnings.add(fmt::format("placebo skipped for {}: fewer than 3 donors", t.unit));
                continue;
            }
            const auto p = synthctl::placebo_distribution(*problem, sc.lambda, {}, c.threads);
            for (std::size_t i = 0; i < p.donors.size(); ++i) {
                auto& [sum, n] = pooled[p.donors[i]];
                sum += p.pseudo_att[i];
                ++n;
            }
        }
        synthctl::PlaceboResult placebo;
        placebo.true_att = result.att;
        for (const auto& [donor, acc] : pooled) {
            placebo.donors.push_back(donor);
            placebo.pseudo_att.push_back(acc.first / acc.second);
            if (std::abs(placebo.pseudo_att.back()) > std::abs(result.att)) ++placebo.rank;
        }
        synthctl::write_placebo(out_file(c, "placebo.csv"), placebo);
        r.outputs.push_back(out_file(c, "placebo.csv"));
    }
    finish(ws, r);
    return r;
}

StageResult run_simgen(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    auto city_config = simgen::CityConfig::santiago();
    city_config.seed = config.seed;
    const auto& sg = config.simgen;
    if (sg.beta) city_config.epidemic.beta = *sg.beta;
    if (sg.coupling) city_config.coupling = *sg.coupling;
    if (sg.reporting_rate) city_config.observation.reporting_rate = *sg.reporting_rate;
    if (sg.delay_noise) city_config.observation.delay_noise = *sg.delay_noise;
    if (sg.hex_noise) city_config.observation.hex_noise = *sg.hex_noise;
    if (sg.delta) {
        auto cohort = sg.cohort;
        if (cohort.empty()) {
            for (const auto* name : {"Recoleta", "San Ramón", "La Cisterna", "La Granja", "San Joaquín", "San Miguel"}) {
                cohort.push_back(santiago::id_of(name));
            }
        }
        const int day = city_config.dates.offset_of(sg.plant_date);
        city_config = simgen::plant_lifting_effect(std::move(city_config), std::move(cohort), day, *sg.delta);
    }
    const auto city = simgen::generate(city_config);
    simgen::write_city(config.out_dir, city, city_config);

    StageResult r;
    r.stage = "simgen";
    for (const auto* name : {"hex_scores.csv", "od.csv", "antennas.csv", "transitions.csv", "cases.csv", "socio.csv",
                             "schedule.csv", "ground_truth.json", "mobiscope.ini"}) {
        r.outputs.push_back(config.out_dir / name);
    }
    std::vector<fs::path> inputs;
    if (!config.source.empty()) inputs.push_back(config.source);
    write_manifest(r, config, inputs);
    return r;
}

std::vector<StageResult> run_all(Workspace& ws) {
    using Stage = StageResult (*)(Workspace&);
    const std::pair<const char*, Stage> stages[] = {{"validate", run_validate}, {"mobility", run_mobility},
                                                    {"cluster", run_cluster},   {"regress", run_regress},
                                                    {"corr", run_corr},         {"scm", run_scm}};
    std::vector<StageResult> out;
    for (const auto& [name, fn] : stages) {
        log::info(fmt::format("run-all: {}", name));
        try {
            out.push_back(fn(ws));
        } catch (const std::exception& e) {
            const int code = std::string_view(name) == "validate" ? 2 : exit_code_for(e);
            throw StageFailure(name, e.what(), code);
        }
    }
    return out;
}

}  // namespace mobiscope::cli
