#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mobiscope/logging.hpp"
#include "mobiscope/pipeline.hpp"

namespace cli = mobiscope::cli;

namespace {

struct Flags {
    std::string config;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> k;
};

void add_common(CLI::App* sub, Flags& f, bool config_required) {
    auto* opt = sub->add_option("--config,-c", f.config, "INI configuration file");
    if (config_required) opt->required();
    sub->add_option("--out,-o", f.out, "output directory (overrides [output] dir)");
    sub->add_option("--threads", f.threads, "worker cap, 0 = all cores");
    sub->add_option("--seed", f.seed, "random seed recorded in manifests and used by simgen");
}

cli::PipelineConfig make_config(const Flags& f) {
    cli::PipelineConfig config = f.config.empty() ? cli::PipelineConfig{} : cli::load_config(f.config);
    cli::Overrides o;
    if (f.out) o.out = *f.out;
    o.threads = f.threads;
    o.seed = f.seed;
    if (f.k) o.k_range = cli::parse_k_range(*f.k);
    cli::apply_overrides(config, o);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    mobiscope::log::init_from_env();
    CLI::App app{"Mobility and epidemic panel analysis"};
    app.set_version_flag("--version", MOBISCOPE_VERSION);
    app.require_subcommand(1);

    Flags flags;
    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"validate", "check every input file against its schema"},
        {"mobility", "mobility panels, flow vector and OD graph"},
        {"cluster", "DTW distances, complete-linkage dendrogram and validity indices"},
        {"regress", "cross-sectional regression of cumulative cases"},
        {"corr", "daily cross-sectional correlation of mobility and cases"},
        {"scm", "staggered augmented synthetic control"},
        {"run-all", "validate, mobility, cluster, regress, corr and scm in order"},
    };
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, flags, true);
        if (std::string_view(c.name) == "cluster" || std::string_view(c.name) == "run-all") {
            sub->add_option("--k", flags.k, "cluster count range, e.g. 2..6");
        }
    }
    auto* simgen = app.add_subcommand("simgen", "write a synthetic city and its ground truth");
    add_common(simgen, flags, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        auto config = make_config(flags);
        if (name == "simgen") {
            if (flags.config.empty() && !flags.out) config.out_dir = "city";
            cli::run_simgen(config);
            return 0;
        }
        cli::Workspace ws(std::move(config));
        if (name == "validate") {
            try {
                cli::run_validate(ws);
            } catch (const mobiscope::Error& e) {
                throw cli::StageFailure("validate", e.what(), 2);
            }
        } else if (name == "mobility") {
            cli::run_mobility(ws);
        } else if (name == "cluster") {
            cli::run_cluster(ws);
        } else if (name == "regress") {
            cli::run_regress(ws);
        } else if (name == "corr") {
            cli::run_corr(ws);
        } else if (name == "scm") {
            cli::run_scm(ws);
        } else {
            cli::run_all(ws);
        }
    } catch (const std::exception& e) {
        mobiscope::log::error(e.what());
        std::cerr << "mobiscope " << name << ": " << e.what() << '\n';
        return cli::exit_code_for(e);
    }
    return 0;
}
