#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <fmt/os.h>

#include "mobiscope/parallel.hpp"
#include "mobiscope/synthctl.hpp"

namespace mobiscope::synthctl {

void ScmProblem::validate() const {
    if (pre < 2) throw ArgumentError(fmt::format("pre-period of {} days is too short", pre));
    if (post < 1) throw ArgumentError("post-period must contain at least one day");
    if (donors.empty()) throw ArgumentError(fmt::format("no donors for treated unit {}", treated));
    if (y1.size() != pre + post || y0.rows() != pre + post) {
        throw ArgumentError("outcome lengths do not match pre + post");
    }
    if (y0.cols() != static_cast<Eigen::Index>(donors.size())) {
        throw ArgumentError("donor outcome matrix does not match the donor list");
    }
    if (std::find(donors.begin(), donors.end(), treated) != donors.end()) {
        throw ArgumentError(fmt::format("treated unit {} is also a donor", treated));
    }
    if (!y1.allFinite() || !y0.allFinite()) throw ArgumentError("outcomes must be complete and finite");
}

namespace {

Eigen::MatrixXd regularized_inverse(const Eigen::MatrixXd& centered, double lambda) {
    Eigen::MatrixXd m = centered * centered.transpose();
    m.diagonal().array() += lambda;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
    return cod.pseudoInverse();
}

ScmProblem demeaned(const ScmProblem& problem) {
    ScmProblem out = problem;
    out.demean = false;
    out.y1.array() -= problem.y1.head(problem.pre).mean();
    const Eigen::RowVectorXd means = problem.y0.topRows(problem.pre).colwise().mean();
    out.y0.rowwise() -= means;
    return out;
}

}  // namespace

ScmFit ascm_fit_lambda(const ScmProblem& problem, double lambda, const ScmOptions& options) {
    problem.validate();
    if (problem.demean) return ascm_fit_lambda(demeaned(problem), lambda, options);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be finite and >= 0");
    const auto pre = problem.pre;
    const Eigen::MatrixXd x0 = problem.y0.topRows(pre);
    const Eigen::VectorXd x1 = problem.y1.head(pre);

    ScmFit fit;
    fit.donors = problem.donors;
    fit.lambda = lambda;
    fit.weights = scm_weights(x1, x0, options);

    Eigen::MatrixXd centered = x0.transpose();
    const Eigen::RowVectorXd donor_mean = centered.colwise().mean();
    centered.rowwise() -= donor_mean;
    const Eigen::VectorXd imbalance = x1 - x0 * fit.weights;
    const Eigen::MatrixXd m_inv = regularized_inverse(centered, lambda);

    fit.aug_weights = fit.weights + m_inv * (centered * imbalance);
    Eigen::VectorXd post_mean = problem.y0.bottomRows(problem.post).colwise().mean().transpose();
    post_mean.array() -= post_mean.mean();
    fit.ridge_coefficients = centered.transpose() * (m_inv * post_mean);

    fit.gap = problem.y1 - problem.y0 * fit.aug_weights;
    fit.att = fit.gap.tail(problem.post).mean();
    fit.scm_pre_sse = imbalance.squaredNorm();
    fit.ascm_pre_sse = fit.gap.head(pre).squaredNorm();
    return fit;
}

std::vector<double> lambda_grid(const ScmProblem& problem, const LambdaChoice& choice) {
    if (choice.grid_points < 1 || !(choice.grid_low > 0.0) || !(choice.grid_high >= choice.grid_low)) {
        throw ArgumentError("lambda grid needs >= 1 point and 0 < low <= high");
    }
    const Eigen::MatrixXd x0 = problem.y0.topRows(problem.pre);
    const double mean = x0.mean();
    const double variance = (x0.array() - mean).square().mean();
    if (!(variance > 0.0) || !std::isfinite(variance)) {
        throw ArgumentError("lambda grid is degenerate: donors' pre-period outcomes have zero variance");
    }
    std::vector<double> grid;
    const double lo = std::log(choice.grid_low), hi = std::log(choice.grid_high);
    for (int g = 0; g < choice.grid_points; ++g) {
        const double t = choice.grid_points == 1 ? 0.5 : static_cast<double>(g) / (choice.grid_points - 1);
        grid.push_back(variance * std::exp(lo + t * (hi - lo)));
    }
    return grid;
}

ScmFit ascm_fit(const ScmProblem& problem, const LambdaChoice& choice, const ScmOptions& options) {
    problem.validate();
    if (problem.demean) return ascm_fit(demeaned(problem), choice, options);
    if (choice.fixed) return ascm_fit_lambda(problem, *choice.fixed, options);
    const auto grid = lambda_grid(problem, choice);
    const auto j_count = static_cast<Eigen::Index>(problem.donors.size());
    if (j_count < 3) return ascm_fit_lambda(problem, grid[grid.size() / 2], options);

    const auto pre = problem.pre;
    std::vector<double> error(grid.size(), 0.0);
    for (Eigen::Index hold = 0; hold < j_count; ++hold) {
        Eigen::MatrixXd pool(problem.y0.rows(), j_count - 1);
        for (Eigen::Index j = 0, c = 0; j < j_count; ++j) {
            if (j != hold) pool.col(c++) = problem.y0.col(j);
        }
        const Eigen::VectorXd target = problem.y0.col(hold);
        const Eigen::MatrixXd x0 = pool.topRows(pre);
        const Eigen::VectorXd w = scm_weights(target.head(pre), x0, options);
        Eigen::MatrixXd centered = x0.transpose();
        const Eigen::RowVectorXd donor_mean = centered.colwise().mean();
        centered.rowwise() -= donor_mean;
        const Eigen::VectorXd imbalance_proj = centered * (target.head(pre) - x0 * w);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const Eigen::VectorXd w_aug = w + regularized_inverse(centered, grid[g]) * imbalance_proj;
            const Eigen::VectorXd pred = pool.bottomRows(problem.post) * w_aug;
            error[g] += (target.tail(problem.post) - pred).squaredNorm();
        }
    }
    const auto best = std::min_element(error.begin(), error.end()) - error.begin();
    return ascm_fit_lambda(problem, grid[static_cast<std::size_t>(best)], options);
}

PanelSeries smoothed_incidence(const PanelSeries& cumulative_cases, long population, std::span<const int> breaks) {
    if (population <= 0) throw ArgumentError("smoothed_incidence: population must be positive");
    const auto n = cumulative_cases.size();
    const double scale = 1e5 / static_cast<double>(population);
    std::vector<double> daily(n, 0.0);
    std::vector<bool> daily_missing(n, true);
    for (std::size_t t = 1; t < n; ++t) {
        if (cumulative_cases.has_value(t) && cumulative_cases.has_value(t - 1)) {
            daily[t] = (cumulative_cases.value(t) - cumulative_cases.value(t - 1)) * scale;
            daily_missing[t] = false;
        }
    }
    // segment[t]: index of the last break at or before t
    std::vector<int> segment(n, 0);
    {
        std::vector<int> sorted(breaks.begin(), breaks.end());
        std::sort(sorted.begin(), sorted.end());
        std::size_t b = 0;
        int current = 0;
        for (std::size_t t = 0; t < n; ++t) {
            while (b < sorted.size() && sorted[b] <= static_cast<int>(t)) {
                ++b;
                ++current;
            }
            segment[t] = current;
        }
    }
    std::vector<double> smooth(n, 0.0);
    std::vector<bool> missing(n, true);
    for (std::size_t t = 3; t + 3 < n; ++t) {
        double sum = 0.0;
        int used = 0;
        bool complete = true;
        for (std::size_t s = t - 3; s <= t + 3; ++s) {
            if (segment[s] != segment[t]) continue;
            if (daily_missing[s]) {
                complete = false;
                break;
            }
            sum += daily[s];
            ++used;
        }
        if (complete) {
            smooth[t] = sum / used;
            missing[t] = false;
        }
    }
    return PanelSeries(cumulative_cases.unit_id(), Variable::new_cases, std::move(smooth), std::move(missing));
}

namespace {

bool complete_over(const PanelSeries& s, int from, int to) {
    for (int d = from; d < to; ++d) {
        if (s.is_missing(static_cast<std::size_t>(d))) return false;
    }
    return true;
}

}  // namespace

std::optional<ScmProblem> event_time_problem(const std::map<std::string, PanelSeries>& outcomes,
                                             const StudyRegion& region, const std::string& treated,
                                             const std::vector<std::string>& candidates,
                                             const StaggeredConfig& config, Warnings& warnings) {
    const auto tau = treatment_day(region, treated, config.kind);
    if (!tau) {
        warnings.add(fmt::format("scm: {} is never treated; excluded", treated));
        return std::nullopt;
    }
    const int from = *tau - config.pre;
    const int to = *tau + config.post;
    if (from < 0 || to > region.dates().size()) {
        warnings.add(fmt::format("scm: {} treated on day {} lacks a {}+{} day window; excluded", treated, *tau,
                                 config.pre, config.post));
        return std::nullopt;
    }
    const auto own = outcomes.find(treated);
    if (own == outcomes.end() || !complete_over(own->second, from, to)) {
        warnings.add(fmt::format("scm: {} has incomplete outcome data around treatment; excluded", treated));
        return std::nullopt;
    }
    const int lag = config.donor_lag.value_or(config.post);
    std::optional<int> cluster;
    if (config.same_cluster) {
        auto it = config.same_cluster->find(treated);
        if (it != config.same_cluster->end()) cluster = it->second;
    }

    ScmProblem problem;
    problem.treated = treated;
    problem.pre = config.pre;
    problem.post = config.post;
    problem.demean = config.demean;
    std::vector<const PanelSeries*> donor_series;
    for (const auto& d : candidates) {
        if (d == treated) continue;
        const auto dt = treatment_day(region, d, config.kind);
        if (dt && *dt < *tau + lag) continue;
        if (cluster) {
            auto it = config.same_cluster->find(d);
            if (it == config.same_cluster->end() || it->second != *cluster) continue;
        }
        const auto series = outcomes.find(d);
        if (series == outcomes.end() || !complete_over(series->second, from, to)) continue;
        problem.donors.push_back(d);
        donor_series.push_back(&series->second);
    }
    if (problem.donors.empty()) {
        warnings.add(fmt::format("scm: no eligible donors for {} treated on day {}; excluded", treated, *tau));
        return std::nullopt;
    }
    const int len = to - from;
    problem.y1.resize(len);
    problem.y0.resize(len, static_cast<Eigen::Index>(donor_series.size()));
    for (int t = 0; t < len; ++t) {
        problem.y1(t) = own->second.value(static_cast<std::size_t>(from + t));
        for (std::size_t j = 0; j < donor_series.size(); ++j) {
            problem.y0(t, static_cast<Eigen::Index>(j)) = donor_series[j]->value(static_cast<std::size_t>(from + t));
        }
    }
    return problem;
}

StaggeredResult staggered_ascm(const std::map<std::string, PanelSeries>& outcomes, const StudyRegion& region,
                               const std::vector<std::string>& cohort, const std::vector<std::string>& candidates,
                               const StaggeredConfig& config, Warnings& warnings) {
    if (cohort.empty()) throw ArgumentError("staggered_ascm: empty treated cohort");
    if (config.pre < 2 || config.post < 1) throw ArgumentError("staggered_ascm: invalid pre/post windows");
    const std::set<std::string> cohort_set(cohort.begin(), cohort.end());
    std::vector<std::string> pool;
    if (candidates.empty()) {
        for (const auto& c : region.communes()) pool.push_back(c.id);
    } else {
        pool = candidates;
    }
    std::erase_if(pool, [&](const std::string& id) { return cohort_set.contains(id); });

    std::vector<std::pair<std::string, ScmProblem>> problems;
    for (const auto& unit : cohort) {
        if (!region.has_commune(unit)) throw LookupError(fmt::format("unknown treated commune {}", unit));
        if (auto p = event_time_problem(outcomes, region, unit, pool, config, warnings)) {
            problems.emplace_back(unit, std::move(*p));
        }
    }
    if (problems.empty()) throw EstimationError("staggered_ascm: every treated commune was excluded");

    StaggeredResult result;
    result.fits.resize(problems.size());
    parallel_for(problems.size(), config.threads, [&](std::size_t i) {
        const auto& [unit, problem] = problems[i];
        result.fits[i].unit = unit;
        result.fits[i].treatment_day = *treatment_day(region, unit, config.kind);
        result.fits[i].fit = ascm_fit(problem, config.lambda);
    });

    const int len = config.pre + config.post;
    for (int t = 0; t < len; ++t) {
        double sum = 0.0;
        for (const auto& f : result.fits) sum += f.fit.gap(t);
        result.event_day.push_back(t - config.pre);
        result.avg_gap.push_back(sum / static_cast<double>(result.fits.size()));
        result.n_treated.push_back(static_cast<int>(result.fits.size()));
    }
    double att = 0.0;
    for (int t = config.pre; t < len; ++t) att += result.avg_gap[static_cast<std::size_t>(t)];
    result.att = att / config.post;
    return result;
}

PlaceboResult placebo_distribution(const ScmProblem& problem, const LambdaChoice& choice, const ScmOptions& options,
                                   unsigned threads) {
    problem.validate();
    const auto j_count = static_cast<Eigen::Index>(problem.donors.size());
    if (j_count < 3) throw ArgumentError("placebo_distribution: need at least 3 donors");
    PlaceboResult out;
    out.true_att = ascm_fit(problem, choice, options).att;
    out.donors = problem.donors;
    out.pseudo_att.assign(static_cast<std::size_t>(j_count), 0.0);
    parallel_for(static_cast<std::size_t>(j_count), threads, [&](std::size_t idx) {
        const auto hold = static_cast<Eigen::Index>(idx);
        ScmProblem pseudo;
        pseudo.treated = problem.donors[idx];
        pseudo.pre = problem.pre;
        pseudo.post = problem.post;
        pseudo.demean = problem.demean;
        pseudo.y1 = problem.y0.col(hold);
        pseudo.y0.resize(problem.y0.rows(), j_count - 1);
        for (Eigen::Index j = 0, c = 0; j < j_count; ++j) {
            if (j == hold) continue;
            pseudo.donors.push_back(problem.donors[static_cast<std::size_t>(j)]);
            pseudo.y0.col(c++) = problem.y0.col(j);
        }
        out.pseudo_att[idx] = ascm_fit(pseudo, choice, options).att;
    });
    out.rank = 1;
    for (double a : out.pseudo_att) {
        if (std::abs(a) > std::abs(out.true_att)) ++out.rank;
    }
    return out;
}

void write_gap(const std::filesystem::path& path, const StaggeredResult& result) {
    auto out = fmt::output_file(path.string());
    out.print("event_day,avg_gap,n_treated\n");
    for (std::size_t t = 0; t < result.event_day.size(); ++t) {
        out.print("{},{},{}\n", result.event_day[t], result.avg_gap[t], result.n_treated[t]);
    }
}

void write_weights(const std::filesystem::path& path, const StaggeredResult& result) {
    auto out = fmt::output_file(path.string());
    out.print("treated,donor,weight\n");
    for (const auto& f : result.fits) {
        for (std::size_t j = 0; j < f.fit.donors.size(); ++j) {
            out.print("{},{},{}\n", f.unit, f.fit.donors[j], f.fit.weights(static_cast<Eigen::Index>(j)));
        }
    }
}

void write_placebo(const std::filesystem::path& path, const PlaceboResult& result) {
    auto out = fmt::output_file(path.string());
    out.print("donor,pseudo_att\n");
    for (std::size_t j = 0; j < result.donors.size(); ++j) out.print("{},{}\n", result.donors[j], result.pseudo_att[j]);
}

}  // namespace mobiscope::synthctl
