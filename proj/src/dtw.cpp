#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "mobiscope/parallel.hpp"
#include "mobiscope/tsclust.hpp"

namespace mobiscope::tsclust {

StepPattern parse_step_pattern(std::string_view name) {
    if (name == "symmetric1") return StepPattern::symmetric1;
    if (name == "symmetric2") return StepPattern::symmetric2;
    throw ArgumentError(fmt::format("unknown step pattern '{}'", name));
}

std::string_view to_string(StepPattern p) {
    return p == StepPattern::symmetric1 ? "symmetric1" : "symmetric2";
}

double dtw_distance(std::span<const double> x, std::span<const double> y, const DtwConfig& cfg) {
    if (x.empty() || y.empty()) throw ArgumentError("dtw_distance: empty series");
    if (cfg.window && *cfg.window < 1) throw ArgumentError("dtw_distance: window must be >= 1");
    if (cfg.normalize && cfg.step_pattern != StepPattern::symmetric2) {
        throw ArgumentError("dtw_distance: only symmetric2 distances can be normalized");
    }
    const auto n = x.size();
    const auto m = y.size();
    const auto radius = cfg.window ? static_cast<std::size_t>(*cfg.window) : std::max(n, m);
    const auto gap = n > m ? n - m : m - n;
    if (gap > radius) {
        throw InfeasibleError(fmt::format("dtw_distance: band radius {} cannot align lengths {} and {}",
                                          radius, n, m));
    }
    const double diag_weight = cfg.step_pattern == StepPattern::symmetric2 ? 2.0 : 1.0;
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> prev(m, inf), cur(m, inf);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j_lo = i > radius ? i - radius : 0;
        const std::size_t j_hi = std::min(m - 1, i + radius);
        std::fill(cur.begin(), cur.end(), inf);
        for (std::size_t j = j_lo; j <= j_hi; ++j) {
            const double cost = std::abs(x[i] - y[j]);
            if (i == 0 && j == 0) {
                cur[0] = cost;
                continue;
            }
            double best = inf;
            if (i > 0 && j > 0) best = prev[j - 1] + diag_weight * cost;
            if (i > 0) best = std::min(best, prev[j] + cost);
            if (j > 0) best = std::min(best, cur[j - 1] + cost);
            cur[j] = best;
        }
        std::swap(prev, cur);
    }
    const double total = prev[m - 1];
    if (!std::isfinite(total)) throw InfeasibleError("dtw_distance: no admissible warping path");
    return cfg.normalize ? total / static_cast<double>(n + m) : total;
}

std::vector<double> fill_missing(const PanelSeries& series) {
    const auto n = series.size();
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < n; ++i) {
        if (series.has_value(i)) present.push_back(i);
    }
    if (present.empty()) {
        throw ArgumentError(fmt::format("series {} has no observed values", series.unit_id()));
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < present.front(); ++i) out[i] = series.value(present.front());
    for (std::size_t i = present.back(); i < n; ++i) out[i] = series.value(present.back());
    for (std::size_t k = 0; k + 1 < present.size(); ++k) {
        const auto a = present[k];
        const auto b = present[k + 1];
        const double va = series.value(a);
        const double vb = series.value(b);
        for (std::size_t i = a; i < b; ++i) {
            const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
            out[i] = va + t * (vb - va);
        }
    }
    return out;
}

namespace {

std::vector<double> zscore(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    std::vector<double> out(v.size(), 0.0);
    if (sd > 0.0) {
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
    }
    return out;
}

}  // namespace

DistanceMatrix distance_matrix(const std::vector<LabeledSeries>& series, const DtwConfig& cfg,
                               unsigned threads) {
    const auto n = series.size();
    if (n < 2) throw ArgumentError("distance_matrix: need at least two series");
    std::vector<std::vector<double>> prepared;
    prepared.reserve(n);
    for (const auto& s : series) prepared.push_back(cfg.znormalize ? zscore(s.values) : s.values);

    DistanceMatrix dm;
    dm.d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& s : series) dm.labels.push_back(s.unit);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    }
    std::vector<double> values(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        try {
            values[p] = dtw_distance(prepared[i], prepared[j], cfg);
        } catch (const InfeasibleError& e) {
            throw InfeasibleError(fmt::format("pair ({}, {}): {}", series[i].unit, series[j].unit, e.what()));
        } catch (const ArgumentError& e) {
            throw ArgumentError(fmt::format("pair ({}, {}): {}", series[i].unit, series[j].unit, e.what()));
        }
    });
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto i = static_cast<Eigen::Index>(pairs[p].first);
        const auto j = static_cast<Eigen::Index>(pairs[p].second);
        dm.d(i, j) = values[p];
        dm.d(j, i) = values[p];
    }
    return dm;
}

}  // namespace mobiscope::tsclust
