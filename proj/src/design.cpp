#include <array>
#include <cmath>

#include <fmt/format.h>

#include "mobiscope/inference.hpp"

namespace mobiscope::inference {

DesignMatrix make_design(std::vector<std::string> units, std::vector<std::string> slope_names,
                         const Eigen::MatrixXd& slopes, Eigen::VectorXd y, std::string response) {
    const auto n = static_cast<Eigen::Index>(units.size());
    if (slopes.rows() != n || y.size() != n) {
        throw ArgumentError(fmt::format("make_design: {} units, {} design rows, {} responses", n, slopes.rows(),
                                        y.size()));
    }
    if (static_cast<Eigen::Index>(slope_names.size()) != slopes.cols()) {
        throw ArgumentError("make_design: column names do not match the slope matrix");
    }
    DesignMatrix d;
    d.units = std::move(units);
    d.columns.push_back("(Intercept)");
    for (auto& s : slope_names) d.columns.push_back(std::move(s));
    d.x.resize(n, slopes.cols() + 1);
    d.x.col(0).setOnes();
    d.x.rightCols(slopes.cols()) = slopes;
    d.y = std::move(y);
    d.response = std::move(response);
    return d;
}

namespace {

std::optional<double> window_mean(const StudyRegion& region, const std::string& unit, Variable v, DayWindow w) {
    if (!region.has_panel(unit, v)) return std::nullopt;
    const auto& s = region.panel(unit, v);
    double sum = 0.0;
    int count = 0;
    for (int day = w.begin; day < w.end; ++day) {
        if (s.has_value(static_cast<std::size_t>(day))) {
            sum += s.value(static_cast<std::size_t>(day));
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / count;
}

}  // namespace

DesignMatrix build_design(const StudyRegion& region, const mobility::FlowVector& flow, DayWindow window,
                          const DesignOptions& options) {
    if (window.empty()) throw ArgumentError("build_design: empty window");
    if (window.begin < 0 || window.end > region.dates().size()) {
        throw RangeError(fmt::format("build_design: window [{}, {}) outside the study index", window.begin, window.end));
    }
    if (flow.risk_set.empty()) throw ArgumentError("build_design: empty risk set");

    const auto last = static_cast<std::size_t>(window.end - 1);
    std::vector<std::string> units, dropped;
    std::vector<std::array<double, 5>> rows;
    std::vector<double> response;
    for (const auto& c : region.communes()) {
        const auto mob_in = window_mean(region, c.id, Variable::mob_in, window);
        const auto mob_out = window_mean(region, c.id, Variable::mob_out, window);
        const auto score = window_mean(region, c.id, Variable::score, window);
        const auto f = flow.flow.find(c.id);
        std::optional<double> cases;
        if (options.per_100k) {
            if (region.has_panel(c.id, Variable::cum_cases_per_100k) || region.has_panel(c.id, Variable::cum_cases)) {
                const auto s = cases_per_100k(region, c.id);
                if (s.has_value(last)) cases = s.value(last);
            }
        } else if (region.has_panel(c.id, Variable::cum_cases)) {
            const auto& s = region.panel(c.id, Variable::cum_cases);
            if (s.has_value(last)) cases = s.value(last);
        }
        if (!mob_in || !mob_out || !score || f == flow.flow.end() || !cases) {
            dropped.push_back(c.id);
            continue;
        }
        units.push_back(c.id);
        rows.push_back({*mob_in, *mob_out, f->second, *score, *mob_out * f->second});
        response.push_back(*cases);
    }

    Eigen::MatrixXd slopes(static_cast<Eigen::Index>(rows.size()), 5);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < 5; ++j) slopes(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
        y(static_cast<Eigen::Index>(i)) = response[i];
    }
    auto d = make_design(std::move(units), {"MobIn", "MobOut", "Flow", "Score", "MobOut:Flow"}, slopes, std::move(y),
                         "CumCases");
    d.dropped = std::move(dropped);
    return d;
}

}  // namespace mobiscope::inference
