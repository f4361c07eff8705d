#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <fmt/os.h>

#include "mobiscope/inference.hpp"

namespace mobiscope::inference {

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ArgumentError("pearson: inputs differ in length");
    const auto n = a.size();
    if (n < 3) return std::nullopt;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

PanelSeries cases_per_100k(const StudyRegion& region, std::string_view unit) {
    if (region.has_panel(unit, Variable::cum_cases_per_100k)) return region.panel(unit, Variable::cum_cases_per_100k);
    const auto& raw = region.panel(unit, Variable::cum_cases);
    const double scale = 1e5 / static_cast<double>(region.commune(unit).population);
    std::vector<double> values(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) values[i] = raw.value(i) * scale;
    return PanelSeries(std::string(unit), Variable::cum_cases_per_100k, std::move(values), raw.missing_mask());
}

namespace {

std::optional<PanelSeries> lookup(const StudyRegion& region, const std::string& unit, Variable v) {
    if (v == Variable::cum_cases_per_100k) {
        if (region.has_panel(unit, v) || region.has_panel(unit, Variable::cum_cases)) {
            return cases_per_100k(region, unit);
        }
        return std::nullopt;
    }
    if (!region.has_panel(unit, v)) return std::nullopt;
    return region.panel(unit, v);
}

struct CrossSection {
    std::vector<std::optional<PanelSeries>> a, b;
};

CrossSection gather(const StudyRegion& region, Variable va, Variable vb) {
    CrossSection cs;
    for (const auto& c : region.communes()) {
        cs.a.push_back(lookup(region, c.id, va));
        cs.b.push_back(lookup(region, c.id, vb));
    }
    return cs;
}

void pairs_at(const CrossSection& cs, std::size_t day, std::vector<double>& xa, std::vector<double>& xb) {
    xa.clear();
    xb.clear();
    for (std::size_t i = 0; i < cs.a.size(); ++i) {
        if (!cs.a[i] || !cs.b[i]) continue;
        if (cs.a[i]->has_value(day) && cs.b[i]->has_value(day)) {
            xa.push_back(cs.a[i]->value(day));
            xb.push_back(cs.b[i]->value(day));
        }
    }
}

}  // namespace

CorrSeries cross_sectional_corr(const StudyRegion& region, Variable a, Variable b, Warnings* warnings) {
    CorrSeries out;
    out.dates = region.dates();
    const auto n_days = static_cast<std::size_t>(region.dates().size());
    out.r.assign(n_days, 0.0);
    out.missing.assign(n_days, true);
    out.n.assign(n_days, 0);
    const auto cs = gather(region, a, b);
    std::vector<double> xa, xb;
    int zero_variance_days = 0;
    for (std::size_t day = 0; day < n_days; ++day) {
        pairs_at(cs, day, xa, xb);
        out.n[day] = static_cast<int>(xa.size());
        if (xa.size() < 3) continue;
        if (const auto r = pearson(xa, xb)) {
            out.r[day] = *r;
            out.missing[day] = false;
        } else {
            ++zero_variance_days;
        }
    }
    if (zero_variance_days > 0 && warnings) {
        warnings->add(fmt::format("correlation: {} day(s) with zero cross-sectional variance left missing",
                                  zero_variance_days));
    }
    return out;
}

CorrMatrix mobility_corr_matrix(const StudyRegion& region, Variable v) {
    CorrMatrix m;
    std::vector<PanelSeries> series;
    for (const auto& c : region.communes()) {
        if (auto s = lookup(region, c.id, v)) {
            m.units.push_back(c.id);
            series.push_back(std::move(*s));
        }
    }
    const auto n = static_cast<Eigen::Index>(series.size());
    m.r = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> xa, xb;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const auto& si = series[static_cast<std::size_t>(i)];
            const auto& sj = series[static_cast<std::size_t>(j)];
            xa.clear();
            xb.clear();
            for (std::size_t d = 0; d < si.size(); ++d) {
                if (si.has_value(d) && sj.has_value(d)) {
                    xa.push_back(si.value(d));
                    xb.push_back(sj.value(d));
                }
            }
            auto r = pearson(xa, xb);
            if (i == j && xa.size() >= 3) r = 1.0;
            if (r) {
                m.r(i, j) = *r;
                m.r(j, i) = *r;
            }
        }
    }
    return m;
}

double r_squared_snapshot(const StudyRegion& region, int day, Variable predictor) {
    if (!region.dates().contains(day)) throw RangeError(fmt::format("snapshot day {} outside the study index", day));
    const auto cs = gather(region, predictor, Variable::cum_cases_per_100k);
    std::vector<double> xa, xb;
    pairs_at(cs, static_cast<std::size_t>(day), xa, xb);
    if (xa.size() < 3) {
        throw EstimationError(fmt::format("snapshot day {}: only {} communes with both variables", day, xa.size()));
    }
    const auto r = pearson(xa, xb);
    return r ? (*r) * (*r) : 0.0;
}

std::optional<double> mean_correlation(const CorrSeries& series, DayWindow window) {
    double sum = 0.0;
    int count = 0;
    for (int d = std::max(0, window.begin); d < std::min<int>(window.end, static_cast<int>(series.r.size())); ++d) {
        if (series.missing[static_cast<std::size_t>(d)]) continue;
        sum += series.r[static_cast<std::size_t>(d)];
        ++count;
    }
    if (count == 0) return std::nullopt;
    return sum / count;
}

void write_corr_evolution(const std::filesystem::path& path, const CorrSeries& series) {
    auto out = fmt::output_file(path.string());
    out.print("date,r,n\n");
    for (std::size_t d = 0; d < series.r.size(); ++d) {
        const auto date = format_date(series.dates.date_at(static_cast<int>(d)));
        if (series.missing[d]) {
            out.print("{},NA,{}\n", date, series.n[d]);
        } else {
            out.print("{},{},{}\n", date, series.r[d], series.n[d]);
        }
    }
}

void write_corr_matrix(const std::filesystem::path& path, const CorrMatrix& matrix) {
    auto out = fmt::output_file(path.string());
    out.print("commune_id");
    for (const auto& u : matrix.units) out.print(",{}", u);
    out.print("\n");
    for (std::size_t i = 0; i < matrix.units.size(); ++i) {
        out.print("{}", matrix.units[i]);
        for (std::size_t j = 0; j < matrix.units.size(); ++j) {
            const double v = matrix.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (std::isnan(v)) {
                out.print(",NA");
            } else {
                out.print(",{}", v);
            }
        }
        out.print("\n");
    }
}

}  // namespace mobiscope::inference
