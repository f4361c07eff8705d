#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <fmt/format.h>
#include <fmt/os.h>

#include "mobiscope/inference.hpp"

namespace mobiscope::inference {

namespace {

struct SciParts {
    int sig = 1;       // significant digits needed after rounding to `digits`
    int exponent = 0;  // decimal exponent of the rounded value
};

SciParts sci_parts(double x, int digits) {
    if (x == 0.0) return {1, 0};
    const auto text = fmt::format("{:.{}e}", std::abs(x), digits - 1);
    const auto e_pos = text.find('e');
    std::string mantissa = text.substr(0, e_pos);
    mantissa.erase(std::remove(mantissa.begin(), mantissa.end(), '.'), mantissa.end());
    while (mantissa.size() > 1 && mantissa.back() == '0') mantissa.pop_back();
    return {static_cast<int>(mantissa.size()), std::atoi(text.c_str() + e_pos + 1)};
}

std::string format_special(double x) {
    if (std::isnan(x)) return "NaN";
    return x > 0 ? "Inf" : "-Inf";
}

std::string format_sci(double x, int mantissa_digits) {
    auto text = fmt::format("{:.{}e}", x, mantissa_digits - 1);
    // Two-digit exponents as in "1.06e-10".
    const auto e_pos = text.find('e');
    const char sign = text[e_pos + 1];
    std::string exp_digits = text.substr(e_pos + 2);
    while (exp_digits.size() > 2 && exp_digits.front() == '0') exp_digits.erase(0, 1);
    return text.substr(0, e_pos) + "e" + sign + exp_digits;
}

}  // namespace

std::vector<std::string> format_r_numbers(std::span<const double> values, int digits) {
    if (digits < 1) throw ArgumentError("format_r_numbers: digits must be >= 1");
    bool neg = false;
    int int_digits = 1, rgt = 0, max_sig = 1;
    bool big_exponent = false;
    for (double x : values) {
        if (!std::isfinite(x)) continue;
        const auto parts = sci_parts(x, digits);
        neg = neg || x < 0;
        int_digits = std::max(int_digits, parts.exponent + 1);
        rgt = std::max(rgt, parts.sig - 1 - parts.exponent);
        max_sig = std::max(max_sig, parts.sig);
        big_exponent = big_exponent || std::abs(parts.exponent) >= 100;
    }
    const int fixed_width = (neg ? 1 : 0) + int_digits + (rgt > 0 ? rgt + 1 : 0);
    const int sci_width = (neg ? 1 : 0) + (max_sig > 1 ? max_sig + 1 : 1) + (big_exponent ? 5 : 4);
    const bool fixed = fixed_width <= sci_width;

    std::vector<std::string> out;
    out.reserve(values.size());
    for (double x : values) {
        if (!std::isfinite(x)) {
            out.push_back(format_special(x));
        } else if (fixed) {
            out.push_back(fmt::format("{:.{}f}", x, rgt));
        } else {
            out.push_back(format_sci(x, max_sig));
        }
    }
    return out;
}

std::vector<std::string> format_pvalues(std::span<const double> p, int digits) {
    const double eps = DBL_EPSILON;
    std::vector<std::string> out(p.size());
    std::vector<double> fixed_group, sci_group;
    std::vector<std::size_t> fixed_idx, sci_idx;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = p[i];
        if (std::isnan(v)) {
            out[i] = "NA";
        } else if (v < eps) {
            out[i] = "< " + format_r_numbers(std::span<const double>(&eps, 1), std::max(1, digits - 2))[0];
        } else if (std::floor(std::log10(v)) >= -3) {
            fixed_group.push_back(v);
            fixed_idx.push_back(i);
        } else {
            sci_group.push_back(v);
            sci_idx.push_back(i);
        }
    }
    const auto fixed_text = format_r_numbers(fixed_group, digits);
    for (std::size_t k = 0; k < fixed_idx.size(); ++k) out[fixed_idx[k]] = fixed_text[k];
    const auto sci_text = format_r_numbers(sci_group, digits);
    for (std::size_t k = 0; k < sci_idx.size(); ++k) out[sci_idx[k]] = sci_text[k];
    return out;
}

std::string significance_stars(double p) {
    if (std::isnan(p)) return "";
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    if (p < 0.1) return ".";
    return " ";
}

std::string format_fit_report(const FitReport& fit, const ReportLayout& layout) {
    const auto n_terms = fit.terms.size();
    std::vector<std::string> est, se, tv;
    for (std::size_t i = 0; i < n_terms; ++i) {
        est.push_back(fmt::format("{:.3f}", fit.estimate[i]));
        se.push_back(fmt::format("{:.3f}", fit.std_error[i]));
        tv.push_back(std::isfinite(fit.t_value[i]) ? fmt::format("{:.3f}", fit.t_value[i])
                                                     : format_special(fit.t_value[i]));
    }
    const auto pv = format_pvalues(fit.p_value, 3);

    auto width = [](const std::vector<std::string>& col, std::size_t header) {
        std::size_t w = header;
        for (const auto& s : col) w = std::max(w, s.size());
        return w;
    };
    std::size_t name_w = static_cast<std::size_t>(std::max(0, layout.name_width));
    for (const auto& t : fit.terms) name_w = std::max(name_w, t.size());
    const auto w_est = width(est, 8);
    const auto w_se = width(se, 10);
    const auto w_t = width(tv, 7);
    const auto w_p = width(pv, 8);

    std::string out = "Coefficients:\n";
    out += fmt::format("{:<{}} {:>{}} {:>{}} {:>{}} {:>{}}    \n", "", name_w, "Estimate", w_est, "Std. Error", w_se,
                       "t value", w_t, "Pr(>|t|)", w_p);
    for (std::size_t i = 0; i < n_terms; ++i) {
        out += fmt::format("{:<{}} {:>{}} {:>{}} {:>{}} {:>{}} {:<3}\n", fit.terms[i], name_w, est[i], w_est, se[i],
                           w_se, tv[i], w_t, pv[i], w_p, significance_stars(fit.p_value[i]));
    }
    out += "---\n";
    out += "Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1\n\n";

    const double sigma = fit.sigma;
    const double sigma4 = sigma == 0.0 ? 0.0 : std::stod(fmt::format("{:.3e}", sigma));
    out += fmt::format("Residual standard error: {} on {} degrees of freedom\n",
                       format_r_numbers(std::span<const double>(&sigma4, 1), 4)[0], fit.df_residual);
    if (fit.n_dropped > 0) {
        out += fmt::format("  ({} observation{} deleted due to missingness)\n", fit.n_dropped,
                           fit.n_dropped == 1 ? "" : "s");
    }
    out += fmt::format("Multiple R-squared:  {:.4g},\tAdjusted R-squared:  {:.4g} \n", fit.r_squared,
                       fit.adj_r_squared);
    const double fp = fit.f_p_value;
    out += fmt::format("F-statistic: {:.4g} on {} and {} DF,  p-value: {}\n", fit.f_statistic, fit.f_df1, fit.f_df2,
                       format_pvalues(std::span<const double>(&fp, 1), 4)[0]);
    return out;
}

void write_fit_report(const std::filesystem::path& path, const FitReport& fit, const ReportLayout& layout) {
    auto out = fmt::output_file(path.string());
    out.print("{}", format_fit_report(fit, layout));
}

void write_fit_report_csv(const std::filesystem::path& path, const FitReport& fit) {
    auto out = fmt::output_file(path.string());
    out.print("term,estimate,std_error,t_value,p_value,ci_low,ci_high\n");
    for (std::size_t i = 0; i < fit.terms.size(); ++i) {
        const auto [lo, hi] = fit.confidence_interval(i);
        out.print("{},{},{},{},{},{},{}\n", fit.terms[i], fit.estimate[i], fit.std_error[i], fit.t_value[i],
                  fit.p_value[i], lo, hi);
    }
}

}  // namespace mobiscope::inference
