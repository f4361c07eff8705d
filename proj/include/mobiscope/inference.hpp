#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mobiscope/core.hpp"
#include "mobiscope/mobility.hpp"

namespace mobiscope::inference {

/// Regression design with a leading intercept column. Rows are units.
struct DesignMatrix {
    std::vector<std::string> units;
    std::vector<std::string> columns;  // "(Intercept)" first
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::string response = "CumCases";
    std::vector<std::string> dropped;  // units removed for missing data
};

/// Adds the intercept to the given slope columns.
DesignMatrix make_design(std::vector<std::string> units, std::vector<std::string> slope_names,
                         const Eigen::MatrixXd& slopes, Eigen::VectorXd y, std::string response = "y");

struct DesignOptions {
    bool per_100k = false;  // response as cumulative cases per 100k instead of raw counts
};

/// Columns (Intercept), MobIn, MobOut, Flow, Score, MobOut:Flow. Covariates are window means of
/// the region panels, Flow comes from `flow`, the response is cumulative cases on the last
/// window day. Units lacking any value are dropped and listed in `dropped`.
DesignMatrix build_design(const StudyRegion& region, const mobility::FlowVector& flow, DayWindow window,
                          const DesignOptions& options = {});

struct FitReport {
    std::vector<std::string> terms;
    std::vector<double> estimate;
    std::vector<double> std_error;
    std::vector<double> t_value;
    std::vector<double> p_value;
    double sigma = 0.0;  // residual standard error
    int df_residual = 0;
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double f_statistic = 0.0;
    int f_df1 = 0;
    int f_df2 = 0;
    double f_p_value = 1.0;
    int n = 0;
    int n_dropped = 0;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;

    /// Two-sided interval estimate +/- t_{df}(1 - (1 - level)/2) * SE.
    std::pair<double, double> confidence_interval(std::size_t term, double level = 0.95) const;
};

/// Least squares via column-pivoted Householder QR with classical standard errors.
/// Throws SingularDesignError naming dependent columns, ArgumentError when n <= p.
FitReport ols_fit(const DesignMatrix& design);

/// R-style rendering of numbers: `digits` significant digits, fixed notation unless
/// scientific is narrower, common formatting across the vector.
std::vector<std::string> format_r_numbers(std::span<const double> values, int digits);
/// p-value formatting with fixed and scientific groups and a "< eps" floor.
std::vector<std::string> format_pvalues(std::span<const double> p, int digits);
std::string significance_stars(double p);

struct ReportLayout {
    int name_width = 0;  // minimum width of the term column
};

/// Coefficient table and fit summary in the layout of a stock linear-model summary.
std::string format_fit_report(const FitReport& fit, const ReportLayout& layout = {});
void write_fit_report(const std::filesystem::path& path, const FitReport& fit, const ReportLayout& layout = {});
/// term,estimate,std_error,t_value,p_value,ci_low,ci_high
void write_fit_report_csv(const std::filesystem::path& path, const FitReport& fit);

/// Pearson correlation; nullopt when fewer than 3 pairs or either side has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

/// Cumulative cases per 100k for a unit, from the stored panel or derived from raw counts.
PanelSeries cases_per_100k(const StudyRegion& region, std::string_view unit);

struct CorrSeries {
    DateIndex dates;
    std::vector<double> r;
    std::vector<bool> missing;
    std::vector<int> n;
};

/// Per-day Pearson r across communes of variables a and b. Days with fewer than 3 usable
/// communes or zero variance are missing (the latter also warned).
CorrSeries cross_sectional_corr(const StudyRegion& region, Variable a = Variable::mobility_index,
                                Variable b = Variable::cum_cases_per_100k, Warnings* warnings = nullptr);

struct CorrMatrix {
    std::vector<std::string> units;
    Eigen::MatrixXd r;  // NaN where undefined
};

/// Commune-by-commune correlation over time using pairwise-complete days.
CorrMatrix mobility_corr_matrix(const StudyRegion& region, Variable v = Variable::mobility_index);

/// R^2 of the single-predictor cross-sectional regression of cases per 100k at `day`.
double r_squared_snapshot(const StudyRegion& region, int day, Variable predictor = Variable::mobility_index);

/// Mean of the non-missing r values whose day lies in `window`; nullopt if none.
std::optional<double> mean_correlation(const CorrSeries& series, DayWindow window);

void write_corr_evolution(const std::filesystem::path& path, const CorrSeries& series);
void write_corr_matrix(const std::filesystem::path& path, const CorrMatrix& matrix);

}  // namespace mobiscope::inference
