#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mobiscope/core.hpp"

namespace mobiscope::synthctl {

struct ScmOptions {
    double tolerance = 1e-8;  // KKT residual target
    int max_iterations = 1000;
};

/// Simplex-constrained least squares: argmin ||x1 - X0 w||^2 with w >= 0, sum(w) = 1.
/// `x0` has one column per donor and one row per pre-period day. Solved by a primal
/// active-set method started from uniform weights.
Eigen::VectorXd scm_weights(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0, const ScmOptions& options = {});

/// max_j |w_j - P(w - g/L)_j| with g the gradient of ||x1 - X0 w||^2, L its Lipschitz
/// constant and P the Euclidean projection onto the simplex. Zero exactly at the optimum.
double kkt_residual(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0, const Eigen::VectorXd& w);

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

/// One treated unit against a donor pool on a common time axis of pre + post days.
struct ScmProblem {
    std::string treated;
    std::vector<std::string> donors;
    Eigen::VectorXd y1;  // pre + post
    Eigen::MatrixXd y0;  // (pre + post) x donors
    int pre = 0;
    int post = 0;
    /// Subtract every unit's pre-period mean before fitting (unit fixed effects).
    bool demean = false;

    void validate() const;
};

struct LambdaChoice {
    std::optional<double> fixed;
    int grid_points = 20;
    double grid_low = 1e-3;   // multiples of the donors' pre-period outcome variance
    double grid_high = 1e3;
};

struct ScmFit {
    std::vector<std::string> donors;
    Eigen::VectorXd weights;      // simplex SCM weights
    Eigen::VectorXd aug_weights;  // SCM weights plus the ridge correction
    Eigen::VectorXd ridge_coefficients;  // per pre-period day, maps pre imbalance to the mean post outcome
    double lambda = 0.0;
    Eigen::VectorXd gap;  // treated minus augmented synthetic, pre + post
    double att = 0.0;     // mean post-period gap
    double scm_pre_sse = 0.0;
    double ascm_pre_sse = 0.0;
};

/// Augmented SCM with a ridge bias correction fitted on donors' pre-period outcomes.
/// lambda = 0 uses the pseudo-inverse.
ScmFit ascm_fit_lambda(const ScmProblem& problem, double lambda, const ScmOptions& options = {});

/// Lambda grid relative to the donors' pre-period outcome variance; ArgumentError when degenerate.
std::vector<double> lambda_grid(const ScmProblem& problem, const LambdaChoice& choice);

/// Chooses lambda by leave-one-donor-out prediction error of the post period unless fixed.
ScmFit ascm_fit(const ScmProblem& problem, const LambdaChoice& choice = {}, const ScmOptions& options = {});

/// Daily new cases per 100k smoothed by a centred 7-day mean; days without a full window
/// (including the first day, which has no difference) are missing. Windows never reach
/// across a day listed in `breaks`: they are truncated there, so values before a break
/// depend only on earlier days.
PanelSeries smoothed_incidence(const PanelSeries& cumulative_cases, long population,
                               std::span<const int> breaks = {});

struct StaggeredConfig {
    int pre = 42;
    int post = 28;
    /// Donors must stay untreated until at least treatment day + this many days
    /// (defaults to the post window).
    std::optional<int> donor_lag;
    InterventionKind kind = InterventionKind::phase2_transition;
    /// Optional cluster labels; when set, donors must share the treated unit's label.
    std::optional<std::map<std::string, int>> same_cluster;
    LambdaChoice lambda;
    bool demean = true;
    unsigned threads = 1;
};

struct TreatedFit {
    std::string unit;
    int treatment_day = 0;
    ScmFit fit;
};

struct StaggeredResult {
    std::vector<int> event_day;  // -pre .. post-1
    std::vector<double> avg_gap;
    std::vector<int> n_treated;
    double att = 0.0;
    std::vector<TreatedFit> fits;
};

/// Builds the event-time problem of one treated unit; nullopt (with a warning) when the
/// unit lacks a full window or eligible donors.
std::optional<ScmProblem> event_time_problem(const std::map<std::string, PanelSeries>& outcomes,
                                             const StudyRegion& region, const std::string& treated,
                                             const std::vector<std::string>& candidates,
                                             const StaggeredConfig& config, Warnings& warnings);

/// Per treated unit ASCM in event time, gaps averaged by event day. `candidates` is the
/// donor pool before eligibility filtering (empty = every non-cohort commune).
StaggeredResult staggered_ascm(const std::map<std::string, PanelSeries>& outcomes, const StudyRegion& region,
                               const std::vector<std::string>& cohort, const std::vector<std::string>& candidates,
                               const StaggeredConfig& config, Warnings& warnings);

struct PlaceboResult {
    std::vector<std::string> donors;
    std::vector<double> pseudo_att;
    double true_att = 0.0;
    int rank = 1;  // 1 + number of pseudo effects larger in magnitude than the true one
};

/// Refits with each donor in turn as the treated unit and the rest as its pool.
PlaceboResult placebo_distribution(const ScmProblem& problem, const LambdaChoice& choice = {},
                                   const ScmOptions& options = {}, unsigned threads = 1);

void write_gap(const std::filesystem::path& path, const StaggeredResult& result);
void write_weights(const std::filesystem::path& path, const StaggeredResult& result);
void write_placebo(const std::filesystem::path& path, const PlaceboResult& result);

}  // namespace mobiscope::synthctl
