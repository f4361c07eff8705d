#include <doctest.h>

#include <random>

#include "mobiscope/synthctl.hpp"
#include "support.hpp"

using namespace mobiscope;
using namespace mobiscope::synthctl;

namespace {

ScmProblem problem_from(const Eigen::VectorXd& y1, const Eigen::MatrixXd& y0, int pre) {
    ScmProblem p;
    p.treated = "t";
    for (Eigen::Index j = 0; j < y0.cols(); ++j) p.donors.push_back("d" + std::to_string(j));
    p.y1 = y1;
    p.y0 = y0;
    p.pre = pre;
    p.post = static_cast<int>(y1.size()) - pre;
    return p;
}

Eigen::MatrixXd random_donors(std::mt19937_64& rng, int rows, int cols) {
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j) {
        const double level = 5.0 * z(rng);
        for (int t = 0; t < rows; ++t) m(t, j) = level + std::sin(0.3 * t * (j + 1)) + 0.3 * z(rng);
    }
    return m;
}

}  // namespace

TEST_SUITE("scm") {

TEST_CASE("simplex projection") {
    const auto p = project_to_simplex(Eigen::Vector3d(0.2, 0.9, -3.0));
    CHECK(p.sum() == doctest::Approx(1.0));
    CHECK(p(0) == doctest::Approx(0.15));
    CHECK(p(1) == doctest::Approx(0.85));
    CHECK(p(2) == 0.0);
    const Eigen::Vector3d inside(0.2, 0.3, 0.5);
    CHECK(project_to_simplex(inside).isApprox(inside));
}

TEST_CASE("midpoint of two donors") {
    Eigen::MatrixXd x0(4, 3);
    x0 << 0, 2, 10, 1, 3, 12, 0, 4, 9, 2, 2, 15;
    const Eigen::VectorXd x1 = 0.5 * (x0.col(0) + x0.col(1));
    const auto w = scm_weights(x1, x0);
    CHECK(w(0) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(w(1) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(std::abs(w(2)) < 1e-10);
    CHECK(kkt_residual(x1, x0, w) < 1e-8);
}

TEST_CASE("treated outside the donor hull") {
    Eigen::MatrixXd x0(3, 3);
    x0 << 1, 2, 3, 1, 2, 3, 1, 2, 3;
    const Eigen::Vector3d x1(10, 10, 10);
    const auto w = scm_weights(x1, x0);
    CHECK(w(2) == doctest::Approx(1.0));
    CHECK(kkt_residual(x1, x0, w) < 1e-8);
}

TEST_CASE("random problems satisfy simplex and KKT conditions") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int rep = 0; rep < 40; ++rep) {
        const int t = 10 + rep % 15;
        const int j = 2 + rep % 9;
        const auto x0 = random_donors(rng, t, j);
        Eigen::VectorXd x1(t);
        for (int i = 0; i < t; ++i) x1(i) = 3.0 * z(rng);
        const auto w = scm_weights(x1, x0);
        CHECK((w.array() >= -1e-12).all());
        CHECK(std::abs(w.sum() - 1.0) < 1e-8);
        CHECK(kkt_residual(x1, x0, w) < 1e-8);
    }
    CHECK_THROWS_AS(scm_weights(Eigen::Vector2d(1, 2), Eigen::MatrixXd(3, 2)), ArgumentError);
}

TEST_CASE("exact match donor takes all the weight") {
    std::mt19937_64 rng(23);
    auto y0 = random_donors(rng, 30, 5);
    for (int t = 0; t < 30; ++t) y0(t, 2) = 50.0 + std::cos(0.2 * t) * 3.0;
    Eigen::VectorXd y1 = y0.col(2);
    for (int t = 20; t < 30; ++t) y1(t) += 4.0 + 0.1 * t;
    const auto problem = problem_from(y1, y0, 20);
    const auto fit = ascm_fit(problem);
    CHECK(fit.weights(2) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fit.scm_pre_sse < 1e-12);
    const double raw = (y1.tail(10) - y0.col(2).tail(10)).mean();
    CHECK(fit.att == doctest::Approx(raw).epsilon(1e-8));
}

TEST_CASE("ridge limits") {
    std::mt19937_64 rng(29);
    const auto y0 = random_donors(rng, 40, 8);
    Eigen::VectorXd y1 = 0.3 * y0.col(1) + 0.7 * y0.col(4);
    for (int t = 0; t < 40; ++t) y1(t) += 2.0 + 0.1 * std::sin(1.7 * t);
    const auto problem = problem_from(y1, y0, 30);

    const auto large = ascm_fit_lambda(problem, 1e12);
    CHECK((large.aug_weights - large.weights).cwiseAbs().maxCoeff() < 1e-6);
    const Eigen::VectorXd scm_gap = y1 - y0 * large.weights;
    CHECK((large.gap - scm_gap).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(large.ascm_pre_sse <= large.scm_pre_sse * (1 + 1e-9) + 1e-9);

    const auto zero = ascm_fit_lambda(problem, 0.0);
    CHECK(zero.ascm_pre_sse <= zero.scm_pre_sse + 1e-9);
    CHECK(std::abs(zero.aug_weights.sum() - 1.0) < 1e-8);
    CHECK_THROWS_AS(ascm_fit_lambda(problem, -1.0), ArgumentError);

    const auto grid = lambda_grid(problem, {});
    CHECK(grid.size() == 20);
    CHECK(std::is_sorted(grid.begin(), grid.end()));

    LambdaChoice fixed;
    fixed.fixed = 3.0;
    CHECK(ascm_fit(problem, fixed).lambda == 3.0);
}

TEST_CASE("demeaning removes level differences") {
    std::mt19937_64 rng(31);
    auto y0 = random_donors(rng, 30, 4);
    Eigen::VectorXd y1 = y0.col(0).array() + 100.0;
    for (int t = 22; t < 30; ++t) y1(t) += 5.0;
    auto problem = problem_from(y1, y0, 22);
    problem.demean = true;
    const auto fit = ascm_fit(problem);
    CHECK(fit.att == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(std::abs(fit.aug_weights.sum() - 1.0) < 1e-8);
    problem.demean = false;
    CHECK(std::abs(ascm_fit(problem).att - 5.0) > 1.0);
}

TEST_CASE("problem validation") {
    ScmProblem p = problem_from(Eigen::VectorXd::Ones(5), Eigen::MatrixXd::Ones(5, 2), 3);
    CHECK_NOTHROW(p.validate());
    p.pre = 6;
    CHECK_THROWS_AS(p.validate(), ArgumentError);
    p = problem_from(Eigen::VectorXd::Ones(5), Eigen::MatrixXd::Ones(4, 2), 3);
    CHECK_THROWS_AS(p.validate(), ArgumentError);
}

TEST_CASE("smoothed incidence") {
    std::vector<double> cum;
    for (int t = 0; t < 20; ++t) cum.push_back(10.0 * t);
    const auto s = smoothed_incidence(PanelSeries::complete("a", Variable::cum_cases, cum), 200000);
    CHECK(s.is_missing(0));
    CHECK(s.is_missing(3));
    CHECK(s.value(4) == doctest::Approx(5.0));
    CHECK(s.value(16) == doctest::Approx(5.0));
    CHECK(s.is_missing(17));

    // values before a break ignore everything from the break on
    auto shifted = cum;
    for (int t = 12; t < 20; ++t) shifted[t] += 400.0 * (t - 11);
    const std::vector<int> breaks{12};
    const auto a = smoothed_incidence(PanelSeries::complete("a", Variable::cum_cases, cum), 200000, breaks);
    const auto b = smoothed_incidence(PanelSeries::complete("a", Variable::cum_cases, shifted), 200000, breaks);
    for (int t = 0; t < 12; ++t) {
        CHECK(a.is_missing(t) == b.is_missing(t));
        if (a.has_value(t)) CHECK(a.value(t) == b.value(t));
    }
    CHECK(a.has_value(11));
    CHECK(b.value(14) > a.value(14));
}

TEST_CASE("staggered fit of a single unit equals the direct fit") {
    std::vector<Commune> communes;
    std::vector<InterventionEntry> entries;
    const DateIndex dates(parse_date("2020-03-01"), 60);
    std::map<std::string, PanelSeries> outcomes;
    std::mt19937_64 rng(37);
    const auto base = random_donors(rng, 60, 6);
    for (int j = 0; j < 6; ++j) {
        const std::string id = "c" + std::to_string(j);
        communes.push_back({id, id, 1000, 0.5, false});
        std::vector<double> v(base.col(j).data(), base.col(j).data() + 60);
        outcomes.emplace(id, PanelSeries::complete(id, Variable::new_cases, v));
    }
    entries.push_back({"c0", dates.date_at(30), std::nullopt, InterventionKind::phase2_transition});
    entries.push_back({"c5", dates.date_at(39), std::nullopt, InterventionKind::phase2_transition});
    StudyRegion region(communes, dates, InterventionSchedule(entries));

    StaggeredConfig config;
    config.pre = 20;
    config.post = 10;
    Warnings w;
    const auto result = staggered_ascm(outcomes, region, {"c0"}, {}, config, w);
    REQUIRE(result.fits.size() == 1);
    const auto problem = event_time_problem(outcomes, region, "c0", region.commune_ids(), config, w);
    REQUIRE(problem);
    // c5 is treated 9 days later, inside the donor lag
    CHECK(problem->donors == std::vector<std::string>{"c1", "c2", "c3", "c4"});
    const auto direct = ascm_fit(*problem, config.lambda);
    CHECK(result.att == doctest::Approx(direct.att).epsilon(1e-12));
    CHECK(result.event_day.front() == -20);
    CHECK(result.event_day.back() == 9);

    config.same_cluster = std::map<std::string, int>{{"c0", 1}, {"c1", 1}, {"c2", 2}, {"c3", 1}, {"c4", 2}};
    const auto clustered = event_time_problem(outcomes, region, "c0", region.commune_ids(), config, w);
    REQUIRE(clustered);
    CHECK(clustered->donors == std::vector<std::string>{"c1", "c3"});

    Warnings excluded;
    CHECK_THROWS_AS(staggered_ascm(outcomes, region, {"c1"}, {}, config, excluded), EstimationError);
    CHECK_FALSE(excluded.empty());
}

TEST_CASE("placebo distribution covers every donor") {
    std::mt19937_64 rng(41);
    const auto y0 = random_donors(rng, 30, 6);
    Eigen::VectorXd y1 = 0.5 * (y0.col(0) + y0.col(3));
    for (int t = 20; t < 30; ++t) y1(t) += 8.0;
    auto problem = problem_from(y1, y0, 20);
    problem.demean = true;
    const auto placebo = placebo_distribution(problem);
    CHECK(placebo.pseudo_att.size() == 6);
    CHECK(placebo.donors == problem.donors);
    CHECK(placebo.rank >= 1);
    CHECK(placebo.rank <= 7);
    CHECK(placebo.true_att == doctest::Approx(ascm_fit(problem).att));
    CHECK_THROWS_AS(placebo_distribution(problem_from(y1, y0.leftCols(2), 20)), ArgumentError);
}

}
