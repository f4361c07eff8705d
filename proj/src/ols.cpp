#include <cmath>
#include <limits>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "mobiscope/inference.hpp"

namespace mobiscope::inference {

namespace {

double two_sided_t(double t, int df) {
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

bool is_intercept(const Eigen::VectorXd& col) {
    return col.size() > 0 && (col.array() == 1.0).all();
}

}  // namespace

std::pair<double, double> FitReport::confidence_interval(std::size_t term, double level) const {
    if (term >= estimate.size()) throw ArgumentError(fmt::format("no coefficient at index {}", term));
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must lie in (0, 1)");
    boost::math::students_t dist(df_residual);
    const double q = boost::math::quantile(dist, 1.0 - (1.0 - level) / 2.0);
    return {estimate[term] - q * std_error[term], estimate[term] + q * std_error[term]};
}

FitReport ols_fit(const DesignMatrix& design) {
    const auto& x = design.x;
    const auto& y = design.y;
    const auto n = x.rows();
    const auto p = x.cols();
    if (y.size() != n) throw ArgumentError("ols_fit: response length differs from design rows");
    if (static_cast<Eigen::Index>(design.columns.size()) != p) {
        throw ArgumentError("ols_fit: column names do not match the design");
    }
    if (n <= p) {
        throw ArgumentError(fmt::format("ols_fit: {} observations cannot identify {} coefficients", n, p));
    }
    if (!x.allFinite() || !y.allFinite()) throw ArgumentError("ols_fit: design or response not finite");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) {
        std::vector<std::string> dependent;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k) dependent.push_back(design.columns[static_cast<std::size_t>(perm(k))]);
        throw SingularDesignError(fmt::format("design is rank deficient (rank {} of {}); dependent columns: {}",
                                              qr.rank(), p, fmt::join(dependent, ", ")));
    }

    const Eigen::VectorXd beta = qr.solve(y);
    FitReport fit;
    fit.terms = design.columns;
    fit.n = static_cast<int>(n);
    fit.n_dropped = static_cast<int>(design.dropped.size());
    fit.fitted = x * beta;
    fit.residuals = y - fit.fitted;
    fit.df_residual = static_cast<int>(n - p);

    const double rss = fit.residuals.squaredNorm();
    const double sigma2 = rss / fit.df_residual;
    fit.sigma = std::sqrt(sigma2);

    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd perm_inv = r_inv * r_inv.transpose();
    const auto& perm = qr.colsPermutation();
    const Eigen::MatrixXd xtx_inv = perm * perm_inv * perm.transpose();

    for (Eigen::Index j = 0; j < p; ++j) {
        const double se = std::sqrt(sigma2 * xtx_inv(j, j));
        const double t = beta(j) / se;
        fit.estimate.push_back(beta(j));
        fit.std_error.push_back(se);
        fit.t_value.push_back(t);
        fit.p_value.push_back(two_sided_t(t, fit.df_residual));
    }

    const bool intercept = is_intercept(x.col(0));
    const double tss = intercept ? (y.array() - y.mean()).square().sum() : y.squaredNorm();
    const int k0 = intercept ? 1 : 0;
    fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;
    fit.adj_r_squared = 1.0 - (1.0 - fit.r_squared) * static_cast<double>(n - k0) / fit.df_residual;
    fit.f_df1 = static_cast<int>(p) - k0;
    fit.f_df2 = fit.df_residual;
    if (fit.f_df1 > 0) {
        fit.f_statistic = ((tss - rss) / fit.f_df1) / sigma2;
        if (std::isinf(fit.f_statistic) || rss == 0.0) {
            fit.f_statistic = std::numeric_limits<double>::infinity();
            fit.f_p_value = 0.0;
        } else {
            boost::math::fisher_f dist(fit.f_df1, fit.f_df2);
            fit.f_p_value = boost::math::cdf(boost::math::complement(dist, std::max(0.0, fit.f_statistic)));
        }
    } else {
        fit.f_statistic = std::numeric_limits<double>::quiet_NaN();
        fit.f_p_value = std::numeric_limits<double>::quiet_NaN();
    }
    return fit;
}

}  // namespace mobiscope::inference
