#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "mobiscope/synthctl.hpp"

namespace mobiscope::synthctl {

namespace {

double largest_eigenvalue(const Eigen::MatrixXd& gram) {
    if (gram.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff());
}

/// min ||x1 - A v||^2 subject to sum(v) = 1, minimum-norm solution of the KKT system.
Eigen::VectorXd solve_equality_qp(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                                  const std::vector<int>& free) {
    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd b(m + 1);
    double scale = 1.0;
    for (Eigen::Index a = 0; a < m; ++a) scale = std::max(scale, gram(free[a], free[a]));
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index c = 0; c < m; ++c) kkt(a, c) = gram(free[a], free[c]);
        kkt(a, m) = scale;
        kkt(m, a) = scale;
        b(a) = rhs(free[a]);
    }
    b(m) = scale;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
    return cod.solve(b).head(m);
}

}  // namespace

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    const auto n = v.size();
    if (n == 0) throw ArgumentError("project_to_simplex: empty vector");
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0, theta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumulative += u[static_cast<std::size_t>(j)];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
    }
    return (v.array() - theta).max(0.0).matrix();
}

double kkt_residual(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0, const Eigen::VectorXd& w) {
    const Eigen::MatrixXd gram = x0.transpose() * x0;
    const double lipschitz = 2.0 * largest_eigenvalue(gram);
    const Eigen::VectorXd grad = 2.0 * x0.transpose() * (x0 * w - x1);
    if (lipschitz <= 0.0) return (w - project_to_simplex(w)).cwiseAbs().maxCoeff();
    return (w - project_to_simplex(w - grad / lipschitz)).cwiseAbs().maxCoeff();
}

Eigen::VectorXd scm_weights(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0, const ScmOptions& options) {
    const auto j_count = x0.cols();
    if (j_count == 0) throw ArgumentError("scm_weights: no donors");
    if (x0.rows() != x1.size()) {
        throw ArgumentError(fmt::format("scm_weights: treated has {} periods, donors {}", x1.size(), x0.rows()));
    }
    if (x1.size() == 0) throw ArgumentError("scm_weights: empty pre-period");
    if (!x0.allFinite() || !x1.allFinite()) throw ArgumentError("scm_weights: non-finite outcome data");

    const Eigen::MatrixXd gram = x0.transpose() * x0;
    const Eigen::VectorXd rhs = x0.transpose() * x1;
    const double lmax = largest_eigenvalue(gram);
    const double add_tol = 1e-13 * std::max(1.0, lmax);

    Eigen::VectorXd w = Eigen::VectorXd::Constant(j_count, 1.0 / static_cast<double>(j_count));
    std::vector<int> free(static_cast<std::size_t>(j_count));
    std::iota(free.begin(), free.end(), 0);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const Eigen::VectorXd v = solve_equality_qp(gram, rhs, free);
        double alpha = 1.0;
        int blocking = -1;
        for (std::size_t a = 0; a < free.size(); ++a) {
            const double wj = w(free[a]);
            const double vj = v(static_cast<Eigen::Index>(a));
            if (vj < 0.0 && wj - vj > 0.0) {
                const double step = wj / (wj - vj);
                if (step < alpha) {
                    alpha = step;
                    blocking = free[a];
                }
            }
        }
        for (std::size_t a = 0; a < free.size(); ++a) {
            w(free[a]) += alpha * (v(static_cast<Eigen::Index>(a)) - w(free[a]));
        }
        if (blocking >= 0) {
            // Drop every coordinate that reached the boundary.
            std::vector<int> keep;
            for (int j : free) {
                if (j == blocking || w(j) <= 0.0) {
                    w(j) = 0.0;
                } else {
                    keep.push_back(j);
                }
            }
            free = std::move(keep);
            w /= w.sum();
            continue;
        }

        const Eigen::VectorXd grad = gram * w - rhs;
        double mu = 0.0;
        for (int j : free) mu -= grad(j);
        mu /= static_cast<double>(free.size());
        int entering = -1;
        double most_negative = -add_tol;
        for (Eigen::Index j = 0; j < j_count; ++j) {
            if (std::find(free.begin(), free.end(), static_cast<int>(j)) != free.end()) continue;
            const double reduced = grad(j) + mu;
            if (reduced < most_negative) {
                most_negative = reduced;
                entering = static_cast<int>(j);
            }
        }
        if (entering < 0) {
            const double residual = kkt_residual(x1, x0, w);
            if (residual <= options.tolerance) return w;
            throw ConvergenceError("scm_weights: active set terminated away from the optimum", residual);
        }
        free.push_back(entering);
        std::sort(free.begin(), free.end());
    }
    throw ConvergenceError(fmt::format("scm_weights: no convergence in {} iterations", options.max_iterations),
                           kkt_residual(x1, x0, w));
}

}  // namespace mobiscope::synthctl
