#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "mobiscope/tsclust.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("mobiscope-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Minimum over every monotone warping path, enumerated explicitly.
inline double brute_force_dtw(const std::vector<double>& x, const std::vector<double>& y, bool symmetric2,
                              int window = -1) {
    const int n = static_cast<int>(x.size());
    const int m = static_cast<int>(y.size());
    double best = std::numeric_limits<double>::infinity();
    std::function<void(int, int, double)> walk = [&](int i, int j, double cost) {
        if (window >= 0 && std::abs(i - j) > window) return;
        if (i == n - 1 && j == m - 1) {
            best = std::min(best, cost);
            return;
        }
        if (i + 1 < n) walk(i + 1, j, cost + std::abs(x[i + 1] - y[j]));
        if (j + 1 < m) walk(i, j + 1, cost + std::abs(x[i] - y[j + 1]));
        if (i + 1 < n && j + 1 < m) {
            walk(i + 1, j + 1, cost + (symmetric2 ? 2.0 : 1.0) * std::abs(x[i + 1] - y[j + 1]));
        }
    };
    walk(0, 0, std::abs(x[0] - y[0]));
    return best;
}

struct NormalEquationsFit {
    Eigen::VectorXd beta, se, t;
    double sigma = 0.0, r_squared = 0.0, adj_r_squared = 0.0, f = 0.0;
};

// Textbook least squares with an intercept in column 0, computed in long double.
inline NormalEquationsFit normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    using Mat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const Mat xl = x.cast<long double>();
    const Vec yl = y.cast<long double>();
    const Mat xtx = xl.transpose() * xl;
    const Mat inv = xtx.inverse();
    const Vec beta = inv * (xl.transpose() * yl);
    const Vec resid = yl - xl * beta;
    const auto n = static_cast<long double>(x.rows());
    const auto p = static_cast<long double>(x.cols());
    const long double rss = resid.squaredNorm();
    const long double mean = yl.mean();
    const long double tss = (yl.array() - mean).square().sum();
    const long double s2 = rss / (n - p);

    NormalEquationsFit out;
    out.beta = beta.cast<double>();
    out.se.resize(x.cols());
    out.t.resize(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        const long double se = std::sqrt(inv(k, k) * s2);
        out.se(k) = static_cast<double>(se);
        out.t(k) = static_cast<double>(beta(k) / se);
    }
    out.sigma = static_cast<double>(std::sqrt(s2));
    out.r_squared = static_cast<double>(1.0L - rss / tss);
    out.adj_r_squared = static_cast<double>(1.0L - (rss / (n - p)) / (tss / (n - 1.0L)));
    out.f = static_cast<double>(((tss - rss) / (p - 1.0L)) / s2);
    return out;
}

inline double direct_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    long double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= a.size();
    mb /= b.size();
    long double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return static_cast<double>(sab / std::sqrt(saa * sbb));
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 0.0) {
    if (a == b) return true;
    return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

// Silhouette, Calinski-Harabasz and Davies-Bouldin written straight from their medoid
// definitions for cross-checking.
struct DirectIndices {
    double sil = 0.0, ch = 0.0, db = 0.0;
};

inline DirectIndices direct_indices(const Eigen::MatrixXd& d, const std::vector<int>& labels) {
    const int n = static_cast<int>(labels.size());
    const int k = *std::max_element(labels.begin(), labels.end());
    auto members = [&](int c) {
        std::vector<int> out;
        for (int i = 0; i < n; ++i) {
            if (labels[i] == c) out.push_back(i);
        }
        return out;
    };
    auto medoid_of = [&](const std::vector<int>& g) {
        int best = g.front();
        double best_sum = std::numeric_limits<double>::infinity();
        for (int i : g) {
            double s = 0;
            for (int j : g) s += d(i, j);
            if (s < best_sum) {
                best_sum = s;
                best = i;
            }
        }
        return best;
    };
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    const int centre = medoid_of(all);

    DirectIndices out;
    for (int i = 0; i < n; ++i) {
        const auto own = members(labels[i]);
        if (own.size() == 1) continue;
        double a = 0;
        for (int j : own) a += d(i, j);
        a /= own.size() - 1;
        double b = std::numeric_limits<double>::infinity();
        for (int c = 1; c <= k; ++c) {
            if (c == labels[i]) continue;
            const auto g = members(c);
            double s = 0;
            for (int j : g) s += d(i, j);
            b = std::min(b, s / g.size());
        }
        out.sil += (b - a) / std::max(a, b);
    }
    out.sil /= n;

    double between = 0, within = 0;
    std::vector<int> med(k + 1);
    std::vector<double> scatter(k + 1);
    for (int c = 1; c <= k; ++c) {
        const auto g = members(c);
        med[c] = medoid_of(g);
        between += g.size() * d(med[c], centre);
        double w = 0;
        for (int i : g) w += d(i, med[c]);
        within += w;
        scatter[c] = w / g.size();
    }
    out.ch = (static_cast<double>(n - k) / (k - 1)) * between / within;
    for (int c = 1; c <= k; ++c) {
        double worst = 0;
        for (int l = 1; l <= k; ++l) {
            if (l != c) worst = std::max(worst, (scatter[c] + scatter[l]) / d(med[c], med[l]));
        }
        out.db += worst;
    }
    out.db /= k;
    return out;
}

}  // namespace testing
