#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <fmt/os.h>

#include "mobiscope/tsclust.hpp"

namespace mobiscope::tsclust {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double ratio(double num, double den) {
    if (den > 0.0) return num / den;
    return num > 0.0 ? inf : (den == 0.0 ? inf : 0.0);
}

int index_of(const std::vector<std::string>& units, const std::string& unit) {
    return static_cast<int>(std::find(units.begin(), units.end(), unit) - units.begin());
}

}  // namespace

ValidityIndices validity_indices(const DistanceMatrix& dm, const ClusterSolution& solution) {
    if (solution.k < 2) throw ArgumentError("validity_indices: k must be at least 2");
    if (solution.units.size() != dm.size()) throw ArgumentError("validity_indices: solution and matrix sizes differ");
    const auto& d = dm.d;
    const int n = static_cast<int>(dm.size());
    const int k = solution.k;
    const auto groups = solution.members();
    for (int c = 0; c < k; ++c) {
        if (groups[c].empty()) throw ArgumentError(fmt::format("validity_indices: cluster {} is empty", c + 1));
    }
    std::vector<int> medoid(k);
    for (int c = 0; c < k; ++c) medoid[c] = index_of(dm.labels, solution.representatives[c]);

    int global = 0;
    double global_sum = inf;
    for (int i = 0; i < n; ++i) {
        const double s = d.row(i).sum();
        if (s < global_sum || (s == global_sum && dm.labels[i] < dm.labels[global])) {
            global = i;
            global_sum = s;
        }
    }

    ValidityIndices v;

    // Silhouette
    double sil_total = 0.0;
    for (int i = 0; i < n; ++i) {
        const int own = solution.labels[i] - 1;
        if (groups[own].size() == 1) continue;
        double a = 0.0;
        for (int j : groups[own]) a += d(i, j);
        a /= static_cast<double>(groups[own].size() - 1);
        double b = inf;
        for (int c = 0; c < k; ++c) {
            if (c == own) continue;
            double m = 0.0;
            for (int j : groups[c]) m += d(i, j);
            b = std::min(b, m / static_cast<double>(groups[c].size()));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) sil_total += (b - a) / denom;
    }
    v.sil = sil_total / n;

    // Per-cluster scatter around the medoid.
    std::vector<double> within_sum(k, 0.0), scatter(k, 0.0), diameter(k, 0.0);
    for (int c = 0; c < k; ++c) {
        for (int i : groups[c]) {
            within_sum[c] += d(i, medoid[c]);
            for (int j : groups[c]) diameter[c] = std::max(diameter[c], d(i, j));
        }
        scatter[c] = within_sum[c] / static_cast<double>(groups[c].size());
    }

    double between = 0.0, total_within = 0.0, wcd = 0.0;
    for (int c = 0; c < k; ++c) {
        between += static_cast<double>(groups[c].size()) * d(medoid[c], global);
        total_within += within_sum[c];
        wcd += scatter[c];
    }
    const double bcd = between / (static_cast<double>(n) * k);
    v.sf = 1.0 - 1.0 / std::exp(std::exp(bcd - wcd));
    v.ch = static_cast<double>(n - k) / (k - 1) * ratio(between, total_within);
    if (n == k) v.ch = total_within == 0.0 ? inf : 0.0;

    double db = 0.0, dbstar = 0.0;
    for (int c = 0; c < k; ++c) {
        double worst = 0.0, max_spread = 0.0, min_sep = inf;
        for (int l = 0; l < k; ++l) {
            if (l == c) continue;
            const double sep = d(medoid[c], medoid[l]);
            worst = std::max(worst, ratio(scatter[c] + scatter[l], sep));
            max_spread = std::max(max_spread, scatter[c] + scatter[l]);
            min_sep = std::min(min_sep, sep);
        }
        db += worst;
        dbstar += ratio(max_spread, min_sep);
    }
    v.db = db / k;
    v.dbstar = dbstar / k;

    double min_between = inf;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (solution.labels[i] != solution.labels[j]) min_between = std::min(min_between, d(i, j));
        }
    }
    const double max_diameter = *std::max_element(diameter.begin(), diameter.end());
    v.dunn = max_diameter > 0.0 ? min_between / max_diameter : inf;

    double cop = 0.0;
    for (int c = 0; c < k; ++c) {
        double inter = inf;
        for (int x = 0; x < n; ++x) {
            if (solution.labels[x] - 1 == c) continue;
            double far = 0.0;
            for (int y : groups[c]) far = std::max(far, d(x, y));
            inter = std::min(inter, far);
        }
        cop += ratio(within_sum[c], inter);
    }
    v.cop = cop / n;
    return v;
}

void write_cvi(const std::filesystem::path& path, const std::vector<std::pair<int, ValidityIndices>>& rows) {
    auto out = fmt::output_file(path.string());
    out.print("k,Sil,SF,CH,DB,DBstar,Dunn,COP\n");
    for (const auto& [k, v] : rows) {
        out.print("{},{:.6g},{:.4f},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g}\n", k, v.sil, v.sf, v.ch, v.db, v.dbstar,
                  v.dunn, v.cop);
    }
}

}  // namespace mobiscope::tsclust
