#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include <fmt/format.h>
#include <fmt/os.h>

#include "mobiscope/tsclust.hpp"

namespace mobiscope::tsclust {

namespace {

void validate_matrix(const DistanceMatrix& dm) {
    const auto n = static_cast<Eigen::Index>(dm.size());
    if (dm.d.rows() != n || dm.d.cols() != n) {
        throw ArgumentError(fmt::format("distance matrix is {}x{} for {} labels", dm.d.rows(), dm.d.cols(), n));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = dm.d(i, j);
            if (!std::isfinite(v) || v < 0.0) {
                throw ArgumentError(fmt::format("distance ({}, {}) = {} is negative or not finite",
                                                dm.labels[i], dm.labels[j], v));
            }
            const double w = dm.d(j, i);
            if (std::abs(v - w) > 1e-12 * std::max(1.0, std::abs(v))) {
                throw ArgumentError(fmt::format("distance matrix not symmetric at ({}, {})", dm.labels[i],
                                                dm.labels[j]));
            }
        }
    }
}

std::vector<std::string> medoids(const DistanceMatrix& dm, const std::vector<std::vector<int>>& groups) {
    std::vector<std::string> reps;
    for (const auto& g : groups) {
        int best = -1;
        double best_sum = std::numeric_limits<double>::infinity();
        for (int i : g) {
            double s = 0.0;
            for (int j : g) s += dm.d(i, j);
            if (s < best_sum || (s == best_sum && dm.labels[i] < dm.labels[best])) {
                best = i;
                best_sum = s;
            }
        }
        reps.push_back(dm.labels[best]);
    }
    return reps;
}

}  // namespace

Dendrogram hcluster(const DistanceMatrix& dm) {
    validate_matrix(dm);
    const int n = static_cast<int>(dm.size());
    if (n < 2) throw ArgumentError("hcluster: need at least two units");

    Dendrogram out;
    out.n = n;
    out.labels = dm.labels;

    // Cluster-to-cluster distances keyed by cluster id.
    std::map<int, std::map<int, double>> dist;
    std::vector<int> active(n);
    std::iota(active.begin(), active.end(), 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j) dist[i][j] = dm.d(i, j);
        }
    }

    for (int step = 0; step < n - 1; ++step) {
        int best_a = -1, best_b = -1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t x = 0; x < active.size(); ++x) {
            for (std::size_t y = x + 1; y < active.size(); ++y) {
                const int a = active[x];
                const int b = active[y];
                const double v = dist[a][b];
                if (v < best || (v == best && std::pair(a, b) < std::pair(best_a, best_b))) {
                    best = v;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        const int merged = n + step;
        out.merges.push_back({best_a, best_b, best});
        std::erase(active, best_a);
        std::erase(active, best_b);
        for (int c : active) {
            const double v = std::max(dist[best_a][c], dist[best_b][c]);
            dist[merged][c] = v;
            dist[c][merged] = v;
        }
        active.push_back(merged);
        dist.erase(best_a);
        dist.erase(best_b);
    }

    std::function<void(int)> walk = [&](int id) {
        if (id < n) {
            out.leaf_order.push_back(id);
            return;
        }
        const auto& m = out.merges[static_cast<std::size_t>(id - n)];
        walk(m.a);
        walk(m.b);
    };
    walk(2 * n - 2);
    return out;
}

std::vector<std::vector<int>> ClusterSolution::members() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i] - 1)].push_back(static_cast<int>(i));
    return out;
}

ClusterSolution make_solution(const DistanceMatrix& dm, const std::vector<int>& labels) {
    if (labels.size() != dm.size()) {
        throw ArgumentError(fmt::format("{} labels for {} units", labels.size(), dm.size()));
    }
    ClusterSolution sol;
    sol.units = dm.labels;
    sol.labels = labels;
    sol.k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    if (sol.k < 1 || *std::min_element(labels.begin(), labels.end()) < 1) {
        throw ArgumentError("cluster labels must be in 1..k");
    }
    const auto groups = sol.members();
    for (std::size_t c = 0; c < groups.size(); ++c) {
        if (groups[c].empty()) throw ArgumentError(fmt::format("cluster {} is empty", c + 1));
    }
    sol.representatives = medoids(dm, groups);
    return sol;
}

ClusterSolution cut(const Dendrogram& dendrogram, const DistanceMatrix& dm, int k) {
    const int n = dendrogram.n;
    if (static_cast<int>(dm.size()) != n) throw ArgumentError("cut: dendrogram and matrix sizes differ");
    if (k < 1 || k > n) throw ArgumentError(fmt::format("cut: k = {} outside [1, {}]", k, n));

    std::vector<int> parent(static_cast<std::size_t>(2 * n - 1));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (int step = 0; step < n - k; ++step) {
        const auto& m = dendrogram.merges[static_cast<std::size_t>(step)];
        parent[find(m.a)] = n + step;
        parent[find(m.b)] = n + step;
    }

    // Label clusters in order of their smallest unit id.
    std::map<int, std::string> first_unit;
    for (int i = 0; i < n; ++i) {
        const int root = find(i);
        auto it = first_unit.find(root);
        if (it == first_unit.end() || dm.labels[i] < it->second) first_unit[root] = dm.labels[i];
    }
    std::vector<std::pair<std::string, int>> order;
    for (const auto& [root, unit] : first_unit) order.emplace_back(unit, root);
    std::sort(order.begin(), order.end());
    std::map<int, int> label_of;
    for (std::size_t c = 0; c < order.size(); ++c) label_of[order[c].second] = static_cast<int>(c) + 1;

    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[i] = label_of[find(i)];
    return make_solution(dm, labels);
}

ClusterSolution order_clusters(const ClusterSolution& solution, const std::vector<double>& key) {
    if (key.size() != solution.units.size()) {
        throw ArgumentError(fmt::format("order_clusters: {} keys for {} units", key.size(), solution.units.size()));
    }
    std::vector<std::tuple<double, int>> ranked;
    for (int c = 0; c < solution.k; ++c) {
        const auto& rep = solution.representatives[static_cast<std::size_t>(c)];
        const auto pos = std::find(solution.units.begin(), solution.units.end(), rep) - solution.units.begin();
        ranked.emplace_back(key[static_cast<std::size_t>(pos)], c + 1);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<int> relabel(static_cast<std::size_t>(solution.k) + 1);
    ClusterSolution out = solution;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        const int old = std::get<1>(ranked[r]);
        relabel[static_cast<std::size_t>(old)] = static_cast<int>(r) + 1;
        out.representatives[r] = solution.representatives[static_cast<std::size_t>(old - 1)];
    }
    for (auto& l : out.labels) l = relabel[static_cast<std::size_t>(l)];
    return out;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ArgumentError("adjusted_rand_index: label vectors differ in length");
    if (a.size() < 2) throw ArgumentError("adjusted_rand_index: need at least two items");
    std::map<std::pair<int, int>, long> table;
    std::map<int, long> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++table[{a[i], b[i]}];
        ++rows[a[i]];
        ++cols[b[i]];
    }
    auto choose2 = [](long x) { return static_cast<double>(x) * static_cast<double>(x - 1) / 2.0; };
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, c] : table) index += choose2(c);
    for (const auto& [key, c] : rows) sum_rows += choose2(c);
    for (const auto& [key, c] : cols) sum_cols += choose2(c);
    const double total = choose2(static_cast<long>(a.size()));
    const double expected = sum_rows * sum_cols / total;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

void write_dendrogram(const std::filesystem::path& path, const Dendrogram& dendrogram) {
    auto out = fmt::output_file(path.string());
    out.print("merge,a,b,height\n");
    for (std::size_t i = 0; i < dendrogram.merges.size(); ++i) {
        const auto& m = dendrogram.merges[i];
        out.print("{},{},{},{}\n", i + 1, m.a, m.b, m.height);
    }
}

void write_clusters(const std::filesystem::path& path, const ClusterSolution& solution) {
    auto out = fmt::output_file(path.string());
    out.print("unit,label\n");
    for (std::size_t i = 0; i < solution.units.size(); ++i) {
        out.print("{},{}\n", solution.units[i], solution.labels[i]);
    }
}

}  // namespace mobiscope::tsclust
