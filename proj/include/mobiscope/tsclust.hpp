#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mobiscope/core.hpp"

namespace mobiscope::tsclust {

enum class StepPattern { symmetric1, symmetric2 };

StepPattern parse_step_pattern(std::string_view name);
std::string_view to_string(StepPattern p);

struct DtwConfig {
    StepPattern step_pattern = StepPattern::symmetric2;
    std::optional<int> window;  // Sakoe-Chiba radius, |i - j| <= window
    bool normalize = false;     // divide by len(x) + len(y); symmetric2 only
    bool znormalize = false;    // z-score each series before alignment (distance_matrix only)
};

/// Minimal cumulative |x_i - y_j| cost over monotone warping paths starting at (0,0)
/// and ending at (n-1,m-1). symmetric1 weights every step 1; symmetric2 weights diagonal
/// steps 2. Throws ArgumentError on empty input and InfeasibleError when the band admits
/// no path.
double dtw_distance(std::span<const double> x, std::span<const double> y, const DtwConfig& cfg = {});

/// Linear interpolation of interior gaps, flat extension at both ends.
std::vector<double> fill_missing(const PanelSeries& series);

struct LabeledSeries {
    std::string unit;
    std::vector<double> values;
};

struct DistanceMatrix {
    std::vector<std::string> labels;
    Eigen::MatrixXd d;

    std::size_t size() const noexcept { return labels.size(); }
};

/// Pairwise DTW distances; `threads` caps the worker count (0 = hardware concurrency).
DistanceMatrix distance_matrix(const std::vector<LabeledSeries>& series, const DtwConfig& cfg = {},
                               unsigned threads = 0);

struct Merge {
    int a = 0;  // smaller cluster id
    int b = 0;
    double height = 0.0;
};

/// Leaves are 0..n-1; the i-th merge creates cluster n + i.
struct Dendrogram {
    int n = 0;
    std::vector<std::string> labels;
    std::vector<Merge> merges;
    std::vector<int> leaf_order;
};

/// Complete-linkage agglomeration. Among equally close pairs the one with the smallest
/// (min id, max id) is merged first.
Dendrogram hcluster(const DistanceMatrix& dm);

struct ClusterSolution {
    int k = 0;
    std::vector<std::string> units;
    std::vector<int> labels;                  // per unit, 1..k
    std::vector<std::string> representatives; // medoid unit per cluster label (index label-1)

    std::vector<std::vector<int>> members() const;
};

/// Undoes the last k-1 merges. Clusters are labelled in order of their smallest unit id;
/// each representative is the medoid (minimum summed distance, ties by unit id).
ClusterSolution cut(const Dendrogram& dendrogram, const DistanceMatrix& dm, int k);

/// Relabels clusters in ascending order of `key` evaluated at each cluster's representative.
ClusterSolution order_clusters(const ClusterSolution& solution, const std::vector<double>& key);

/// Assignment from explicit labels (1..k) with medoid representatives.
ClusterSolution make_solution(const DistanceMatrix& dm, const std::vector<int>& labels);

struct ValidityIndices {
    double sil = 0.0;
    double sf = 0.0;
    double ch = 0.0;
    double db = 0.0;
    double dbstar = 0.0;
    double dunn = 0.0;
    double cop = 0.0;
};

/// Silhouette, Score Function, Calinski-Harabasz, Davies-Bouldin, DB*, Dunn and COP from
/// the distance matrix alone. Centroids are cluster medoids and the global centre is the
/// medoid of all units. Singleton silhouettes are 0. Degenerate denominators yield +inf.
/// Ranges: Sil in [-1, 1], SF in [0, 1), CH >= 0, 0 <= DB <= DBstar, Dunn >= 0, COP >= 0.
/// Larger is better for Sil, SF, CH and Dunn; smaller for DB, DBstar and COP.
ValidityIndices validity_indices(const DistanceMatrix& dm, const ClusterSolution& solution);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

void write_dendrogram(const std::filesystem::path& path, const Dendrogram& dendrogram);
void write_clusters(const std::filesystem::path& path, const ClusterSolution& solution);
void write_cvi(const std::filesystem::path& path, const std::vector<std::pair<int, ValidityIndices>>& rows);

}  // namespace mobiscope::tsclust
