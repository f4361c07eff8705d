#include <doctest.h>

#include <random>

#include "mobiscope/tsclust.hpp"
#include "support.hpp"

using namespace mobiscope;
using namespace mobiscope::tsclust;

namespace {

DistanceMatrix matrix_from(std::vector<std::string> labels, const std::vector<std::vector<double>>& rows) {
    DistanceMatrix dm;
    dm.labels = std::move(labels);
    const auto n = static_cast<Eigen::Index>(rows.size());
    dm.d.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) dm.d(i, j) = rows[i][j];
    }
    return dm;
}

// Points on a line; distance is the absolute difference.
DistanceMatrix line_matrix(const std::vector<double>& xs) {
    DistanceMatrix dm;
    const auto n = static_cast<Eigen::Index>(xs.size());
    dm.d.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dm.labels.push_back("u" + std::to_string(10 + i));
        for (Eigen::Index j = 0; j < n; ++j) dm.d(i, j) = std::abs(xs[i] - xs[j]);
    }
    return dm;
}

}  // namespace

TEST_SUITE("dtw") {

TEST_CASE("hand computed distances") {
    const std::vector<double> x{0, 1, 2}, y{0, 2};
    DtwConfig s1{StepPattern::symmetric1};
    DtwConfig s2{StepPattern::symmetric2};
    CHECK(dtw_distance(x, y, s1) == doctest::Approx(1.0));
    CHECK(dtw_distance(x, y, s2) == doctest::Approx(1.0));
    CHECK(dtw_distance(x, x, s2) == 0.0);

    const std::vector<double> a{1, 3, 4, 9}, b{1, 3, 7, 8, 9};
    CHECK(dtw_distance(a, b, s1) == doctest::Approx(testing::brute_force_dtw(a, b, false)));
    CHECK(dtw_distance(a, b, s2) == doctest::Approx(testing::brute_force_dtw(a, b, true)));
}

TEST_CASE("matches brute force on random pairs") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(1, 7);
    std::normal_distribution<double> val(0.0, 3.0);
    for (int rep = 0; rep < 60; ++rep) {
        std::vector<double> x(len(rng)), y(len(rng));
        for (auto& v : x) v = val(rng);
        for (auto& v : y) v = val(rng);
        for (bool sym2 : {false, true}) {
            DtwConfig cfg{sym2 ? StepPattern::symmetric2 : StepPattern::symmetric1};
            CHECK(testing::close_rel(dtw_distance(x, y, cfg), testing::brute_force_dtw(x, y, sym2), 1e-12));
            const int w = 2;
            cfg.window = w;
            const int gap = std::abs(static_cast<int>(x.size()) - static_cast<int>(y.size()));
            if (gap > w) {
                CHECK_THROWS_AS(dtw_distance(x, y, cfg), InfeasibleError);
            } else {
                CHECK(testing::close_rel(dtw_distance(x, y, cfg), testing::brute_force_dtw(x, y, sym2, w), 1e-12));
            }
        }
    }
}

TEST_CASE("symmetry and normalisation") {
    const std::vector<double> x{3, 1, 4, 1, 5}, y{9, 2, 6};
    DtwConfig cfg;
    CHECK(dtw_distance(x, y, cfg) == dtw_distance(y, x, cfg));
    DtwConfig norm;
    norm.normalize = true;
    CHECK(dtw_distance(x, y, norm) == doctest::Approx(dtw_distance(x, y, cfg) / 8.0));
    DtwConfig bad{StepPattern::symmetric1};
    bad.normalize = true;
    CHECK_THROWS_AS(dtw_distance(x, y, bad), ArgumentError);
}

TEST_CASE("argument errors") {
    const std::vector<double> x{1, 2}, empty;
    CHECK_THROWS_AS(dtw_distance(x, empty), ArgumentError);
    DtwConfig cfg;
    cfg.window = 0;
    CHECK_THROWS_AS(dtw_distance(x, x, cfg), ArgumentError);
    CHECK_THROWS_AS(parse_step_pattern("asymmetric"), ArgumentError);
    CHECK(parse_step_pattern(to_string(StepPattern::symmetric1)) == StepPattern::symmetric1);
}

TEST_CASE("gap filling") {
    PanelSeries s("a", Variable::score, {0, 2, 0, 0, 8, 0}, {true, false, true, true, false, true});
    CHECK(fill_missing(s) == std::vector<double>{2, 2, 4, 6, 8, 8});
    CHECK_THROWS_AS(fill_missing(PanelSeries::all_missing("a", Variable::score, 3)), ArgumentError);
}

TEST_CASE("distance matrix is symmetric with zero diagonal") {
    std::vector<LabeledSeries> series{{"a", {1, 2, 3}}, {"b", {1, 1, 2, 3}}, {"c", {5, 5}}};
    for (unsigned threads : {1u, 3u}) {
        const auto dm = distance_matrix(series, {}, threads);
        CHECK(dm.labels == std::vector<std::string>{"a", "b", "c"});
        CHECK(dm.d.diagonal().isZero());
        CHECK(dm.d.isApprox(dm.d.transpose()));
        CHECK(dm.d(0, 1) == doctest::Approx(0.0));
        CHECK(dm.d(0, 2) == doctest::Approx(dtw_distance(series[0].values, series[2].values)));
    }
    CHECK_THROWS_AS(distance_matrix({series[0]}), ArgumentError);
}

}

TEST_SUITE("hcluster") {

TEST_CASE("complete linkage merges and heights") {
    const auto dm = line_matrix({0, 1, 5, 6, 20});
    const auto tree = hcluster(dm);
    REQUIRE(tree.merges.size() == 4);
    CHECK(tree.merges[0].a == 0);
    CHECK(tree.merges[0].b == 1);
    CHECK(tree.merges[0].height == 1.0);
    CHECK(tree.merges[1].a == 2);
    CHECK(tree.merges[1].b == 3);
    CHECK(tree.merges[2].a == 5);
    CHECK(tree.merges[2].b == 6);
    CHECK(tree.merges[2].height == 6.0);  // farthest pair, not nearest
    CHECK(tree.merges[3].height == 20.0);
    for (std::size_t i = 1; i < tree.merges.size(); ++i) CHECK(tree.merges[i].height >= tree.merges[i - 1].height);
    CHECK(tree.leaf_order.size() == 5);
}

TEST_CASE("ties merge the smallest pair first") {
    const auto dm = matrix_from({"a", "b", "c", "d"},
                                {{0, 1, 3, 3}, {1, 0, 3, 3}, {3, 3, 0, 1}, {3, 3, 1, 0}});
    const auto tree = hcluster(dm);
    CHECK(tree.merges[0].a == 0);
    CHECK(tree.merges[0].b == 1);
    CHECK(tree.merges[1].a == 2);
    CHECK(tree.merges[1].b == 3);
}

TEST_CASE("cut labels and medoids") {
    const auto dm = line_matrix({0, 1, 2, 10, 11, 30});
    const auto tree = hcluster(dm);
    const auto sol = cut(tree, dm, 3);
    CHECK(sol.k == 3);
    CHECK(sol.labels == std::vector<int>{1, 1, 1, 2, 2, 3});
    CHECK(sol.representatives == std::vector<std::string>{"u11", "u13", "u15"});

    CHECK(cut(tree, dm, 1).labels == std::vector<int>(6, 1));
    CHECK(cut(tree, dm, 6).labels == std::vector<int>{1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(cut(tree, dm, 7), ArgumentError);
    CHECK_THROWS_AS(cut(tree, dm, 0), ArgumentError);

    const auto ordered = order_clusters(sol, {9, 9, 9, 1, 1, 5});
    CHECK(ordered.labels == std::vector<int>{3, 3, 3, 1, 1, 2});
    CHECK(ordered.representatives == std::vector<std::string>{"u13", "u15", "u11"});
}

TEST_CASE("bad matrices are rejected") {
    auto dm = line_matrix({0, 1, 2});
    dm.d(0, 1) = 5;
    CHECK_THROWS_AS(hcluster(dm), ArgumentError);
    auto neg = line_matrix({0, 1});
    neg.d(0, 1) = neg.d(1, 0) = -1;
    CHECK_THROWS_AS(hcluster(neg), ArgumentError);
}

TEST_CASE("adjusted rand index") {
    CHECK(adjusted_rand_index({1, 1, 2, 2}, {2, 2, 1, 1}) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index({1, 1, 1, 2, 2, 2}, {1, 1, 2, 2, 3, 3}) < 1.0);
    // contingency {{1,1},{1,1}} gives an index of -0.5
    CHECK(adjusted_rand_index({1, 1, 2, 2}, {1, 2, 1, 2}) == doctest::Approx(-0.5));
    CHECK_THROWS_AS(adjusted_rand_index({1, 2}, {1}), ArgumentError);
}

}

TEST_SUITE("cvi") {

TEST_CASE("indices agree with direct definitions") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coord(0.0, 10.0);
    for (int rep = 0; rep < 25; ++rep) {
        const int n = 12;
        std::vector<std::pair<double, double>> pts(n);
        for (auto& p : pts) p = {coord(rng), coord(rng)};
        DistanceMatrix dm;
        dm.d.resize(n, n);
        for (int i = 0; i < n; ++i) {
            dm.labels.push_back("c" + std::to_string(100 + i));
            for (int j = 0; j < n; ++j) dm.d(i, j) = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
        }
        const int k = 2 + rep % 3;
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) labels[i] = 1 + i % k;
        const auto sol = make_solution(dm, labels);
        const auto v = validity_indices(dm, sol);
        const auto direct = testing::direct_indices(dm.d, labels);
        CHECK(v.sil == doctest::Approx(direct.sil).epsilon(1e-10));
        CHECK(v.ch == doctest::Approx(direct.ch).epsilon(1e-10));
        CHECK(v.db == doctest::Approx(direct.db).epsilon(1e-10));

        CHECK(v.sil >= -1.0);
        CHECK(v.sil <= 1.0);
        CHECK(v.sf >= 0.0);
        CHECK(v.sf < 1.0);
        CHECK(v.ch >= 0.0);
        CHECK(v.db >= 0.0);
        CHECK(v.db <= v.dbstar + 1e-12);
        CHECK(v.dunn >= 0.0);
        CHECK(v.cop >= 0.0);
    }
}

TEST_CASE("separated blobs score well") {
    const auto dm = line_matrix({0, 0.1, 0.2, 50, 50.1, 50.2});
    const auto good = make_solution(dm, {1, 1, 1, 2, 2, 2});
    const auto bad = make_solution(dm, {1, 2, 1, 2, 1, 2});
    const auto vg = validity_indices(dm, good);
    const auto vb = validity_indices(dm, bad);
    CHECK(vg.sil > 0.9);
    CHECK(vg.sil > vb.sil);
    CHECK(vg.ch > vb.ch);
    CHECK(vg.db < vb.db);
    CHECK(vg.dunn > vb.dunn);
    CHECK(vg.cop < vb.cop);
}

TEST_CASE("singletons and argument checks") {
    const auto dm = line_matrix({0, 1, 5});
    const auto sol = make_solution(dm, {1, 1, 2});
    CHECK(validity_indices(dm, sol).sil == doctest::Approx((1.0 - 1.0 / 5.0 + 1.0 - 1.0 / 4.0) / 3.0));
    CHECK_THROWS_AS(make_solution(dm, {1, 1, 3}), ArgumentError);
    CHECK_THROWS_AS(validity_indices(dm, make_solution(dm, {1, 1, 1})), ArgumentError);
}

}
