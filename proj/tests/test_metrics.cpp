#include <doctest.h>

#include <cmath>
#include <random>

#include "flowembed/metrics.hpp"
#include "oracles.hpp"

using namespace flowembed;

TEST_CASE("silhouette hand cases") {
    SUBCASE("two tight far-apart clusters score near 1") {
        std::vector<std::vector<double>> pts = {{0.0}, {0.1}, {10.0}, {10.1}};
        std::vector<int> labels = {0, 0, 1, 1};
        double got = silhouette(pts, labels);
        CHECK(got == doctest::Approx(oracle::brute_silhouette(pts, labels)).epsilon(1e-12));
        CHECK(got == doctest::Approx(0.99).epsilon(0.001));
    }
    SUBCASE("interleaved identical point sets score near 0") {
        // Both clusters occupy the same positions; the score is exactly
        // -1/n_per_cluster, approaching 0 as the sets grow.
        std::vector<std::vector<double>> pts;
        std::vector<int> labels;
        for (int i = 0; i < 50; ++i) {
            pts.push_back({double(i)});
            labels.push_back(0);
            pts.push_back({double(i)});
            labels.push_back(1);
        }
        double got = silhouette(pts, labels);
        CHECK(std::fabs(got) < 0.05);
        CHECK(got == doctest::Approx(oracle::brute_silhouette(pts, labels)).epsilon(1e-12));
    }
    SUBCASE("singleton clusters contribute zero") {
        std::vector<std::vector<double>> pts = {{0.0}, {0.2}, {50.0}};
        std::vector<int> labels = {0, 0, 7};
        double with = silhouette(pts, labels);
        // the singleton adds 0 to the sum but counts in the mean
        std::vector<std::vector<double>> pair = {{0.0}, {0.2}};
        (void)pair;
        CHECK(with == doctest::Approx(oracle::brute_silhouette(pts, labels)));
    }
    SUBCASE("single cluster is undefined") {
        CHECK_THROWS_AS(silhouette({{0.0}, {1.0}}, {3, 3}), MetricError);
    }
    SUBCASE("translation and positive scaling invariance") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> coord(-2, 2);
        std::vector<std::vector<double>> pts(30, std::vector<double>(3));
        std::vector<int> labels(30);
        for (size_t i = 0; i < 30; ++i) {
            for (double& x : pts[i]) x = coord(rng);
            labels[i] = int(i % 3);
        }
        double base = silhouette(pts, labels);
        std::vector<std::vector<double>> moved = pts;
        for (auto& p : moved)
            for (size_t c = 0; c < 3; ++c) p[c] = 4.0 * p[c] + 17.0;
        CHECK(silhouette(moved, labels) == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("completeness and homogeneity") {
    SUBCASE("perfect prediction scores 1/1") {
        std::vector<int> truth = {0, 0, 1, 1, 2};
        CHECK(homogeneity(truth, truth) == 1.0);
        CHECK(completeness(truth, truth) == 1.0);
    }
    SUBCASE("one predicted cluster: completeness 1, homogeneity 0") {
        std::vector<int> truth = {0, 0, 1, 1};
        std::vector<int> pred = {5, 5, 5, 5};
        CHECK(completeness(truth, pred) == 1.0);
        CHECK(homogeneity(truth, pred) == doctest::Approx(0.0));
    }
    SUBCASE("four-point case matches direct entropy computation") {
        std::vector<int> truth = {0, 0, 1, 1};
        std::vector<int> pred = {0, 1, 1, 1};
        CHECK(homogeneity(truth, pred) ==
              doctest::Approx(oracle::brute_homogeneity(truth, pred)).epsilon(1e-12));
        CHECK(completeness(truth, pred) ==
              doctest::Approx(oracle::brute_completeness(truth, pred)).epsilon(1e-12));
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(homogeneity({0, 1}, {0}), MetricError);
    }
}

TEST_CASE("rand index") {
    CHECK(rand_index({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
    CHECK(rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == 1.0);  // relabeling invariant
    CHECK(rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(2.0 / 6.0));
    CHECK_THROWS_AS(rand_index({0, 1}, {0}), MetricError);

    SUBCASE("adjusted variant is 1 for identical labelings, ~0 for random") {
        CHECK(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
        std::mt19937_64 rng(12);
        double total = 0;
        for (int t = 0; t < 30; ++t) {
            std::vector<int> a(60), b(60);
            for (auto& v : a) v = int(rng() % 3);
            for (auto& v : b) v = int(rng() % 3);
            total += adjusted_rand_index(a, b);
        }
        CHECK(std::fabs(total / 30.0) < 0.05);
    }
}

TEST_CASE("label permutation invariance of partition metrics") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 10; ++t) {
        std::vector<int> truth(40), pred(40);
        for (auto& v : truth) v = int(rng() % 4);
        for (auto& v : pred) v = int(rng() % 4);
        // permute predicted ids: 0..3 -> 3,0,2,1
        const int perm[4] = {3, 0, 2, 1};
        std::vector<int> pred_perm(40);
        for (size_t i = 0; i < 40; ++i) pred_perm[i] = perm[pred[i]];
        CHECK(rand_index(truth, pred) == doctest::Approx(rand_index(truth, pred_perm)));
        CHECK(homogeneity(truth, pred) ==
              doctest::Approx(homogeneity(truth, pred_perm)));
        CHECK(completeness(truth, pred) ==
              doctest::Approx(completeness(truth, pred_perm)));
    }
}

TEST_CASE("precision, recall and PR curve") {
    SUBCASE("perfectly separating scores give AP 1") {
        std::vector<uint8_t> truth = {1, 1, 0, 0};
        std::vector<double> scores = {0.9, 0.8, 0.2, 0.1};
        CHECK(pr_auc(truth, scores) == doctest::Approx(1.0));
    }
    SUBCASE("constant scores give AP = positive fraction") {
        std::vector<uint8_t> truth = {1, 0, 0, 1, 0, 0, 0, 0};
        std::vector<double> scores(8, 0.5);
        CHECK(pr_auc(truth, scores) == doctest::Approx(2.0 / 8.0));
    }
    SUBCASE("threshold above all scores recalls nothing") {
        std::vector<uint8_t> truth = {1, 0};
        std::vector<double> scores = {0.3, 0.2};
        auto [p, r] = precision_recall(truth, scores, 0.9);
        CHECK(r == 0.0);
        CHECK(p == 1.0);  // vacuous precision over zero predictions
    }
    SUBCASE("no positives is undefined") {
        CHECK_THROWS_AS(pr_auc({0, 0}, {0.1, 0.2}), MetricError);
        CHECK_THROWS_AS(precision_recall({0, 0}, {0.1, 0.2}, 0.5), MetricError);
    }
    SUBCASE("curve thresholds descend with non-decreasing recall") {
        std::mt19937_64 rng(9);
        std::vector<uint8_t> truth(50);
        std::vector<double> scores(50);
        for (size_t i = 0; i < 50; ++i) {
            truth[i] = rng() % 3 == 0;
            scores[i] = double(rng() % 10) / 10.0;
        }
        truth[0] = 1;
        std::vector<PrPoint> curve = pr_curve(truth, scores);
        for (size_t i = 1; i < curve.size(); ++i) {
            CHECK(curve[i].threshold < curve[i - 1].threshold);
            CHECK(curve[i].recall >= curve[i - 1].recall);
        }
        CHECK(curve.back().recall == doctest::Approx(1.0));
    }
}

TEST_CASE("metric implementations match brute-force references on random instances") {
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> coord(-3.0, 3.0);
    for (int trial = 0; trial < 40; ++trial) {
        size_t n = 5 + rng() % 196;
        size_t k = 2 + rng() % 5;
        size_t dim = 1 + rng() % 6;
        std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
        std::vector<int> labels(n), pred(n);
        for (size_t i = 0; i < n; ++i) {
            for (double& x : pts[i]) x = coord(rng);
            labels[i] = int(rng() % k);
            pred[i] = int(rng() % k);
        }
        labels[0] = 0;
        labels[n - 1] = 1;  // guarantee two clusters
        CHECK(silhouette(pts, labels) ==
              doctest::Approx(oracle::brute_silhouette(pts, labels)).epsilon(1e-10));
        CHECK(rand_index(labels, pred) ==
              doctest::Approx(oracle::brute_rand_index(labels, pred)).epsilon(1e-12));
        CHECK(homogeneity(labels, pred) ==
              doctest::Approx(oracle::brute_homogeneity(labels, pred)).epsilon(1e-10));
        CHECK(completeness(labels, pred) ==
              doctest::Approx(oracle::brute_completeness(labels, pred)).epsilon(1e-10));

        std::vector<uint8_t> bin(n);
        std::vector<double> scores(n);
        for (size_t i = 0; i < n; ++i) {
            bin[i] = rng() % 2;
            scores[i] = coord(rng);
        }
        bin[0] = 1;
        CHECK(pr_auc(bin, scores) ==
              doctest::Approx(oracle::brute_average_precision(bin, scores))
                  .epsilon(1e-12));
    }
}

TEST_CASE("classification report") {
    std::vector<std::string> names = {"a", "b", "c"};
    SUBCASE("perfect predictions score 1 everywhere") {
        std::vector<int> truth = {0, 1, 2, 0, 1, 2};
        std::vector<std::vector<double>> scores;
        for (int t : truth) {
            std::vector<double> s(3, 0.0);
            s[size_t(t)] = 1.0;
            scores.push_back(s);
        }
        ClassificationReport r = classification_report(truth, truth, scores, names);
        CHECK(r.macro_precision == doctest::Approx(1.0));
        CHECK(r.macro_recall == doctest::Approx(1.0));
        CHECK(r.macro_auc == doctest::Approx(1.0));
        CHECK(r.min_precision == doctest::Approx(1.0));
        CHECK(r.min_recall == doctest::Approx(1.0));
    }
    SUBCASE("a fully misclassified class drags the minimum recall to 0") {
        std::vector<int> truth = {0, 0, 1, 1, 2, 2};
        std::vector<int> pred = {0, 0, 1, 1, 0, 1};  // class 2 never predicted
        std::vector<std::vector<double>> scores;
        for (int p : pred) {
            std::vector<double> s(3, 0.05);
            s[size_t(p)] = 0.9;
            scores.push_back(s);
        }
        ClassificationReport r = classification_report(truth, pred, scores, names);
        CHECK(r.min_recall == 0.0);
        CHECK(r.macro_recall == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("three-class hand case matches confusion-matrix arithmetic") {
        //   truth:  a a a b b c
        //   pred:   a b a b a c
        std::vector<int> truth = {0, 0, 0, 1, 1, 2};
        std::vector<int> pred = {0, 1, 0, 1, 0, 2};
        std::vector<std::vector<double>> scores;
        for (int p : pred) {
            std::vector<double> s(3, 0.1);
            s[size_t(p)] = 0.8;
            scores.push_back(s);
        }
        ClassificationReport r = classification_report(truth, pred, scores, names);
        // class a: TP 2, FP 1, FN 1 -> P 2/3, R 2/3
        CHECK(r.per_class[0].precision == doctest::Approx(2.0 / 3.0));
        CHECK(r.per_class[0].recall == doctest::Approx(2.0 / 3.0));
        // class b: TP 1, FP 1, FN 1 -> P 1/2, R 1/2
        CHECK(r.per_class[1].precision == doctest::Approx(0.5));
        CHECK(r.per_class[1].recall == doctest::Approx(0.5));
        // class c: perfect
        CHECK(r.per_class[2].precision == doctest::Approx(1.0));
        CHECK(r.per_class[2].recall == doctest::Approx(1.0));
        CHECK(r.macro_precision == doctest::Approx((2.0 / 3.0 + 0.5 + 1.0) / 3.0));
        CHECK(r.min_precision == doctest::Approx(0.5));
    }
    SUBCASE("classes absent from truth are skipped with a note") {
        std::vector<int> truth = {0, 0, 1, 1};
        std::vector<int> pred = {0, 0, 1, 1};
        std::vector<std::vector<double>> scores(4, {0.5, 0.5, 0.0});
        ClassificationReport r = classification_report(truth, pred, scores, names);
        CHECK(r.per_class.size() == 2);
        CHECK(r.skipped == std::vector<std::string>{"c"});
    }
}

TEST_CASE("pca3 projection") {
    SUBCASE("centered 3-D data keeps pairwise distances") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> coord(-2.0, 2.0);
        size_t n = 40;
        std::vector<std::vector<double>> pts(n, std::vector<double>(3));
        for (auto& p : pts)
            for (double& x : p) x = coord(rng);
        auto proj = pca3_projection(pts);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) {
                double orig = oracle::euclid(pts[i], pts[j]);
                double low = std::sqrt(std::pow(proj[i][0] - proj[j][0], 2) +
                                       std::pow(proj[i][1] - proj[j][1], 2) +
                                       std::pow(proj[i][2] - proj[j][2], 2));
                CHECK(low == doctest::Approx(orig).epsilon(1e-6));
            }
    }
    SUBCASE("rank-1 data leaves components 2 and 3 at zero") {
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 10; ++i)
            pts.push_back({double(i), 2.0 * double(i), -double(i)});
        auto proj = pca3_projection(pts);
        for (const auto& p : proj) {
            CHECK(p[1] == 0.0);
            CHECK(p[2] == 0.0);
        }
        // the retained component carries all the variance
        double var = 0;
        for (const auto& p : proj) var += p[0] * p[0];
        CHECK(var > 0);
    }
    SUBCASE("discarded variance equals the dropped eigenvalue mass") {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> coord(-1.0, 1.0);
        size_t n = 60, d = 6;
        std::vector<std::vector<double>> pts(n, std::vector<double>(d));
        for (auto& p : pts)
            for (double& x : p) x = coord(rng);
        auto proj = pca3_projection(pts);

        // total variance (trace of covariance)
        std::vector<double> mean(d, 0.0);
        for (const auto& p : pts)
            for (size_t j = 0; j < d; ++j) mean[j] += p[j] / double(n);
        double total = 0;
        for (const auto& p : pts)
            for (size_t j = 0; j < d; ++j)
                total += (p[j] - mean[j]) * (p[j] - mean[j]) / double(n - 1);
        double kept = 0;
        for (const auto& p : proj)
            for (double x : p) kept += x * x / double(n - 1);
        // Projection onto the top-3 eigenvectors keeps the top-3 eigenvalue
        // mass; reconstruction error is the remainder and must be positive
        // but bounded by total - kept computed through the eigenbasis.
        CHECK(kept < total);
        CHECK(kept > total / 2);  // top 3 of 6 isotropic dims carry > half
    }
    SUBCASE("too few points") {
        CHECK_THROWS_AS(pca3_projection({{1.0, 2.0}}), MetricError);
    }
    SUBCASE("deterministic output") {
        std::vector<std::vector<double>> pts;
        std::mt19937_64 rng(10);
        std::uniform_real_distribution<double> coord(-1.0, 1.0);
        for (int i = 0; i < 15; ++i) pts.push_back({coord(rng), coord(rng), coord(rng), coord(rng)});
        CHECK(pca3_projection(pts) == pca3_projection(pts));
    }
}

TEST_CASE("kmeans recovers well-separated blobs") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<std::vector<double>> pts;
    std::vector<int> truth;
    const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 20; ++i) {
            pts.push_back({centers[c][0] + noise(rng), centers[c][1] + noise(rng)});
            truth.push_back(c);
        }
    KMeansResult km = kmeans(pts, 3, 0);
    CHECK(homogeneity(truth, km.assignment) == doctest::Approx(1.0));
    CHECK(completeness(truth, km.assignment) == doctest::Approx(1.0));
    CHECK(rand_index(truth, km.assignment) == doctest::Approx(1.0));
}
