#include <doctest.h>

#include <cmath>
#include <random>

#include "flowembed/forest.hpp"
#include "flowembed/knn.hpp"
#include "oracles.hpp"

using namespace flowembed;

TEST_CASE("knn_fit stores data and validates k") {
    std::vector<std::vector<double>> emb = {{0.0}, {0.0}, {1.0}, {1.0}};
    std::vector<std::string> labels = {"A", "A", "B", "B"};
    CHECK_THROWS_AS(knn_fit(emb, labels, 5), ConfigError);  // k = n + 1
    KnnModel all = knn_fit(emb, labels, 4);                 // k = n is allowed
    CHECK(all.size() == 4);

    SUBCASE("a stored point predicts its own class with probability 1") {
        std::vector<double> probs = knn_predict_proba(all, std::vector<double>{1.0});
        CHECK(probs[1] == 1.0);
        CHECK(probs[0] == 0.0);
    }
}

TEST_CASE("knn hand-computed inverse-distance weights") {
    // class A at x=0 (x2), class B at x=1 (x2), query 0.25, k=4:
    // weights 2*(1/0.25) = 8 vs 2*(1/0.75) = 8/3 -> P(A) = 0.75.
    KnnModel m = knn_fit({{0.0}, {0.0}, {1.0}, {1.0}}, {"A", "A", "B", "B"}, 4);
    std::vector<double> probs = knn_predict_proba(m, std::vector<double>{0.25});
    CHECK(probs[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(probs[1] == doctest::Approx(0.25).epsilon(1e-12));

    SUBCASE("equidistant single neighbors split evenly") {
        KnnModel sym = knn_fit({{0.0}, {1.0}}, {"A", "B"}, 2);
        std::vector<double> p = knn_predict_proba(sym, std::vector<double>{0.5});
        CHECK(p[0] == doctest::Approx(0.5));
        CHECK(p[1] == doctest::Approx(0.5));
    }
    SUBCASE("probabilities form a simplex") {
        double sum = probs[0] + probs[1];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("knn matches the brute-force scan on random instances") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    for (int trial = 0; trial < 10; ++trial) {
        size_t n = 50 + rng() % 950;
        size_t dim = 1 + rng() % 8;
        size_t n_classes = 2 + rng() % 4;
        std::vector<std::vector<double>> emb(n, std::vector<double>(dim));
        std::vector<std::string> names(n);
        std::vector<int> ids(n);
        for (size_t i = 0; i < n; ++i) {
            for (double& x : emb[i]) x = coord(rng);
            ids[i] = int(rng() % n_classes);
            names[i] = "c" + std::to_string(ids[i]);
        }
        size_t k = 1 + rng() % n;
        KnnModel m = knn_fit(emb, names, k);

        // Map model class order (sorted label strings) onto oracle ids.
        // Labels are c0..c9 so sorted order matches numeric order here.
        for (int q = 0; q < 20; ++q) {
            std::vector<double> query(dim);
            for (double& x : query) x = coord(rng);
            std::vector<double> got = knn_predict_proba(m, query);
            std::vector<double> want =
                oracle::brute_knn_proba(emb, ids, n_classes, k, query);
            // oracle covers every class id even if absent from training
            REQUIRE(got.size() <= want.size());
            for (size_t c = 0; c < m.class_names.size(); ++c) {
                size_t oracle_c = size_t(std::stoi(m.class_names[c].substr(1)));
                CHECK(got[c] == doctest::Approx(want[oracle_c]).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("zdt probabilities complement the max class probability") {
    KnnModel m = knn_fit({{0.0}, {0.0}, {1.0}, {1.0}}, {"A", "A", "B", "B"}, 4);

    SUBCASE("exact training match scores zero") {
        ZdtResult r = zdt_scores(m, {{0.0}}, {0});
        CHECK(r.zdt_probability[0] == 0.0);
        CHECK(r.predicted[0] == 0);
    }
    SUBCASE("hand example complement") {
        ZdtResult r = zdt_scores(m, {{0.25}}, {0});
        CHECK(r.zdt_probability[0] == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("complement identity on random queries") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> coord(-2.0, 3.0);
        for (int i = 0; i < 50; ++i) {
            std::vector<double> q{coord(rng)};
            std::vector<double> probs = knn_predict_proba(m, q);
            ZdtResult r = zdt_scores(m, {q}, {0});
            double max_p = std::max(probs[0], probs[1]);
            CHECK(r.zdt_probability[0] + max_p == doctest::Approx(1.0).epsilon(1e-15));
        }
    }
    SUBCASE("far-away holdout queries score higher than in-distribution ones") {
        std::mt19937_64 rng(4);
        std::normal_distribution<double> noise(0.0, 0.05);
        std::vector<std::vector<double>> train;
        std::vector<std::string> labels;
        for (int i = 0; i < 40; ++i) {
            train.push_back({(i % 2 == 0 ? 0.0 : 1.0) + noise(rng)});
            labels.push_back(i % 2 == 0 ? "A" : "B");
        }
        // k spans both clusters: an in-distribution query is dominated by its
        // own class's tiny distances, a far query sees comparable distances
        // everywhere and its confidence flattens.
        KnnModel big = knn_fit(train, labels, 40);
        double test_mean = 0, holdout_mean = 0;
        for (int i = 0; i < 20; ++i) {
            test_mean +=
                zdt_scores(big, {{(i % 2 ? 0.0 : 1.0) + noise(rng)}}, {0})
                    .zdt_probability[0];
            holdout_mean +=
                zdt_scores(big, {{25.0 + noise(rng)}}, {1}).zdt_probability[0];
        }
        CHECK(holdout_mean / 20.0 > test_mean / 20.0);
    }
}

TEST_CASE("cata tallies the top-2 most frequent attributions") {
    // Training: class X around 0, class Y around 10, class Z around 100.
    std::vector<std::vector<double>> train;
    std::vector<std::string> labels;
    for (int i = 0; i < 5; ++i) {
        train.push_back({0.0 + i * 0.01});
        labels.push_back("X");
        train.push_back({10.0 + i * 0.01});
        labels.push_back("Y");
        train.push_back({100.0 + i * 0.01});
        labels.push_back("Z");
    }
    KnnModel m = knn_fit(train, labels, 3);

    SUBCASE("single winner leaves the second slot empty") {
        std::vector<std::vector<double>> holdout(6, std::vector<double>{0.3});
        CataResult r = cata(m, holdout, "H");
        CHECK(r.holdout_class == "H");
        REQUIRE(r.top.size() == 1);
        CHECK(r.top[0].attributed_class == "X");
        CHECK(r.top[0].frequency == 6);
        CHECK(r.top[0].avg_probability > 0.9);
    }
    SUBCASE("60/40 split reports both classes in order with their means") {
        std::vector<std::vector<double>> holdout;
        for (int i = 0; i < 6; ++i) holdout.push_back({0.5 + i * 0.001});   // X wins
        for (int i = 0; i < 4; ++i) holdout.push_back({10.5 + i * 0.001});  // Y wins
        CataResult r = cata(m, holdout, "H");
        REQUIRE(r.top.size() == 2);
        CHECK(r.top[0].attributed_class == "X");
        CHECK(r.top[0].frequency == 6);
        CHECK(r.top[1].attributed_class == "Y");
        CHECK(r.top[1].frequency == 4);

        // Hand tally: the mean of P(X) over the six X-won queries.
        double x_sum = 0, y_sum = 0;
        for (int i = 0; i < 6; ++i) {
            std::vector<double> p =
                knn_predict_proba(m, std::vector<double>{0.5 + i * 0.001});
            x_sum += p[0];
        }
        for (int i = 0; i < 4; ++i) {
            std::vector<double> p =
                knn_predict_proba(m, std::vector<double>{10.5 + i * 0.001});
            y_sum += p[1];
        }
        CHECK(r.top[0].avg_probability == doctest::Approx(x_sum / 6).epsilon(1e-12));
        CHECK(r.top[1].avg_probability == doctest::Approx(y_sum / 4).epsilon(1e-12));
    }
    SUBCASE("empty holdout set violates the precondition") {
        CHECK_THROWS_AS(cata(m, {}, "H"), ConfigError);
    }
}

TEST_CASE("random forest basics") {
    // Separable 1-D feature.
    std::vector<std::vector<double>> x;
    std::vector<std::string> y;
    for (int i = 0; i < 8; ++i) {
        x.push_back({double(i)});
        y.push_back("low");
        x.push_back({double(i) + 100.0});
        y.push_back("high");
    }
    RfConfig cfg;
    cfg.n_trees = 25;
    cfg.seed = 7;
    RandomForestModel rf = rf_fit(x, y, cfg);

    SUBCASE("100% training accuracy on separable data") {
        for (size_t i = 0; i < x.size(); ++i)
            CHECK(rf_predict(rf, x[i]).first == y[i]);
    }
    SUBCASE("same seed gives identical predictions") {
        RandomForestModel rf2 = rf_fit(x, y, cfg);
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> q(-10.0, 120.0);
        for (int i = 0; i < 50; ++i) {
            std::vector<double> query{q(rng)};
            CHECK(rf_predict_proba(rf, query) == rf_predict_proba(rf2, query));
        }
    }
    SUBCASE("vote fractions sum to one") {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> q(-10.0, 120.0);
        for (int i = 0; i < 20; ++i) {
            std::vector<double> query{q(rng)};
            std::vector<double> probs = rf_predict_proba(rf, query);
            double sum = 0;
            for (double p : probs) sum += p;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("single class is rejected") {
        CHECK_THROWS_AS(rf_fit({{0.0}, {1.0}}, {"a", "a"}, cfg), ConfigError);
    }
}

TEST_CASE("one tree, no bootstrap, full features reduces to a decision tree") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    size_t n = 60, dim = 5;
    std::vector<std::vector<double>> x(n, std::vector<double>(dim));
    std::vector<std::string> y(n);
    std::vector<int> ids(n);
    for (size_t i = 0; i < n; ++i) {
        for (double& v : x[i]) v = coord(rng);
        ids[i] = x[i][0] + x[i][1] > 0 ? 1 : 0;
        y[i] = ids[i] ? "pos" : "neg";
    }

    RfConfig cfg;
    cfg.n_trees = 1;
    cfg.bootstrap = false;
    cfg.max_features = dim;
    cfg.seed = 3;
    RandomForestModel rf = rf_fit(x, y, cfg);

    // The standalone tree fitted on the same flat data must agree everywhere.
    std::vector<double> flat;
    for (const auto& row : x) flat.insert(flat.end(), row.begin(), row.end());
    std::vector<size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 tree_rng(42);  // unused: full features, no sampling
    DecisionTree tree = tree_fit(flat, dim, ids, 2, dim, 1, all, tree_rng);

    for (int q = 0; q < 200; ++q) {
        std::vector<double> query(dim);
        for (double& v : query) v = coord(rng);
        int tree_pred = tree.predict(query);
        CHECK(rf_predict(rf, query).first == (tree_pred ? "pos" : "neg"));
    }
}
