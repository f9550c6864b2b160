#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flowembed/errors.hpp"

namespace flowembed {

struct RfConfig {
    size_t n_trees = 100;
    uint64_t seed = 0;
    bool bootstrap = true;
    size_t max_features = 0;  // 0 -> floor(sqrt(dim)), at least 1
    size_t min_samples_leaf = 1;
};

// CART tree with Gini splits, grown to purity.
struct DecisionTree {
    struct Node {
        int feature = -1;       // -1 for leaves
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int leaf_label = -1;
    };
    std::vector<Node> nodes;

    int predict(std::span<const double> x) const;
};

DecisionTree tree_fit(const std::vector<double>& x, size_t dim,
                      const std::vector<int>& y, size_t n_classes,
                      size_t max_features, size_t min_samples_leaf,
                      const std::vector<size_t>& sample_indices,
                      std::mt19937_64& rng);

struct RandomForestModel {
    size_t dim = 0;
    std::vector<std::string> class_names;
    std::vector<DecisionTree> trees;
    RfConfig cfg;
};

RandomForestModel rf_fit(const std::vector<std::vector<double>>& embeddings,
                         const std::vector<std::string>& labels,
                         const RfConfig& cfg = {});

// Vote fractions over the trees; sums to 1.
std::vector<double> rf_predict_proba(const RandomForestModel& model,
                                     std::span<const double> query);
std::pair<std::string, double> rf_predict(const RandomForestModel& model,
                                          std::span<const double> query);

}  // namespace flowembed
