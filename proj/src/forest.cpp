#include "flowembed/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace flowembed {

int DecisionTree::predict(std::span<const double> x) const {
    int idx = 0;
    while (nodes[size_t(idx)].feature >= 0) {
        const Node& n = nodes[size_t(idx)];
        idx = x[size_t(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[size_t(idx)].leaf_label;
}

namespace {

int majority_label(const std::vector<size_t>& samples, const std::vector<int>& y,
                   size_t n_classes) {
    std::vector<size_t> counts(n_classes, 0);
    for (size_t i : samples) ++counts[size_t(y[i])];
    size_t best = 0;
    for (size_t c = 1; c < n_classes; ++c)
        if (counts[c] > counts[best]) best = c;
    return int(best);
}

bool is_pure(const std::vector<size_t>& samples, const std::vector<int>& y) {
    for (size_t i = 1; i < samples.size(); ++i)
        if (y[samples[i]] != y[samples[0]]) return false;
    return true;
}

struct BestSplit {
    bool found = false;
    size_t feature = 0;
    double threshold = 0.0;
    double impurity = 0.0;  // weighted child Gini
};

// Gini of a count vector with n total samples.
double gini(const std::vector<size_t>& counts, size_t n) {
    double g = 1.0;
    for (size_t c : counts) {
        double p = double(c) / double(n);
        g -= p * p;
    }
    return g;
}

BestSplit find_split(const std::vector<double>& x, size_t dim,
                     const std::vector<int>& y, size_t n_classes,
                     const std::vector<size_t>& samples,
                     const std::vector<size_t>& features, size_t min_samples_leaf) {
    BestSplit best;
    size_t n = samples.size();
    std::vector<std::pair<double, int>> vals(n);
    std::vector<size_t> left_counts(n_classes), right_counts(n_classes);

    for (size_t f : features) {
        for (size_t i = 0; i < n; ++i)
            vals[i] = {x[samples[i] * dim + f], y[samples[i]]};
        std::sort(vals.begin(), vals.end());
        if (vals.front().first == vals.back().first) continue;  // constant feature

        std::fill(left_counts.begin(), left_counts.end(), 0);
        std::fill(right_counts.begin(), right_counts.end(), 0);
        for (const auto& [v, label] : vals) ++right_counts[size_t(label)];

        for (size_t i = 0; i + 1 < n; ++i) {
            ++left_counts[size_t(vals[i].second)];
            --right_counts[size_t(vals[i].second)];
            if (vals[i].first == vals[i + 1].first) continue;
            size_t nl = i + 1, nr = n - nl;
            if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
            double impurity = (double(nl) * gini(left_counts, nl) +
                               double(nr) * gini(right_counts, nr)) /
                              double(n);
            if (!best.found || impurity < best.impurity) {
                best.found = true;
                best.feature = f;
                best.threshold = (vals[i].first + vals[i + 1].first) / 2.0;
                best.impurity = impurity;
            }
        }
    }
    return best;
}

int grow(DecisionTree& tree, const std::vector<double>& x, size_t dim,
         const std::vector<int>& y, size_t n_classes, size_t max_features,
         size_t min_samples_leaf, std::vector<size_t> samples, std::mt19937_64& rng) {
    int node_id = int(tree.nodes.size());
    tree.nodes.emplace_back();

    if (samples.size() < 2 * min_samples_leaf || is_pure(samples, y)) {
        tree.nodes[size_t(node_id)].leaf_label = majority_label(samples, y, n_classes);
        return node_id;
    }

    // Feature subsample without replacement, kept sorted for determinism.
    std::vector<size_t> all(dim);
    std::iota(all.begin(), all.end(), 0);
    std::vector<size_t> features;
    if (max_features >= dim) {
        features = all;
    } else {
        for (size_t i = 0; i < max_features; ++i) {
            std::uniform_int_distribution<size_t> pick(i, dim - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        features.assign(all.begin(), all.begin() + long(max_features));
        std::sort(features.begin(), features.end());
    }

    BestSplit split = find_split(x, dim, y, n_classes, samples, features,
                                 min_samples_leaf);
    if (!split.found) {
        tree.nodes[size_t(node_id)].leaf_label = majority_label(samples, y, n_classes);
        return node_id;
    }

    std::vector<size_t> left, right;
    for (size_t i : samples)
        (x[i * dim + split.feature] <= split.threshold ? left : right).push_back(i);
    samples.clear();
    samples.shrink_to_fit();

    tree.nodes[size_t(node_id)].feature = int(split.feature);
    tree.nodes[size_t(node_id)].threshold = split.threshold;
    int l = grow(tree, x, dim, y, n_classes, max_features, min_samples_leaf,
                 std::move(left), rng);
    int r = grow(tree, x, dim, y, n_classes, max_features, min_samples_leaf,
                 std::move(right), rng);
    tree.nodes[size_t(node_id)].left = l;
    tree.nodes[size_t(node_id)].right = r;
    return node_id;
}

}  // namespace

DecisionTree tree_fit(const std::vector<double>& x, size_t dim,
                      const std::vector<int>& y, size_t n_classes,
                      size_t max_features, size_t min_samples_leaf,
                      const std::vector<size_t>& sample_indices,
                      std::mt19937_64& rng) {
    if (sample_indices.empty()) throw ConfigError("tree_fit: no samples");
    DecisionTree tree;
    grow(tree, x, dim, y, n_classes, max_features, min_samples_leaf, sample_indices,
         rng);
    return tree;
}

RandomForestModel rf_fit(const std::vector<std::vector<double>>& embeddings,
                         const std::vector<std::string>& labels,
                         const RfConfig& cfg) {
    if (embeddings.empty()) throw ConfigError("rf_fit: empty training set");
    if (embeddings.size() != labels.size())
        throw ConfigError("rf_fit: embedding/label count mismatch");
    if (cfg.n_trees < 1) throw ConfigError("rf_fit: need at least 1 tree");

    RandomForestModel m;
    m.dim = embeddings[0].size();
    m.cfg = cfg;
    std::map<std::string, int> ids;
    for (const auto& l : labels) ids.emplace(l, 0);
    if (ids.size() < 2) throw ConfigError("rf_fit: need at least 2 classes");
    int next = 0;
    for (auto& [name, id] : ids) {
        id = next++;
        m.class_names.push_back(name);
    }

    std::vector<double> x;
    x.reserve(embeddings.size() * m.dim);
    std::vector<int> y;
    for (size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].size() != m.dim) throw ShapeError("rf_fit: ragged rows");
        x.insert(x.end(), embeddings[i].begin(), embeddings[i].end());
        y.push_back(ids.at(labels[i]));
    }

    size_t n = embeddings.size();
    size_t max_features = cfg.max_features;
    if (max_features == 0)
        max_features = std::max<size_t>(1, size_t(std::floor(std::sqrt(double(m.dim)))));
    max_features = std::min(max_features, m.dim);

    m.trees.reserve(cfg.n_trees);
    for (size_t t = 0; t < cfg.n_trees; ++t) {
        std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL * (t + 1));
        std::vector<size_t> samples;
        samples.reserve(n);
        if (cfg.bootstrap) {
            std::uniform_int_distribution<size_t> pick(0, n - 1);
            for (size_t i = 0; i < n; ++i) samples.push_back(pick(rng));
        } else {
            samples.resize(n);
            std::iota(samples.begin(), samples.end(), 0);
        }
        m.trees.push_back(tree_fit(x, m.dim, y, m.class_names.size(), max_features,
                                   cfg.min_samples_leaf, samples, rng));
    }
    return m;
}

std::vector<double> rf_predict_proba(const RandomForestModel& model,
                                     std::span<const double> query) {
    if (query.size() != model.dim)
        throw ShapeError("rf query dimension mismatch");
    std::vector<double> votes(model.class_names.size(), 0.0);
    for (const auto& tree : model.trees) ++votes[size_t(tree.predict(query))];
    for (double& v : votes) v /= double(model.trees.size());
    return votes;
}

std::pair<std::string, double> rf_predict(const RandomForestModel& model,
                                          std::span<const double> query) {
    std::vector<double> probs = rf_predict_proba(model, query);
    size_t best = 0;
    for (size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[best]) best = c;
    return {model.class_names[best], probs[best]};
}

}  // namespace flowembed
