#include "flowembed/knn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace flowembed {

namespace {
constexpr double kExactMatch = 1e-12;
}

KnnModel knn_fit(const std::vector<std::vector<double>>& embeddings,
                 const std::vector<std::string>& labels, size_t k) {
    if (embeddings.empty()) throw ConfigError("knn_fit: empty training set");
    if (embeddings.size() != labels.size())
        throw ConfigError("knn_fit: embedding/label count mismatch");
    if (k < 1 || k > embeddings.size())
        throw ConfigError("knn_fit: k = " + std::to_string(k) +
                          " must lie in [1, n = " + std::to_string(embeddings.size()) +
                          "]");
    KnnModel m;
    m.dim = embeddings[0].size();
    m.k = k;
    std::map<std::string, int> ids;
    for (const auto& l : labels) ids.emplace(l, 0);
    int next = 0;
    for (auto& [name, id] : ids) {
        id = next++;
        m.class_names.push_back(name);
    }
    m.data.reserve(embeddings.size() * m.dim);
    for (size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].size() != m.dim)
            throw ShapeError("knn_fit: ragged embedding rows");
        m.data.insert(m.data.end(), embeddings[i].begin(), embeddings[i].end());
        m.labels.push_back(ids.at(labels[i]));
    }
    return m;
}

std::vector<double> knn_predict_proba(const KnnModel& model,
                                      std::span<const double> query) {
    if (query.size() != model.dim)
        throw ShapeError("query dimension " + std::to_string(query.size()) +
                         " does not match model dimension " +
                         std::to_string(model.dim));
    size_t n = model.size();
    std::vector<std::pair<double, size_t>> dist(n);
    for (size_t i = 0; i < n; ++i) {
        const double* row = model.data.data() + i * model.dim;
        double sq = 0.0;
        for (size_t c = 0; c < model.dim; ++c) {
            double d = row[c] - query[c];
            sq += d * d;
        }
        dist[i] = {std::sqrt(sq), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(model.k),
                      dist.end());

    std::vector<double> probs(model.class_names.size(), 0.0);
    for (size_t j = 0; j < model.k; ++j) {
        if (dist[j].first < kExactMatch) {
            probs.assign(model.class_names.size(), 0.0);
            probs[size_t(model.labels[dist[j].second])] = 1.0;
            return probs;
        }
    }
    double total = 0.0;
    for (size_t j = 0; j < model.k; ++j) {
        double w = 1.0 / dist[j].first;
        probs[size_t(model.labels[dist[j].second])] += w;
        total += w;
    }
    for (double& p : probs) p /= total;
    return probs;
}

ZdtResult zdt_scores(const KnnModel& model,
                     const std::vector<std::vector<double>>& queries,
                     const std::vector<uint8_t>& truth_is_holdout,
                     double threshold) {
    if (queries.size() != truth_is_holdout.size())
        throw ConfigError("zdt_scores: query/truth count mismatch");
    ZdtResult r;
    r.threshold = threshold;
    r.is_holdout = truth_is_holdout;
    r.zdt_probability.reserve(queries.size());
    r.predicted.reserve(queries.size());
    for (const auto& q : queries) {
        std::vector<double> probs = knn_predict_proba(model, q);
        double max_p = *std::max_element(probs.begin(), probs.end());
        double zdt = 1.0 - max_p;
        r.zdt_probability.push_back(zdt);
        r.predicted.push_back(zdt >= threshold ? 1 : 0);
    }
    return r;
}

CataResult cata(const KnnModel& model,
                const std::vector<std::vector<double>>& holdout_embeddings,
                const std::string& holdout_label) {
    if (holdout_embeddings.empty())
        throw ConfigError("cata: holdout embedding set is empty");

    size_t c = model.class_names.size();
    std::vector<size_t> wins(c, 0);
    std::vector<double> win_prob_sum(c, 0.0);
    for (const auto& q : holdout_embeddings) {
        std::vector<double> probs = knn_predict_proba(model, q);
        size_t best = 0;
        for (size_t j = 1; j < c; ++j)
            if (probs[j] > probs[best]) best = j;
        ++wins[best];
        win_prob_sum[best] += probs[best];
    }

    std::vector<size_t> ranked;
    for (size_t j = 0; j < c; ++j)
        if (wins[j] > 0) ranked.push_back(j);
    std::sort(ranked.begin(), ranked.end(), [&](size_t a, size_t b) {
        if (wins[a] != wins[b]) return wins[a] > wins[b];
        double ma = win_prob_sum[a] / double(wins[a]);
        double mb = win_prob_sum[b] / double(wins[b]);
        if (ma != mb) return ma > mb;
        return model.class_names[a] < model.class_names[b];
    });

    CataResult result;
    result.holdout_class = holdout_label;
    for (size_t r = 0; r < ranked.size() && r < 2; ++r) {
        size_t j = ranked[r];
        result.top.push_back(
            {model.class_names[j], wins[j], win_prob_sum[j] / double(wins[j])});
    }
    return result;
}

}  // namespace flowembed
