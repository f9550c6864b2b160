#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "flowembed/errors.hpp"

namespace flowembed {

// Mean silhouette over points with Euclidean distance; singleton-cluster
// points score 0. Throws MetricError with fewer than 2 clusters.
double silhouette(const std::vector<std::vector<double>>& points,
                  const std::vector<int>& labels);

// 1 - H(truth|pred) / H(truth); degenerate zero-entropy denominators score 1.
double homogeneity(const std::vector<int>& truth, const std::vector<int>& predicted);
// 1 - H(pred|truth) / H(pred).
double completeness(const std::vector<int>& truth, const std::vector<int>& predicted);

// Fraction of agreeing unordered pairs.
double rand_index(const std::vector<int>& truth, const std::vector<int>& predicted);
double adjusted_rand_index(const std::vector<int>& truth,
                           const std::vector<int>& predicted);

// Binary metrics at a fixed threshold (predict positive when score >=
// threshold). Precision over an empty prediction set is 1 by convention.
std::pair<double, double> precision_recall(const std::vector<uint8_t>& truth,
                                           const std::vector<double>& scores,
                                           double threshold);

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};
// One point per distinct score, descending. Throws MetricError when truth
// has no positives.
std::vector<PrPoint> pr_curve(const std::vector<uint8_t>& truth,
                              const std::vector<double>& scores);
// Average precision: sum of precision * delta-recall along the curve.
double pr_auc(const std::vector<uint8_t>& truth, const std::vector<double>& scores);

struct ClassificationReport {
    struct PerClass {
        std::string label;
        double precision = 0.0;
        double recall = 0.0;
        double pr_auc = 0.0;
    };
    std::vector<PerClass> per_class;
    std::vector<std::string> skipped;  // classes absent from truth
    double macro_precision = 0.0, macro_recall = 0.0, macro_auc = 0.0;
    double min_precision = 0.0, min_recall = 0.0, min_auc = 0.0;
};

// One-vs-rest per-class metrics plus unweighted macro and worst-class
// minima. scores[i][c] is the predicted membership probability of class c.
ClassificationReport classification_report(
    const std::vector<int>& truth, const std::vector<int>& predicted,
    const std::vector<std::vector<double>>& scores,
    const std::vector<std::string>& class_names);

// Centered projection onto the top-3 principal directions. Deterministic
// sign convention: each direction's largest-magnitude component is positive.
// Directions beyond the data rank are zero.
std::vector<std::array<double, 3>> pca3_projection(
    const std::vector<std::vector<double>>& embeddings);

struct KMeansResult {
    std::vector<int> assignment;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
};

// Seeded k-means++ with Lloyd iterations; best of n_init restarts.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, size_t k,
                    uint64_t seed, size_t n_init = 10, size_t max_iter = 100);

}  // namespace flowembed
