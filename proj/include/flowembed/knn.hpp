#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowembed/errors.hpp"

namespace flowembed {

// Euclidean distance-weighted K-neighbor classifier. Stores the training
// data verbatim; no learning.
struct KnnModel {
    size_t dim = 0;
    size_t k = 0;
    std::vector<double> data;  // n x dim, row-major
    std::vector<int> labels;   // class ids into class_names
    std::vector<std::string> class_names;

    size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
};

KnnModel knn_fit(const std::vector<std::vector<double>>& embeddings,
                 const std::vector<std::string>& labels, size_t k);

// Inverse-distance class weights over the k nearest neighbors, normalized to
// a probability simplex. An exact match (distance < 1e-12) short-circuits to
// probability 1 for that neighbor's class.
std::vector<double> knn_predict_proba(const KnnModel& model,
                                      std::span<const double> query);

struct ZdtResult {
    std::vector<double> zdt_probability;  // 1 - max class-membership probability
    std::vector<uint8_t> is_holdout;      // ground truth per query
    std::vector<uint8_t> predicted;       // zdt_probability >= threshold
    double threshold = 0.5;
};

ZdtResult zdt_scores(const KnnModel& model,
                     const std::vector<std::vector<double>>& queries,
                     const std::vector<uint8_t>& truth_is_holdout,
                     double threshold = 0.5);

struct CataEntry {
    std::string attributed_class;
    size_t frequency = 0;
    double avg_probability = 0.0;  // mean over examples this class won
};

struct CataResult {
    std::string holdout_class;
    std::vector<CataEntry> top;  // at most two entries, most frequent first
};

CataResult cata(const KnnModel& model,
                const std::vector<std::vector<double>>& holdout_embeddings,
                const std::string& holdout_label);

}  // namespace flowembed
