#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowembed/examples.hpp"
#include "flowembed/tensor.hpp"

namespace flowembed {

struct TrainConfig {
    double scale_s = 30.0;  // angular-margin logit scale
    double margin_m = 0.5;  // radians, in [0, pi/2)
    double learning_rate = 1e-3;
    double momentum = 0.9;
    size_t batch_size = 64;
    size_t epochs = 30;
    uint64_t seed = 0;
};

// Parallel convolutional embedder: one branch over F (temporal), one over A
// (spatial), each conv(1->8, 3x3, pad 1) -> relu -> maxpool 2x2 ->
// conv(8->16, 3x3, pad 1) -> relu -> global avg pool -> dense(16->32).
// Branch outputs are concatenated into a 64-d embedding. The angular-margin
// head holds one unit-norm weight row per class.
struct StpcnModel {
    size_t gamma = 32;
    size_t epsilon = 32;
    double scale_s = 30.0;
    double margin_m = 0.5;
    std::vector<std::string> class_labels;

    struct Branch {
        nn::Tensor conv1_w, conv1_b;  // [8,1,3,3], [8]
        nn::Tensor conv2_w, conv2_b;  // [16,8,3,3], [16]
        nn::Tensor fc_w, fc_b;        // [32,16], [32]
    };
    Branch temporal;  // over F
    Branch spatial;   // over A
    nn::Tensor head;  // [num_classes, 64]

    static constexpr size_t kEmbedDim = 64;
    std::vector<nn::Tensor> parameters() const;  // fixed, documented order
};

StpcnModel init_model(size_t gamma, size_t epsilon,
                      const std::vector<std::string>& class_labels,
                      const TrainConfig& cfg);

// Differentiable forward; records the compute graph.
nn::Tensor embed_graph(const StpcnModel& model, const Example& ex);

// Forward values only.
std::vector<double> embed(const StpcnModel& model, const Example& ex);
std::vector<std::vector<double>> embed_all(const StpcnModel& model,
                                           const std::vector<Example>& examples);

// Additive angular margin loss over scaled cosine logits. With m = 0, s = 1
// this reduces exactly to softmax cross-entropy over cosine similarities.
nn::Tensor arcface_loss(const nn::Tensor& embeddings, const std::vector<int>& labels,
                        const nn::Tensor& head, double s, double m);

struct TrainLog {
    std::vector<double> epoch_mean_loss;
};

// Minibatch gradient descent with momentum over the train indices of the
// split. Head rows are renormalized to unit norm after every update.
// Deterministic for a fixed seed.
StpcnModel train(const std::vector<Example>& examples, const DatasetSplit& split,
                 const TrainConfig& cfg, TrainLog* log = nullptr);

// Model file: magic "STPCNv1", self-describing header, then row-major f64
// parameter arrays. Round-trips bit-exactly.
void save_model(const StpcnModel& model, const std::string& path,
                const std::string& config_hash = "");
StpcnModel load_model(const std::string& path, std::string* config_hash = nullptr);

}  // namespace flowembed
