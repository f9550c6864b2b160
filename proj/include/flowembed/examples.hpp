#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowembed/fastrp.hpp"
#include "flowembed/flow.hpp"

namespace flowembed {

struct WindowConfig {
    size_t beta = 128;    // flows per window
    size_t gamma = 32;    // IPs per example
    size_t epsilon = 32;  // embedding dimension
    size_t stride = 64;   // flows between window starts
};

// One training instance: feature matrix F (gamma x epsilon, row-major),
// binary adjacency A (gamma x gamma), class label.
struct Example {
    std::vector<double> F;
    std::vector<uint8_t> A;
    std::string label;
    size_t window_start = 0;
};

// First-appearance order scanning flows, source before destination, no
// duplicates, at most gamma entries.
std::vector<std::string> select_window_ips(std::span<const FlowRecord> flows,
                                           size_t gamma);

// Row k = embedding of ips[k]; remaining rows zero. Unknown IPs produce a
// zero row and increment *unknown_rows when given.
std::vector<double> build_feature_matrix(const std::vector<std::string>& ips,
                                         const NodeEmbeddingTable& table,
                                         size_t gamma, size_t epsilon,
                                         size_t* unknown_rows = nullptr);

// A[i][j] = 1 iff some flow in the slice goes from ips[i] to ips[j].
std::vector<uint8_t> build_adjacency(std::span<const FlowRecord> flows,
                                     const std::vector<std::string>& ips,
                                     size_t gamma);

struct ExampleBuildSummary {
    std::map<std::string, size_t> per_class;      // examples per label
    std::map<std::string, size_t> short_streams;  // label -> flow count, too short
    size_t unknown_ip_rows = 0;
};

// Slides a width-beta window over each class stream of the sorted dataset.
// Windows start at 0, stride, 2*stride, ... while beta flows remain; the
// final partial window is dropped. Streams never cross class boundaries.
std::vector<Example> make_examples(const FlowDataset& sorted_ds,
                                   const NodeEmbeddingTable& table,
                                   const WindowConfig& cfg,
                                   ExampleBuildSummary* summary = nullptr);

// Flat binary example file: magic "STPX1", u32 gamma, u32 epsilon, then per
// example u32 label length + label bytes + row-major F (f64) + row-major A
// (bytes). Little-endian.
void save_examples(const std::string& path, const std::vector<Example>& examples,
                   size_t gamma, size_t epsilon);

struct LoadedExamples {
    size_t gamma = 0;
    size_t epsilon = 0;
    std::vector<Example> examples;
};
LoadedExamples load_examples(const std::string& path);

std::vector<std::string> example_labels(const std::vector<Example>& examples);

// Example-level wrappers over the label-index split operations.
std::pair<std::vector<Example>, std::vector<Example>> hold_out_class(
    const std::vector<Example>& examples, const std::string& class_label);
DatasetSplit split_train_test(const std::vector<Example>& examples, double ratio,
                              uint64_t seed);

}  // namespace flowembed
