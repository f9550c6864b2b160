#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowembed/examples.hpp"
#include "flowembed/fastrp.hpp"
#include "flowembed/flow.hpp"
#include "flowembed/forest.hpp"
#include "flowembed/graph.hpp"
#include "flowembed/knn.hpp"
#include "flowembed/metrics.hpp"
#include "flowembed/stpcn.hpp"
#include "flowembed/synthgen.hpp"

namespace flowembed {

// Fully resolved run configuration. Defaults mirror the reference
// hyperparameters (alpha 1.15, beta 128, gamma/epsilon 32, FastRP weights
// 1/0.5/0.5, k 350).
struct PipelineConfig {
    // synth
    size_t classes = 10;
    size_t flows_per_class = 2000;
    bool near_dup = false;          // append a near-duplicate of the first profile
    std::string profiles_path;      // optional profile JSON overriding defaults
    // graph
    double alpha = 1.15;
    // node embeddings
    size_t epsilon = 32;
    std::vector<double> iteration_weights{1.0, 0.5, 0.5};
    double sparsity = 3.0;
    // windows
    size_t beta = 128;
    size_t gamma = 32;
    size_t stride = 0;              // 0 -> beta / 2
    // split + training
    double split_ratio = 0.7;
    std::string holdout;            // empty = no holdout class
    double scale_s = 30.0;
    double margin_m = 0.5;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    size_t batch_size = 64;
    size_t epochs = 30;
    // downstream heads (not part of the artifact hash)
    size_t knn_k = 350;
    size_t rf_trees = 100;
    double zdt_threshold = 0.5;
    size_t repeats = 1;
    // seed for every stage
    uint64_t seed = 0;

    size_t resolved_stride() const;
    WindowConfig window() const;
    FastRPConfig fastrp() const;
    TrainConfig trainer() const;
};

std::string config_to_json_string(const PipelineConfig& cfg);
PipelineConfig config_from_json_string(const std::string& text);
PipelineConfig config_from_json_file(const std::string& path);

// FNV-1a over the canonical JSON of the data-generating keys (downstream
// evaluation knobs excluded). When profiles_path is set the profile file
// content is folded in.
std::string config_hash(const PipelineConfig& cfg);

// config.json sidecar in every output directory.
void write_run_config(const std::string& dir, const PipelineConfig& cfg);
// Rejects composition of artifacts produced under a different config hash
// unless force is set. Missing sidecars are tolerated for hand-made inputs.
void check_artifact_compat(const std::string& artifact_dir,
                           const PipelineConfig& cfg, bool force);

// Split with optional class holdout; indices are positions in the full
// example list. Holdout examples appear in neither train nor test.
DatasetSplit make_pipeline_split(const std::vector<std::string>& labels,
                                 double ratio, uint64_t seed,
                                 const std::string& holdout_label);
std::vector<size_t> holdout_indices(const std::vector<std::string>& labels,
                                    const DatasetSplit& split);

void write_split_json(const std::string& path, const DatasetSplit& split);
DatasetSplit read_split_json(const std::string& path);

// Embedding matrix CSV: example_id,label,e0,...,e63.
void write_embedded_csv(const std::string& path,
                        const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& embeddings);
struct EmbeddedTable {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> embeddings;
};
EmbeddedTable read_embedded_csv(const std::string& path);

std::vector<ClassProfile> resolve_profiles(const PipelineConfig& cfg);

// In-memory synth -> graph -> node embeddings -> examples -> split -> train
// -> embed chain, shared by the CLI stages and the evaluation harness.
struct PipelineResult {
    FlowDataset flows;
    ConnectionGraph graph;
    NodeEmbeddingTable table;
    std::vector<Example> examples;
    std::vector<std::string> labels;
    DatasetSplit split;
    StpcnModel model;
    std::vector<std::vector<double>> embedded;
    TrainLog train_log;
    ExampleBuildSummary build_summary;
};
PipelineResult run_pipeline(const PipelineConfig& cfg);
PipelineResult run_pipeline_on_flows(const PipelineConfig& cfg, FlowDataset flows);

// --- downstream evaluations over frozen embeddings ---

struct ClusterReport {
    double silhouette_truth = 0.0;
    double silhouette_kmeans = 0.0;
    double completeness = 0.0;
    double homogeneity = 0.0;
    double rand_index = 0.0;
    double adjusted_rand = 0.0;
    size_t points = 0;
    size_t classes = 0;
};
// Cluster metrics on the test-set embeddings: silhouette against ground
// truth, completeness/homogeneity/Rand against seeded k-means assignments
// with k = number of classes.
ClusterReport cluster_eval(const std::vector<std::vector<double>>& points,
                           const std::vector<std::string>& labels, uint64_t seed);

struct ZdtEval {
    ZdtResult result;
    std::vector<size_t> query_ids;  // example ids, test then holdout
    double precision = 0.0;
    double recall = 0.0;
    double pr_auc = 0.0;
    size_t k_used = 0;
    bool k_clamped = false;
};
ZdtEval zdt_eval(const std::vector<std::vector<double>>& embedded,
                 const std::vector<std::string>& labels, const DatasetSplit& split,
                 size_t k, double threshold);

CataResult cata_eval(const std::vector<std::vector<double>>& embedded,
                     const std::vector<std::string>& labels,
                     const DatasetSplit& split, size_t k);

struct ClassifyEval {
    ClassificationReport report;
    std::vector<std::string> class_names;
};
ClassifyEval classify_eval(const std::vector<std::vector<double>>& embedded,
                           const std::vector<std::string>& labels,
                           const DatasetSplit& split, size_t rf_trees,
                           uint64_t seed);

// Repeated-holdout classification: per repeat, one class is excluded from
// embedder training, all classes (including the holdout) are split and fed
// to the random forest, and the report covers the full test set.
struct RepeatedHoldoutResult {
    struct Repeat {
        std::string holdout;
        ClassificationReport report;
    };
    std::vector<Repeat> repeats;
    double mean_macro_precision = 0.0, mean_macro_recall = 0.0, mean_macro_auc = 0.0;
    double mean_min_precision = 0.0, mean_min_recall = 0.0, mean_min_auc = 0.0;
};
RepeatedHoldoutResult repeated_holdout_classify(const std::vector<Example>& examples,
                                                const PipelineConfig& cfg);

// Report writers with a stable key schema.
std::string cluster_report_to_json(const ClusterReport& r);
std::string zdt_report_to_json(const ZdtEval& r);
std::string classification_report_to_json(const ClassificationReport& r);
void write_zdt_csv(const std::string& path, const ZdtEval& r);
void write_cata_csv(const std::string& path, const CataResult& r);
void write_pr_curve_csv(const std::string& path, const std::vector<PrPoint>& curve);

}  // namespace flowembed
