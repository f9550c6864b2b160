#include "flowembed/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace flowembed {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

size_t PipelineConfig::resolved_stride() const {
    return stride != 0 ? stride : std::max<size_t>(1, beta / 2);
}

WindowConfig PipelineConfig::window() const {
    return {beta, gamma, epsilon, resolved_stride()};
}

FastRPConfig PipelineConfig::fastrp() const {
    return {epsilon, iteration_weights, sparsity, seed};
}

TrainConfig PipelineConfig::trainer() const {
    return {scale_s, margin_m, learning_rate, momentum, batch_size, epochs, seed};
}

namespace {

ordered_json config_json(const PipelineConfig& c) {
    return ordered_json{{"classes", c.classes},
                        {"flows_per_class", c.flows_per_class},
                        {"near_dup", c.near_dup},
                        {"profiles_path", c.profiles_path},
                        {"alpha", c.alpha},
                        {"epsilon", c.epsilon},
                        {"iteration_weights", c.iteration_weights},
                        {"sparsity", c.sparsity},
                        {"beta", c.beta},
                        {"gamma", c.gamma},
                        {"stride", c.stride},
                        {"split_ratio", c.split_ratio},
                        {"holdout", c.holdout},
                        {"scale_s", c.scale_s},
                        {"margin_m", c.margin_m},
                        {"learning_rate", c.learning_rate},
                        {"momentum", c.momentum},
                        {"batch_size", c.batch_size},
                        {"epochs", c.epochs},
                        {"knn_k", c.knn_k},
                        {"rf_trees", c.rf_trees},
                        {"zdt_threshold", c.zdt_threshold},
                        {"repeats", c.repeats},
                        {"seed", c.seed}};
}

uint64_t fnv1a(const std::string& data, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string config_to_json_string(const PipelineConfig& cfg) {
    return config_json(cfg).dump(2) + "\n";
}

namespace {

PipelineConfig config_from_json(const ordered_json& j) {
    PipelineConfig c;
    c.classes = j.value("classes", c.classes);
    c.flows_per_class = j.value("flows_per_class", c.flows_per_class);
    c.near_dup = j.value("near_dup", c.near_dup);
    c.profiles_path = j.value("profiles_path", c.profiles_path);
    c.alpha = j.value("alpha", c.alpha);
    c.epsilon = j.value("epsilon", c.epsilon);
    if (j.contains("iteration_weights"))
        c.iteration_weights = j.at("iteration_weights").get<std::vector<double>>();
    c.sparsity = j.value("sparsity", c.sparsity);
    c.beta = j.value("beta", c.beta);
    c.gamma = j.value("gamma", c.gamma);
    c.stride = j.value("stride", c.stride);
    c.split_ratio = j.value("split_ratio", c.split_ratio);
    c.holdout = j.value("holdout", c.holdout);
    c.scale_s = j.value("scale_s", c.scale_s);
    c.margin_m = j.value("margin_m", c.margin_m);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.knn_k = j.value("knn_k", c.knn_k);
    c.rf_trees = j.value("rf_trees", c.rf_trees);
    c.zdt_threshold = j.value("zdt_threshold", c.zdt_threshold);
    c.repeats = j.value("repeats", c.repeats);
    c.seed = j.value("seed", c.seed);
    return c;
}

}  // namespace

PipelineConfig config_from_json_string(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid config JSON: " + std::string(e.what()));
    }
    return config_from_json(j);
}

PipelineConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_string(buf.str());
}

std::string config_hash(const PipelineConfig& cfg) {
    // Only keys that shape the produced artifacts take part; evaluation
    // knobs (knn_k, rf_trees, zdt_threshold, repeats) stay out so tuning a
    // downstream head does not orphan earlier artifacts.
    ordered_json j = config_json(cfg);
    j.erase("knn_k");
    j.erase("rf_trees");
    j.erase("zdt_threshold");
    j.erase("repeats");
    j["stride"] = cfg.resolved_stride();
    uint64_t h = fnv1a(j.dump());
    if (!cfg.profiles_path.empty()) {
        std::ifstream in(cfg.profiles_path, std::ios::binary);
        if (in) {
            std::ostringstream buf;
            buf << in.rdbuf();
            h = fnv1a(buf.str(), h);
        }
    }
    return hex64(h);
}

void write_run_config(const std::string& dir, const PipelineConfig& cfg) {
    fs::create_directories(dir);
    ordered_json j;
    j["config_hash"] = config_hash(cfg);
    j["config"] = config_json(cfg);
    std::ofstream out(fs::path(dir) / "config.json");
    if (!out) throw FormatError("cannot write config.json in " + dir);
    out << j.dump(2) << '\n';
}

void check_artifact_compat(const std::string& artifact_dir,
                           const PipelineConfig& cfg, bool force) {
    fs::path p = fs::path(artifact_dir) / "config.json";
    if (!fs::exists(p)) return;  // hand-made inputs carry no sidecar
    std::ifstream in(p);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception&) {
        throw FormatError("unreadable config.json in " + artifact_dir);
    }
    std::string produced = j.value("config_hash", "");
    std::string current = config_hash(cfg);
    if (produced != current) {
        if (force) {
            std::cerr << "warning: config hash mismatch with " << artifact_dir
                      << " (" << produced << " vs " << current << "), forced\n";
            return;
        }
        throw ConfigError("artifacts in " + artifact_dir +
                          " were produced under config hash " + produced +
                          " but the current config hashes to " + current +
                          "; rerun the earlier stage or pass --force");
    }
}

DatasetSplit make_pipeline_split(const std::vector<std::string>& labels,
                                 double ratio, uint64_t seed,
                                 const std::string& holdout_label) {
    if (holdout_label.empty()) return split_train_test(labels, ratio, seed);
    auto [kept, hold] = hold_out_class(labels, holdout_label);
    (void)hold;
    std::vector<std::string> kept_labels;
    kept_labels.reserve(kept.size());
    for (size_t i : kept) kept_labels.push_back(labels[i]);
    DatasetSplit sub = split_train_test(kept_labels, ratio, seed);
    DatasetSplit out;
    out.holdout_class = holdout_label;
    out.train.reserve(sub.train.size());
    out.test.reserve(sub.test.size());
    for (size_t i : sub.train) out.train.push_back(kept[i]);
    for (size_t i : sub.test) out.test.push_back(kept[i]);
    return out;
}

std::vector<size_t> holdout_indices(const std::vector<std::string>& labels,
                                    const DatasetSplit& split) {
    std::vector<size_t> out;
    if (!split.holdout_class) return out;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == *split.holdout_class) out.push_back(i);
    return out;
}

void write_split_json(const std::string& path, const DatasetSplit& split) {
    ordered_json j;
    j["train"] = split.train;
    j["test"] = split.test;
    j["holdout_class"] = split.holdout_class ? ordered_json(*split.holdout_class)
                                             : ordered_json(nullptr);
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write split file: " + path);
    out << j.dump(2) << '\n';
}

DatasetSplit read_split_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open split file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("invalid split JSON: " + std::string(e.what()));
    }
    DatasetSplit split;
    split.train = j.at("train").get<std::vector<size_t>>();
    split.test = j.at("test").get<std::vector<size_t>>();
    if (j.contains("holdout_class") && !j.at("holdout_class").is_null())
        split.holdout_class = j.at("holdout_class").get<std::string>();
    return split;
}

void write_embedded_csv(const std::string& path,
                        const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& embeddings) {
    if (labels.size() != embeddings.size())
        throw ShapeError("embedded CSV: label/embedding count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write embedded CSV: " + path);
    size_t dim = embeddings.empty() ? 0 : embeddings[0].size();
    out << "example_id,label";
    for (size_t c = 0; c < dim; ++c) out << ",e" << c;
    out << '\n';
    for (size_t i = 0; i < embeddings.size(); ++i) {
        out << i << ',' << labels[i];
        for (double x : embeddings[i]) out << ',' << format_double(x);
        out << '\n';
    }
}

EmbeddedTable read_embedded_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open embedded CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("embedded CSV is empty: " + path);
    EmbeddedTable table;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string id, label, tok;
        if (!std::getline(ls, id, ',') || !std::getline(ls, label, ','))
            throw RowError(line_no, "malformed embedded CSV row");
        std::vector<double> v;
        while (std::getline(ls, tok, ',')) {
            char* end = nullptr;
            double x = std::strtod(tok.c_str(), &end);
            if (end != tok.c_str() + tok.size())
                throw RowError(line_no, "bad embedding value: " + tok);
            v.push_back(x);
        }
        table.labels.push_back(label);
        table.embeddings.push_back(std::move(v));
    }
    return table;
}

std::vector<ClassProfile> resolve_profiles(const PipelineConfig& cfg) {
    std::vector<ClassProfile> profiles;
    if (!cfg.profiles_path.empty())
        profiles = profiles_from_json_file(cfg.profiles_path);
    else
        profiles = default_profiles(cfg.classes);
    if (cfg.near_dup && !profiles.empty())
        profiles.push_back(
            near_duplicate(profiles.front(), profiles.front().label + "_variant"));
    return profiles;
}

PipelineResult run_pipeline_on_flows(const PipelineConfig& cfg, FlowDataset flows) {
    PipelineResult r;
    r.flows = sort_flows(std::move(flows));
    r.graph = build_graph(r.flows, {cfg.alpha});
    r.table = embed_nodes(r.graph, cfg.fastrp());
    r.examples = make_examples(r.flows, r.table, cfg.window(), &r.build_summary);
    r.labels = example_labels(r.examples);
    r.split = make_pipeline_split(r.labels, cfg.split_ratio, cfg.seed, cfg.holdout);
    r.model = train(r.examples, r.split, cfg.trainer(), &r.train_log);
    r.embedded = embed_all(r.model, r.examples);
    return r;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    return run_pipeline_on_flows(cfg,
                                 generate_dataset(resolve_profiles(cfg),
                                                  cfg.flows_per_class, cfg.seed));
}

namespace {

std::vector<int> label_ids(const std::vector<std::string>& labels,
                           std::vector<std::string>* names_out) {
    std::map<std::string, int> ids;
    for (const auto& l : labels) ids.emplace(l, 0);
    int next = 0;
    std::vector<std::string> names;
    for (auto& [name, id] : ids) {
        id = next++;
        names.push_back(name);
    }
    std::vector<int> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(ids.at(l));
    if (names_out) *names_out = names;
    return out;
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (size_t i : idx) {
        if (i >= v.size()) throw ConfigError("split index out of range");
        out.push_back(v[i]);
    }
    return out;
}

}  // namespace

ClusterReport cluster_eval(const std::vector<std::vector<double>>& points,
                           const std::vector<std::string>& labels, uint64_t seed) {
    if (points.size() != labels.size())
        throw ConfigError("cluster_eval: point/label count mismatch");
    std::vector<std::string> names;
    std::vector<int> truth = label_ids(labels, &names);
    if (names.size() < 2)
        throw MetricError("cluster_eval needs at least 2 classes");

    ClusterReport r;
    r.points = points.size();
    r.classes = names.size();
    r.silhouette_truth = silhouette(points, truth);
    KMeansResult km = kmeans(points, names.size(), seed);
    r.silhouette_kmeans = silhouette(points, km.assignment);
    r.completeness = completeness(truth, km.assignment);
    r.homogeneity = homogeneity(truth, km.assignment);
    r.rand_index = rand_index(truth, km.assignment);
    r.adjusted_rand = adjusted_rand_index(truth, km.assignment);
    return r;
}

ZdtEval zdt_eval(const std::vector<std::vector<double>>& embedded,
                 const std::vector<std::string>& labels, const DatasetSplit& split,
                 size_t k, double threshold) {
    if (!split.holdout_class)
        throw ConfigError("zdt requires a split with a holdout class");
    std::vector<size_t> hold = holdout_indices(labels, split);
    if (hold.empty()) throw ConfigError("holdout class has no examples");

    ZdtEval ev;
    size_t n_train = split.train.size();
    ev.k_used = std::min(k, n_train);
    ev.k_clamped = ev.k_used != k;
    if (ev.k_clamped)
        std::cerr << "warning: k = " << k << " clamped to training size " << n_train
                  << "\n";

    KnnModel knn = knn_fit(take(embedded, split.train), take(labels, split.train),
                           ev.k_used);

    std::vector<std::vector<double>> queries = take(embedded, split.test);
    std::vector<uint8_t> truth(queries.size(), 0);
    ev.query_ids = split.test;
    for (size_t i : hold) {
        queries.push_back(embedded[i]);
        truth.push_back(1);
        ev.query_ids.push_back(i);
    }
    ev.result = zdt_scores(knn, queries, truth, threshold);
    auto [p, r] = precision_recall(truth, ev.result.zdt_probability, threshold);
    ev.precision = p;
    ev.recall = r;
    ev.pr_auc = pr_auc(truth, ev.result.zdt_probability);
    return ev;
}

CataResult cata_eval(const std::vector<std::vector<double>>& embedded,
                     const std::vector<std::string>& labels,
                     const DatasetSplit& split, size_t k) {
    if (!split.holdout_class)
        throw ConfigError("cata requires a split with a holdout class");
    std::vector<size_t> hold = holdout_indices(labels, split);
    if (hold.empty()) throw ConfigError("holdout class has no examples");
    size_t k_used = std::min(k, split.train.size());
    if (k_used != k)
        std::cerr << "warning: k = " << k << " clamped to training size "
                  << split.train.size() << "\n";
    KnnModel knn =
        knn_fit(take(embedded, split.train), take(labels, split.train), k_used);
    return cata(knn, take(embedded, hold), *split.holdout_class);
}

ClassifyEval classify_eval(const std::vector<std::vector<double>>& embedded,
                           const std::vector<std::string>& labels,
                           const DatasetSplit& split, size_t rf_trees,
                           uint64_t seed) {
    RfConfig rf_cfg;
    rf_cfg.n_trees = rf_trees;
    rf_cfg.seed = seed;
    RandomForestModel rf =
        rf_fit(take(embedded, split.train), take(labels, split.train), rf_cfg);

    std::map<std::string, int> ids;
    for (size_t c = 0; c < rf.class_names.size(); ++c) ids[rf.class_names[c]] = int(c);

    std::vector<int> truth, predicted;
    std::vector<std::vector<double>> scores;
    for (size_t i : split.test) {
        auto it = ids.find(labels[i]);
        // Test examples of classes unseen by the forest cannot be scored
        // one-vs-rest; classification_report would reject them anyway.
        if (it == ids.end())
            throw ConfigError("test set contains class '" + labels[i] +
                              "' absent from training");
        truth.push_back(it->second);
        std::vector<double> probs = rf_predict_proba(rf, embedded[i]);
        int best = 0;
        for (size_t c = 1; c < probs.size(); ++c)
            if (probs[c] > probs[size_t(best)]) best = int(c);
        predicted.push_back(best);
        scores.push_back(std::move(probs));
    }
    ClassifyEval ev;
    ev.class_names = rf.class_names;
    ev.report = classification_report(truth, predicted, scores, rf.class_names);
    return ev;
}

RepeatedHoldoutResult repeated_holdout_classify(const std::vector<Example>& examples,
                                                const PipelineConfig& cfg) {
    std::vector<std::string> labels = example_labels(examples);
    std::set<std::string> class_set(labels.begin(), labels.end());
    std::vector<std::string> classes(class_set.begin(), class_set.end());
    if (classes.size() < 3)
        throw ConfigError("repeated holdout needs at least 3 classes");

    RepeatedHoldoutResult agg;
    for (size_t rep = 0; rep < cfg.repeats; ++rep) {
        const std::string& holdout = classes[rep % classes.size()];
        uint64_t rep_seed = cfg.seed + rep;

        // Stratified split over every class, holdout included: the embedder
        // never sees the holdout, the forest sees its embeddings.
        DatasetSplit full = split_train_test(labels, cfg.split_ratio, rep_seed);
        DatasetSplit embedder;
        embedder.holdout_class = holdout;
        for (size_t i : full.train)
            if (labels[i] != holdout) embedder.train.push_back(i);
        for (size_t i : full.test)
            if (labels[i] != holdout) embedder.test.push_back(i);

        TrainConfig tc = cfg.trainer();
        tc.seed = rep_seed;
        StpcnModel model = train(examples, embedder, tc);
        std::vector<std::vector<double>> embedded = embed_all(model, examples);

        ClassifyEval ev = classify_eval(embedded, labels, full, cfg.rf_trees, rep_seed);
        agg.repeats.push_back({holdout, ev.report});

        agg.mean_macro_precision += ev.report.macro_precision;
        agg.mean_macro_recall += ev.report.macro_recall;
        agg.mean_macro_auc += ev.report.macro_auc;
        agg.mean_min_precision += ev.report.min_precision;
        agg.mean_min_recall += ev.report.min_recall;
        agg.mean_min_auc += ev.report.min_auc;
    }
    double n = double(agg.repeats.size());
    agg.mean_macro_precision /= n;
    agg.mean_macro_recall /= n;
    agg.mean_macro_auc /= n;
    agg.mean_min_precision /= n;
    agg.mean_min_recall /= n;
    agg.mean_min_auc /= n;
    return agg;
}

std::string cluster_report_to_json(const ClusterReport& r) {
    ordered_json j{{"points", r.points},
                   {"classes", r.classes},
                   {"silhouette", r.silhouette_truth},
                   {"silhouette_kmeans", r.silhouette_kmeans},
                   {"completeness", r.completeness},
                   {"homogeneity", r.homogeneity},
                   {"rand_index", r.rand_index},
                   {"adjusted_rand", r.adjusted_rand}};
    return j.dump(2) + "\n";
}

std::string zdt_report_to_json(const ZdtEval& r) {
    ordered_json j{{"precision", r.precision},
                   {"recall", r.recall},
                   {"pr_auc", r.pr_auc},
                   {"threshold", r.result.threshold},
                   {"k", r.k_used},
                   {"k_clamped", r.k_clamped},
                   {"queries", r.result.zdt_probability.size()}};
    return j.dump(2) + "\n";
}

std::string classification_report_to_json(const ClassificationReport& r) {
    ordered_json per = ordered_json::array();
    for (const auto& pc : r.per_class)
        per.push_back(ordered_json{{"label", pc.label},
                                   {"precision", pc.precision},
                                   {"recall", pc.recall},
                                   {"pr_auc", pc.pr_auc}});
    ordered_json j{{"macro_precision", r.macro_precision},
                   {"macro_recall", r.macro_recall},
                   {"macro_auc", r.macro_auc},
                   {"min_precision", r.min_precision},
                   {"min_recall", r.min_recall},
                   {"min_auc", r.min_auc},
                   {"per_class", per},
                   {"skipped", r.skipped}};
    return j.dump(2) + "\n";
}

void write_zdt_csv(const std::string& path, const ZdtEval& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write ZDT report: " + path);
    out << "example_id,true_is_holdout,zdt_probability\n";
    for (size_t i = 0; i < r.result.zdt_probability.size(); ++i)
        out << r.query_ids[i] << ',' << int(r.result.is_holdout[i]) << ','
            << format_double(r.result.zdt_probability[i]) << '\n';
}

void write_cata_csv(const std::string& path, const CataResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write CATA report: " + path);
    out << "holdout_class,rank,attributed_class,frequency,avg_probability\n";
    for (size_t i = 0; i < r.top.size(); ++i)
        out << r.holdout_class << ',' << (i + 1) << ',' << r.top[i].attributed_class
            << ',' << r.top[i].frequency << ','
            << format_double(r.top[i].avg_probability) << '\n';
}

void write_pr_curve_csv(const std::string& path, const std::vector<PrPoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write PR curve: " + path);
    out << "threshold,precision,recall\n";
    for (const auto& pt : curve)
        out << format_double(pt.threshold) << ',' << format_double(pt.precision) << ','
            << format_double(pt.recall) << '\n';
}

}  // namespace flowembed
