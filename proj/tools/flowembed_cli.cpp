// flowembed: turn labeled network-flow records into behavior embeddings and
// evaluate them on classification, zero-day detection and closest-attack-type
// attribution. Each subcommand persists its outputs under --out together with
// the resolved config, so stages compose across separate invocations.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowembed/pipeline.hpp"

namespace fs = std::filesystem;
using namespace flowembed;
using nlohmann::ordered_json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    bool force = false;
};

// Every subcommand accepts the full hyperparameter set: stages composed from
// separate invocations must resolve to the same config hash, so the flags
// have to be expressible everywhere.
void add_common(CLI::App* cmd, CommonArgs& common, PipelineConfig& cfg) {
    cmd->add_option("--config", common.config_path, "JSON config file")
        ->envname("FLOWEMBED_CONFIG");
    cmd->add_option("--out", common.out_dir, "output directory")
        ->envname("FLOWEMBED_OUT");
    cmd->add_flag("--force", common.force,
                  "compose artifacts even when config hashes mismatch");
    cmd->add_option("--seed", cfg.seed, "global seed")->envname("FLOWEMBED_SEED");

    cmd->add_option("--classes", cfg.classes, "number of synthetic classes");
    cmd->add_option("--flows-per-class", cfg.flows_per_class, "flows per class");
    cmd->add_option("--profiles", cfg.profiles_path, "profile JSON file");
    cmd->add_option("--alpha", cfg.alpha, "edge-weight decay base");
    cmd->add_option("--epsilon", cfg.epsilon, "embedding dimension");
    cmd->add_option("--weights", cfg.iteration_weights,
                    "iteration weights (degree 0..d)");
    cmd->add_option("--sparsity", cfg.sparsity, "very-sparse projection s");
    cmd->add_option("--beta", cfg.beta, "flows per window");
    cmd->add_option("--gamma", cfg.gamma, "IPs per example");
    cmd->add_option("--stride", cfg.stride, "window stride (0 = beta/2)");
    cmd->add_option("--ratio", cfg.split_ratio, "train fraction");
    cmd->add_option("--holdout", cfg.holdout, "class excluded from training")
        ->envname("FLOWEMBED_HOLDOUT");
    cmd->add_option("--scale", cfg.scale_s, "logit scale s");
    cmd->add_option("--margin", cfg.margin_m, "angular margin m (radians)");
    cmd->add_option("--lr", cfg.learning_rate, "learning rate");
    cmd->add_option("--momentum", cfg.momentum, "optimizer momentum");
    cmd->add_option("--batch", cfg.batch_size, "batch size");
    cmd->add_option("--epochs", cfg.epochs, "training epochs");
    cmd->add_option("--k", cfg.knn_k, "neighbor count");
    cmd->add_option("--trees", cfg.rf_trees, "forest size");
    cmd->add_option("--threshold", cfg.zdt_threshold, "ZDT decision threshold")
        ->envname("FLOWEMBED_THRESHOLD");
    cmd->add_option("--repeats", cfg.repeats, "holdout repetitions")
        ->envname("FLOWEMBED_REPEATS");
}

// --config is parsed first, then explicit flags override it.
void load_config_file(const CommonArgs& common, PipelineConfig& cfg) {
    if (common.config_path.empty()) return;
    PipelineConfig file_cfg = config_from_json_file(common.config_path);
    // Preserve flag overrides: CLI11 already wrote parsed values into cfg,
    // so merge by re-parsing is not possible here. Instead the file is the
    // base and flags win only when they differ from defaults; subcommands
    // that need finer control pass flags after the file.
    PipelineConfig defaults;
    auto keep = [&](auto member) {
        return cfg.*member != defaults.*member ? cfg.*member : file_cfg.*member;
    };
    PipelineConfig merged = file_cfg;
    merged.classes = keep(&PipelineConfig::classes);
    merged.flows_per_class = keep(&PipelineConfig::flows_per_class);
    merged.near_dup = cfg.near_dup || file_cfg.near_dup;
    merged.profiles_path = keep(&PipelineConfig::profiles_path);
    merged.alpha = keep(&PipelineConfig::alpha);
    merged.epsilon = keep(&PipelineConfig::epsilon);
    merged.iteration_weights = cfg.iteration_weights != defaults.iteration_weights
                                   ? cfg.iteration_weights
                                   : file_cfg.iteration_weights;
    merged.sparsity = keep(&PipelineConfig::sparsity);
    merged.beta = keep(&PipelineConfig::beta);
    merged.gamma = keep(&PipelineConfig::gamma);
    merged.stride = keep(&PipelineConfig::stride);
    merged.split_ratio = keep(&PipelineConfig::split_ratio);
    merged.holdout = keep(&PipelineConfig::holdout);
    merged.scale_s = keep(&PipelineConfig::scale_s);
    merged.margin_m = keep(&PipelineConfig::margin_m);
    merged.learning_rate = keep(&PipelineConfig::learning_rate);
    merged.momentum = keep(&PipelineConfig::momentum);
    merged.batch_size = keep(&PipelineConfig::batch_size);
    merged.epochs = keep(&PipelineConfig::epochs);
    merged.knn_k = keep(&PipelineConfig::knn_k);
    merged.rf_trees = keep(&PipelineConfig::rf_trees);
    merged.zdt_threshold = keep(&PipelineConfig::zdt_threshold);
    merged.repeats = keep(&PipelineConfig::repeats);
    merged.seed = keep(&PipelineConfig::seed);
    cfg = merged;
}

std::string in_dir(const std::string& dir_or_file, const char* name) {
    fs::path p(dir_or_file);
    if (fs::is_directory(p)) p /= name;
    return p.string();
}

std::string artifact_dir(const std::string& dir_or_file) {
    fs::path p(dir_or_file);
    if (fs::is_directory(p)) return p.string();
    return p.parent_path().string();
}

void finish_outputs(const CommonArgs& common, const PipelineConfig& cfg) {
    write_run_config(common.out_dir, cfg);
}

LoadedExamples load_examples_checked(const std::string& examples_in,
                                     const PipelineConfig& cfg, bool force) {
    check_artifact_compat(artifact_dir(examples_in), cfg, force);
    return load_examples(in_dir(examples_in, "examples.stpx"));
}

int run_synth(const CommonArgs& common, const PipelineConfig& cfg) {
    std::vector<ClassProfile> profiles = resolve_profiles(cfg);
    if (cfg.flows_per_class < cfg.beta)
        std::cerr << "warning: flows_per_class " << cfg.flows_per_class
                  << " is below beta " << cfg.beta
                  << "; streams will be too short to window\n";
    FlowDataset ds = generate_dataset(profiles, cfg.flows_per_class, cfg.seed);
    fs::create_directories(common.out_dir);
    write_flow_csv((fs::path(common.out_dir) / "flows.csv").string(), ds);
    profiles_to_json_file((fs::path(common.out_dir) / "profiles.json").string(),
                          profiles);
    finish_outputs(common, cfg);
    std::cout << "wrote " << ds.size() << " flows over " << profiles.size()
              << " classes to " << common.out_dir << "/flows.csv\n";
    return 0;
}

int run_ingest(const CommonArgs& common, const PipelineConfig& cfg,
               const std::string& input) {
    FlowDataset ds = sort_flows(parse_flow_csv(in_dir(input, "flows.csv")));
    fs::create_directories(common.out_dir);
    write_flow_csv((fs::path(common.out_dir) / "flows.csv").string(), ds);
    finish_outputs(common, cfg);
    ordered_json summary{{"records", ds.size()}, {"classes", ds.classes()}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_build_graph(const CommonArgs& common, const PipelineConfig& cfg,
                    const std::string& input) {
    check_artifact_compat(artifact_dir(input), cfg, common.force);
    FlowDataset ds = sort_flows(parse_flow_csv(in_dir(input, "flows.csv")));
    ConnectionGraph g = build_graph(ds, {cfg.alpha});
    fs::create_directories(common.out_dir);
    write_graph_csv((fs::path(common.out_dir) / "graph.csv").string(), g);
    finish_outputs(common, cfg);
    std::cout << "graph: " << g.node_count() << " nodes, " << g.edge_count()
              << " edges\n";
    return 0;
}

int run_embed_nodes(const CommonArgs& common, const PipelineConfig& cfg,
                    const std::string& graph_in) {
    check_artifact_compat(artifact_dir(graph_in), cfg, common.force);
    ConnectionGraph g = read_graph_csv(in_dir(graph_in, "graph.csv"));
    NodeEmbeddingTable table = embed_nodes(g, cfg.fastrp());
    fs::create_directories(common.out_dir);
    write_embeddings_csv((fs::path(common.out_dir) / "embeddings.csv").string(),
                         table);
    finish_outputs(common, cfg);
    std::cout << "embedded " << table.size() << " nodes at dimension " << table.dim
              << "\n";
    return 0;
}

int run_make_examples(const CommonArgs& common, const PipelineConfig& cfg,
                      const std::string& flows_in, const std::string& emb_in) {
    check_artifact_compat(artifact_dir(flows_in), cfg, common.force);
    check_artifact_compat(artifact_dir(emb_in), cfg, common.force);
    FlowDataset ds = sort_flows(parse_flow_csv(in_dir(flows_in, "flows.csv")));
    NodeEmbeddingTable table =
        read_embeddings_csv(in_dir(emb_in, "embeddings.csv"));
    if (table.dim != cfg.epsilon)
        throw ConfigError("node embeddings have dimension " +
                          std::to_string(table.dim) + " but epsilon is " +
                          std::to_string(cfg.epsilon));
    ExampleBuildSummary summary;
    std::vector<Example> examples = make_examples(ds, table, cfg.window(), &summary);
    fs::create_directories(common.out_dir);
    save_examples((fs::path(common.out_dir) / "examples.stpx").string(), examples,
                  cfg.gamma, cfg.epsilon);
    finish_outputs(common, cfg);

    ordered_json per_class(summary.per_class);
    ordered_json report{{"examples", examples.size()},
                        {"per_class", per_class},
                        {"short_streams", ordered_json(summary.short_streams)},
                        {"unknown_ip_rows", summary.unknown_ip_rows}};
    std::cout << report.dump(2) << "\n";
    return 0;
}

int run_train(const CommonArgs& common, const PipelineConfig& cfg,
              const std::string& examples_in) {
    LoadedExamples loaded = load_examples_checked(examples_in, cfg, common.force);
    if (loaded.gamma != cfg.gamma || loaded.epsilon != cfg.epsilon)
        throw ConfigError("examples were built with gamma/epsilon " +
                          std::to_string(loaded.gamma) + "/" +
                          std::to_string(loaded.epsilon) +
                          " but the config says " + std::to_string(cfg.gamma) + "/" +
                          std::to_string(cfg.epsilon));
    std::vector<std::string> labels = example_labels(loaded.examples);
    DatasetSplit split =
        make_pipeline_split(labels, cfg.split_ratio, cfg.seed, cfg.holdout);

    TrainLog log;
    StpcnModel model = train(loaded.examples, split, cfg.trainer(), &log);

    fs::create_directories(common.out_dir);
    save_model(model, (fs::path(common.out_dir) / "model.stpcn").string(),
               config_hash(cfg));
    write_split_json((fs::path(common.out_dir) / "split.json").string(), split);
    {
        std::ofstream tl(fs::path(common.out_dir) / "train_log.csv");
        tl << "epoch,mean_loss\n";
        char buf[64];
        for (size_t e = 0; e < log.epoch_mean_loss.size(); ++e) {
            std::snprintf(buf, sizeof(buf), "%.17g", log.epoch_mean_loss[e]);
            tl << (e + 1) << ',' << buf << '\n';
        }
    }
    finish_outputs(common, cfg);
    std::cout << "trained on " << split.train.size() << " examples ("
              << model.class_labels.size() << " classes); final epoch loss "
              << log.epoch_mean_loss.back() << "\n";
    return 0;
}

int run_embed(const CommonArgs& common, const PipelineConfig& cfg,
              const std::string& model_in, const std::string& examples_in) {
    check_artifact_compat(artifact_dir(model_in), cfg, common.force);
    LoadedExamples loaded = load_examples_checked(examples_in, cfg, common.force);
    StpcnModel model = load_model(in_dir(model_in, "model.stpcn"));
    if (model.gamma != loaded.gamma || model.epsilon != loaded.epsilon)
        throw ConfigError("model gamma/epsilon " + std::to_string(model.gamma) + "/" +
                          std::to_string(model.epsilon) +
                          " does not match examples " + std::to_string(loaded.gamma) +
                          "/" + std::to_string(loaded.epsilon));
    std::vector<std::vector<double>> embedded = embed_all(model, loaded.examples);
    fs::create_directories(common.out_dir);
    write_embedded_csv((fs::path(common.out_dir) / "embedded.csv").string(),
                       example_labels(loaded.examples), embedded);
    // Carry the training split along so downstream heads find it in place.
    fs::path split_src = fs::path(artifact_dir(model_in)) / "split.json";
    if (fs::exists(split_src))
        fs::copy_file(split_src, fs::path(common.out_dir) / "split.json",
                      fs::copy_options::overwrite_existing);
    finish_outputs(common, cfg);
    std::cout << "embedded " << embedded.size() << " examples\n";
    return 0;
}

struct EmbeddedInputs {
    EmbeddedTable table;
    DatasetSplit split;
};

EmbeddedInputs load_embedded(const std::string& emb_in, const std::string& split_in,
                             const PipelineConfig& cfg, bool force) {
    check_artifact_compat(artifact_dir(emb_in), cfg, force);
    EmbeddedInputs in;
    in.table = read_embedded_csv(in_dir(emb_in, "embedded.csv"));
    std::string split_path = split_in.empty()
                                 ? in_dir(emb_in, "split.json")
                                 : in_dir(split_in, "split.json");
    in.split = read_split_json(split_path);
    return in;
}

int run_classify(const CommonArgs& common, const PipelineConfig& cfg,
                 const std::string& emb_in, const std::string& split_in,
                 const std::string& examples_in, bool with_holdout) {
    fs::create_directories(common.out_dir);
    if (with_holdout) {
        LoadedExamples loaded = load_examples_checked(examples_in, cfg, common.force);
        RepeatedHoldoutResult agg = repeated_holdout_classify(loaded.examples, cfg);
        ordered_json reps = ordered_json::array();
        for (const auto& rep : agg.repeats)
            reps.push_back(ordered_json{
                {"holdout", rep.holdout},
                {"report",
                 ordered_json::parse(classification_report_to_json(rep.report))}});
        ordered_json j{{"repeats", reps},
                       {"mean_macro_precision", agg.mean_macro_precision},
                       {"mean_macro_recall", agg.mean_macro_recall},
                       {"mean_macro_auc", agg.mean_macro_auc},
                       {"mean_min_precision", agg.mean_min_precision},
                       {"mean_min_recall", agg.mean_min_recall},
                       {"mean_min_auc", agg.mean_min_auc}};
        std::ofstream out(fs::path(common.out_dir) / "classification.json");
        out << j.dump(2) << "\n";
        finish_outputs(common, cfg);
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    EmbeddedInputs in = load_embedded(emb_in, split_in, cfg, common.force);
    ClassifyEval ev =
        classify_eval(in.table.embeddings, in.table.labels, in.split, cfg.rf_trees,
                      cfg.seed);
    std::string report = classification_report_to_json(ev.report);
    std::ofstream out(fs::path(common.out_dir) / "classification.json");
    out << report;
    finish_outputs(common, cfg);
    std::cout << report;
    return 0;
}

int run_zdt(const CommonArgs& common, const PipelineConfig& cfg,
            const std::string& emb_in, const std::string& split_in) {
    EmbeddedInputs in = load_embedded(emb_in, split_in, cfg, common.force);
    ZdtEval ev = zdt_eval(in.table.embeddings, in.table.labels, in.split, cfg.knn_k,
                          cfg.zdt_threshold);
    fs::create_directories(common.out_dir);
    write_zdt_csv((fs::path(common.out_dir) / "zdt_report.csv").string(), ev);
    std::vector<uint8_t> truth = ev.result.is_holdout;
    write_pr_curve_csv((fs::path(common.out_dir) / "pr_curve.csv").string(),
                       pr_curve(truth, ev.result.zdt_probability));
    std::string report = zdt_report_to_json(ev);
    std::ofstream out(fs::path(common.out_dir) / "zdt.json");
    out << report;
    finish_outputs(common, cfg);
    std::cout << report;
    return 0;
}

int run_cata(const CommonArgs& common, const PipelineConfig& cfg,
             const std::string& emb_in, const std::string& split_in) {
    EmbeddedInputs in = load_embedded(emb_in, split_in, cfg, common.force);
    CataResult r = cata_eval(in.table.embeddings, in.table.labels, in.split,
                             cfg.knn_k);
    fs::create_directories(common.out_dir);
    write_cata_csv((fs::path(common.out_dir) / "cata_report.csv").string(), r);
    finish_outputs(common, cfg);
    for (size_t i = 0; i < r.top.size(); ++i)
        std::cout << r.holdout_class << " -> " << r.top[i].attributed_class
                  << " (rank " << (i + 1) << ", won " << r.top[i].frequency
                  << ", avg prob " << r.top[i].avg_probability << ")\n";
    return 0;
}

int run_eval(const CommonArgs& common, const PipelineConfig& cfg,
             const std::string& emb_in, const std::string& split_in,
             const std::string& subset) {
    EmbeddedInputs in = load_embedded(emb_in, split_in, cfg, common.force);
    std::vector<std::vector<double>> points;
    std::vector<std::string> labels;
    if (subset == "test") {
        for (size_t i : in.split.test) {
            points.push_back(in.table.embeddings[i]);
            labels.push_back(in.table.labels[i]);
        }
    } else if (subset == "all") {
        points = in.table.embeddings;
        labels = in.table.labels;
    } else {
        throw ConfigError("unknown eval subset: " + subset);
    }
    ClusterReport report = cluster_eval(points, labels, cfg.seed);
    std::string text = cluster_report_to_json(report);
    fs::create_directories(common.out_dir);
    std::ofstream out(fs::path(common.out_dir) / "metrics.json");
    out << text;
    finish_outputs(common, cfg);
    std::cout << text;
    return 0;
}

int run_project(const CommonArgs& common, const PipelineConfig& cfg,
                const std::string& emb_in, const std::string& split_in) {
    EmbeddedInputs in = load_embedded(emb_in, split_in, cfg, common.force);
    auto coords = pca3_projection(in.table.embeddings);
    fs::create_directories(common.out_dir);
    std::ofstream out(fs::path(common.out_dir) / "projection.csv",
                      std::ios::binary);
    out << "example_id,label,x,y,z\n";
    char buf[64];
    for (size_t i = 0; i < coords.size(); ++i) {
        out << i << ',' << in.table.labels[i];
        for (double x : coords[i]) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << ',' << buf;
        }
        out << '\n';
    }
    finish_outputs(common, cfg);
    std::cout << "projected " << coords.size() << " embeddings to "
              << common.out_dir << "/projection.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"behavior embeddings of malware network flows"};
    app.require_subcommand(1);

    PipelineConfig cfg;
    CommonArgs common;
    std::string input, flows_in, emb_in, graph_in, model_in, examples_in, split_in;
    std::string subset = "test";
    bool with_holdout = false;

    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic flow CSV");
    add_common(synth, common, cfg);
    synth->add_flag("--near-dup", cfg.near_dup,
                    "append a near-duplicate of the first profile");

    auto* ingest = app.add_subcommand("ingest", "parse, validate and sort a flow CSV");
    add_common(ingest, common, cfg);
    ingest->add_option("--input", input, "flow CSV (or a directory with flows.csv)")
        ->required();

    auto* build_graph_cmd =
        app.add_subcommand("build-graph", "build the weighted connection graph");
    add_common(build_graph_cmd, common, cfg);
    build_graph_cmd->add_option("--input", input, "ingested flows")->required();

    auto* embed_nodes_cmd =
        app.add_subcommand("embed-nodes", "compute node embeddings over the graph");
    add_common(embed_nodes_cmd, common, cfg);
    embed_nodes_cmd->add_option("--graph", graph_in, "graph directory")->required();

    auto* make_examples_cmd = app.add_subcommand(
        "make-examples", "slide windows into (F, A, label) examples");
    add_common(make_examples_cmd, common, cfg);
    make_examples_cmd->add_option("--flows", flows_in, "ingested flows")->required();
    make_examples_cmd->add_option("--embeddings", emb_in, "node embeddings")
        ->required();

    auto* train_cmd = app.add_subcommand("train", "train the embedding model");
    add_common(train_cmd, common, cfg);
    train_cmd->add_option("--examples", examples_in, "example directory")->required();

    auto* embed_cmd =
        app.add_subcommand("embed", "embed examples with a trained model");
    add_common(embed_cmd, common, cfg);
    embed_cmd->add_option("--model", model_in, "model directory")->required();
    embed_cmd->add_option("--examples", examples_in, "example directory")->required();

    auto* classify_cmd = app.add_subcommand(
        "classify", "random-forest classification over frozen embeddings");
    add_common(classify_cmd, common, cfg);
    classify_cmd->add_option("--embedded", emb_in, "embedded example directory");
    classify_cmd->add_option("--split", split_in, "split directory (default: embedded)");
    classify_cmd->add_option("--examples", examples_in,
                             "example directory (repeated-holdout mode)");
    classify_cmd->add_flag("--with-holdout", with_holdout,
                           "repeated-holdout experiment over --examples");

    auto* zdt_cmd = app.add_subcommand("zdt", "zero-day threat detection scores");
    add_common(zdt_cmd, common, cfg);
    zdt_cmd->add_option("--embedded", emb_in, "embedded example directory")
        ->required();
    zdt_cmd->add_option("--split", split_in, "split directory (default: embedded)");

    auto* cata_cmd =
        app.add_subcommand("cata", "closest attack type attribution for the holdout");
    add_common(cata_cmd, common, cfg);
    cata_cmd->add_option("--embedded", emb_in, "embedded example directory")
        ->required();
    cata_cmd->add_option("--split", split_in, "split directory (default: embedded)");

    auto* eval_cmd =
        app.add_subcommand("eval", "cluster metrics over frozen embeddings");
    add_common(eval_cmd, common, cfg);
    eval_cmd->add_option("--embedded", emb_in, "embedded example directory")
        ->required();
    eval_cmd->add_option("--split", split_in, "split directory (default: embedded)");
    eval_cmd->add_option("--subset", subset, "test | all");

    auto* project_cmd =
        app.add_subcommand("project", "3-D principal-component projection");
    add_common(project_cmd, common, cfg);
    project_cmd->add_option("--embedded", emb_in, "embedded example directory")
        ->required();
    project_cmd->add_option("--split", split_in, "split directory (default: embedded)");

    CLI11_PARSE(app, argc, argv);

    try {
        load_config_file(common, cfg);
        if (synth->parsed()) return run_synth(common, cfg);
        if (ingest->parsed()) return run_ingest(common, cfg, input);
        if (build_graph_cmd->parsed()) return run_build_graph(common, cfg, input);
        if (embed_nodes_cmd->parsed()) return run_embed_nodes(common, cfg, graph_in);
        if (make_examples_cmd->parsed())
            return run_make_examples(common, cfg, flows_in, emb_in);
        if (train_cmd->parsed()) return run_train(common, cfg, examples_in);
        if (embed_cmd->parsed()) return run_embed(common, cfg, model_in, examples_in);
        if (classify_cmd->parsed())
            return run_classify(common, cfg, emb_in, split_in, examples_in,
                                with_holdout);
        if (zdt_cmd->parsed()) return run_zdt(common, cfg, emb_in, split_in);
        if (cata_cmd->parsed()) return run_cata(common, cfg, emb_in, split_in);
        if (eval_cmd->parsed()) return run_eval(common, cfg, emb_in, split_in, subset);
        if (project_cmd->parsed()) return run_project(common, cfg, emb_in, split_in);
    } catch (const std::exception& e) {
        ordered_json err{{"error", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
