// Python bindings over the core pipeline: flow ingest, graph construction,
// node embeddings, window examples, the conv embedder, downstream heads and
// cluster metrics. Matrices cross the boundary as numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flowembed/pipeline.hpp"

namespace py = pybind11;
using namespace flowembed;

namespace {

py::array_t<double> matrix_to_numpy(const std::vector<std::vector<double>>& rows) {
    size_t n = rows.size();
    size_t dim = n ? rows[0].size() : 0;
    py::array_t<double> out({n, dim});
    auto buf = out.mutable_unchecked<2>();
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < dim; ++j) buf(i, j) = rows[i][j];
    return out;
}

std::vector<std::vector<double>> numpy_to_matrix(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw ShapeError("expected a 2-D array");
    auto buf = arr.unchecked<2>();
    std::vector<std::vector<double>> rows(size_t(arr.shape(0)),
                                          std::vector<double>(size_t(arr.shape(1))));
    for (py::ssize_t i = 0; i < arr.shape(0); ++i)
        for (py::ssize_t j = 0; j < arr.shape(1); ++j)
            rows[size_t(i)][size_t(j)] = buf(i, j);
    return rows;
}

std::vector<ClassProfile> profiles_for(size_t classes, bool near_dup) {
    std::vector<ClassProfile> profiles = default_profiles(classes);
    if (near_dup)
        profiles.push_back(
            near_duplicate(profiles.front(), profiles.front().label + "_variant"));
    return profiles;
}

TrainConfig train_config_from_kwargs(double scale_s, double margin_m, double lr,
                                     double momentum, size_t batch_size,
                                     size_t epochs, uint64_t seed) {
    TrainConfig cfg;
    cfg.scale_s = scale_s;
    cfg.margin_m = margin_m;
    cfg.learning_rate = lr;
    cfg.momentum = momentum;
    cfg.batch_size = batch_size;
    cfg.epochs = epochs;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(flowembed, m) {
    m.doc() = "behavior embeddings of malware network flows";

    py::register_exception<SchemaError>(m, "SchemaError");
    py::register_exception<RowError>(m, "RowError");
    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<ShapeError>(m, "ShapeErrorCpp");
    py::register_exception<FormatError>(m, "FormatError");
    py::register_exception<MetricError>(m, "MetricError");

    py::class_<FlowRecord>(m, "FlowRecord")
        .def(py::init<>())
        .def_readwrite("timestamp_us", &FlowRecord::timestamp_us)
        .def_readwrite("src_ip", &FlowRecord::src_ip)
        .def_readwrite("dst_ip", &FlowRecord::dst_ip)
        .def_readwrite("src_port", &FlowRecord::src_port)
        .def_readwrite("dst_port", &FlowRecord::dst_port)
        .def_readwrite("duration_s", &FlowRecord::duration_s)
        .def_readwrite("src_bytes", &FlowRecord::src_bytes)
        .def_readwrite("dst_bytes", &FlowRecord::dst_bytes)
        .def_readwrite("label", &FlowRecord::label);

    py::class_<FlowDataset>(m, "FlowDataset")
        .def(py::init<>())
        .def_readwrite("records", &FlowDataset::records)
        .def("classes", &FlowDataset::classes)
        .def("__len__", &FlowDataset::size);

    m.def("parse_flow_csv", &parse_flow_csv, py::arg("path"));
    m.def("sort_flows", &sort_flows, py::arg("dataset"));
    m.def("write_flow_csv", &write_flow_csv, py::arg("path"), py::arg("dataset"));
    m.def(
        "generate_dataset",
        [](size_t classes, size_t flows_per_class, uint64_t seed, bool near_dup) {
            return generate_dataset(profiles_for(classes, near_dup), flows_per_class,
                                    seed);
        },
        py::arg("classes"), py::arg("flows_per_class"), py::arg("seed") = 0,
        py::arg("near_dup") = false);

    m.def(
        "edge_weight",
        [](double src_bytes, double dst_bytes, double duration_s, double alpha) {
            FlowRecord r;
            r.src_bytes = uint64_t(src_bytes);
            r.dst_bytes = uint64_t(dst_bytes);
            r.duration_s = duration_s;
            return edge_weight(r, {alpha});
        },
        py::arg("src_bytes"), py::arg("dst_bytes"), py::arg("duration_s"),
        py::arg("alpha") = 1.15);

    py::class_<ConnectionGraph>(m, "ConnectionGraph")
        .def_readonly("ips", &ConnectionGraph::ips)
        .def("node_count", &ConnectionGraph::node_count)
        .def("edge_count", &ConnectionGraph::edge_count)
        .def("neighbors", [](const ConnectionGraph& g, uint32_t node) {
            return neighbors(g, node);
        });

    m.def(
        "build_graph",
        [](const FlowDataset& ds, double alpha) {
            return build_graph(ds, {alpha});
        },
        py::arg("dataset"), py::arg("alpha") = 1.15);

    py::class_<NodeEmbeddingTable>(m, "NodeEmbeddingTable")
        .def_readonly("ips", &NodeEmbeddingTable::ips)
        .def_property_readonly(
            "vectors",
            [](const NodeEmbeddingTable& t) { return matrix_to_numpy(t.vectors); })
        .def("__len__", &NodeEmbeddingTable::size);

    m.def(
        "embed_nodes",
        [](const ConnectionGraph& g, size_t epsilon,
           const std::vector<double>& weights, double sparsity, uint64_t seed) {
            return embed_nodes(g, {epsilon, weights, sparsity, seed});
        },
        py::arg("graph"), py::arg("epsilon") = 32,
        py::arg("weights") = std::vector<double>{1.0, 0.5, 0.5},
        py::arg("sparsity") = 3.0, py::arg("seed") = 0);

    py::class_<Example>(m, "Example")
        .def_readonly("label", &Example::label)
        .def_readonly("window_start", &Example::window_start)
        .def_property_readonly("F",
                               [](const Example& e) {
                                   size_t gamma = size_t(
                                       std::lround(std::sqrt(double(e.A.size()))));
                                   size_t epsilon =
                                       gamma ? e.F.size() / gamma : 0;
                                   py::array_t<double> out({gamma, epsilon});
                                   std::copy(e.F.begin(), e.F.end(),
                                             out.mutable_data());
                                   return out;
                               })
        .def_property_readonly("A", [](const Example& e) {
            size_t gamma = size_t(std::lround(std::sqrt(double(e.A.size()))));
            py::array_t<uint8_t> out({gamma, gamma});
            std::copy(e.A.begin(), e.A.end(), out.mutable_data());
            return out;
        });

    m.def(
        "make_examples",
        [](const FlowDataset& ds, const NodeEmbeddingTable& table, size_t beta,
           size_t gamma, size_t stride) {
            WindowConfig cfg{beta, gamma, table.dim,
                             stride ? stride : std::max<size_t>(1, beta / 2)};
            return make_examples(ds, table, cfg);
        },
        py::arg("dataset"), py::arg("table"), py::arg("beta") = 128,
        py::arg("gamma") = 32, py::arg("stride") = 0);

    py::class_<DatasetSplit>(m, "DatasetSplit")
        .def_readonly("train", &DatasetSplit::train)
        .def_readonly("test", &DatasetSplit::test)
        .def_property_readonly("holdout_class", [](const DatasetSplit& s) {
            return s.holdout_class ? py::object(py::str(*s.holdout_class))
                                   : py::object(py::none());
        });

    m.def("split_examples", &make_pipeline_split, py::arg("labels"),
          py::arg("ratio") = 0.7, py::arg("seed") = 0,
          py::arg("holdout") = std::string());
    m.def("holdout_indices", &holdout_indices, py::arg("labels"), py::arg("split"));

    py::class_<StpcnModel>(m, "StpcnModel")
        .def_readonly("gamma", &StpcnModel::gamma)
        .def_readonly("epsilon", &StpcnModel::epsilon)
        .def_readonly("class_labels", &StpcnModel::class_labels)
        .def("embed",
             [](const StpcnModel& model, const Example& ex) {
                 std::vector<double> e = embed(model, ex);
                 py::array_t<double> out(py::ssize_t(e.size()));
                 std::copy(e.begin(), e.end(), out.mutable_data());
                 return out;
             })
        .def("embed_all", [](const StpcnModel& model,
                             const std::vector<Example>& examples) {
            return matrix_to_numpy(embed_all(model, examples));
        });

    m.def(
        "train",
        [](const std::vector<Example>& examples, const DatasetSplit& split,
           double scale_s, double margin_m, double lr, double momentum,
           size_t batch_size, size_t epochs, uint64_t seed) {
            TrainLog log;
            StpcnModel model =
                train(examples, split,
                      train_config_from_kwargs(scale_s, margin_m, lr, momentum,
                                               batch_size, epochs, seed),
                      &log);
            return py::make_tuple(std::move(model), log.epoch_mean_loss);
        },
        py::arg("examples"), py::arg("split"), py::arg("scale_s") = 30.0,
        py::arg("margin_m") = 0.5, py::arg("lr") = 1e-3, py::arg("momentum") = 0.9,
        py::arg("batch_size") = 64, py::arg("epochs") = 30, py::arg("seed") = 0);

    m.def("save_model", &save_model, py::arg("model"), py::arg("path"),
          py::arg("config_hash") = std::string());
    m.def(
        "load_model", [](const std::string& path) { return load_model(path); },
        py::arg("path"));

    // downstream heads
    py::class_<KnnModel>(m, "KnnModel")
        .def_readonly("k", &KnnModel::k)
        .def_readonly("class_names", &KnnModel::class_names)
        .def("predict_proba", [](const KnnModel& m_, py::array_t<double> q) {
            auto rows = numpy_to_matrix(q.ndim() == 1 ? q.reshape({py::ssize_t(1), q.shape(0)}) : q);
            return matrix_to_numpy([&] {
                std::vector<std::vector<double>> out;
                for (const auto& row : rows) out.push_back(knn_predict_proba(m_, row));
                return out;
            }());
        });

    m.def(
        "knn_fit",
        [](py::array_t<double> embeddings, const std::vector<std::string>& labels,
           size_t k) { return knn_fit(numpy_to_matrix(embeddings), labels, k); },
        py::arg("embeddings"), py::arg("labels"), py::arg("k") = 350);

    m.def(
        "zdt_scores",
        [](const KnnModel& model, py::array_t<double> queries,
           const std::vector<uint8_t>& truth, double threshold) {
            ZdtResult r =
                zdt_scores(model, numpy_to_matrix(queries), truth, threshold);
            return py::dict(py::arg("zdt_probability") = r.zdt_probability,
                            py::arg("is_holdout") = r.is_holdout,
                            py::arg("predicted") = r.predicted);
        },
        py::arg("model"), py::arg("queries"), py::arg("truth"),
        py::arg("threshold") = 0.5);

    m.def(
        "cata",
        [](const KnnModel& model, py::array_t<double> holdout,
           const std::string& label) {
            CataResult r = cata(model, numpy_to_matrix(holdout), label);
            py::list top;
            for (const auto& e : r.top)
                top.append(py::dict(py::arg("attributed_class") = e.attributed_class,
                                    py::arg("frequency") = e.frequency,
                                    py::arg("avg_probability") = e.avg_probability));
            return top;
        },
        py::arg("model"), py::arg("holdout_embeddings"), py::arg("holdout_label"));

    py::class_<RandomForestModel>(m, "RandomForestModel")
        .def_readonly("class_names", &RandomForestModel::class_names)
        .def("predict_proba",
             [](const RandomForestModel& m_, py::array_t<double> q) {
                 auto rows = numpy_to_matrix(
                     q.ndim() == 1 ? q.reshape({py::ssize_t(1), q.shape(0)}) : q);
                 std::vector<std::vector<double>> out;
                 for (const auto& row : rows) out.push_back(rf_predict_proba(m_, row));
                 return matrix_to_numpy(out);
             });

    m.def(
        "rf_fit",
        [](py::array_t<double> embeddings, const std::vector<std::string>& labels,
           size_t n_trees, uint64_t seed) {
            RfConfig cfg;
            cfg.n_trees = n_trees;
            cfg.seed = seed;
            return rf_fit(numpy_to_matrix(embeddings), labels, cfg);
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("n_trees") = 100,
        py::arg("seed") = 0);

    // metrics
    m.def(
        "silhouette",
        [](py::array_t<double> points, const std::vector<int>& labels) {
            return silhouette(numpy_to_matrix(points), labels);
        },
        py::arg("points"), py::arg("labels"));
    m.def("homogeneity", &homogeneity, py::arg("truth"), py::arg("predicted"));
    m.def("completeness", &completeness, py::arg("truth"), py::arg("predicted"));
    m.def("rand_index", &rand_index, py::arg("truth"), py::arg("predicted"));
    m.def("adjusted_rand_index", &adjusted_rand_index, py::arg("truth"),
          py::arg("predicted"));
    m.def(
        "pr_auc",
        [](const std::vector<uint8_t>& truth, const std::vector<double>& scores) {
            return pr_auc(truth, scores);
        },
        py::arg("truth"), py::arg("scores"));
    m.def(
        "pca3_projection",
        [](py::array_t<double> embeddings) {
            auto coords = pca3_projection(numpy_to_matrix(embeddings));
            py::array_t<double> out({coords.size(), size_t(3)});
            auto buf = out.mutable_unchecked<2>();
            for (size_t i = 0; i < coords.size(); ++i)
                for (size_t j = 0; j < 3; ++j) buf(i, j) = coords[i][j];
            return out;
        },
        py::arg("embeddings"));
    m.def(
        "kmeans",
        [](py::array_t<double> points, size_t k, uint64_t seed) {
            KMeansResult r = kmeans(numpy_to_matrix(points), k, seed);
            return py::make_tuple(r.assignment, r.inertia);
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 0);
}
