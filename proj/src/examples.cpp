#include "flowembed/examples.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_map>

namespace flowembed {

namespace {

void validate(const WindowConfig& cfg) {
    if (cfg.beta < 1) throw ConfigError("beta must be >= 1");
    if (cfg.gamma < 2) throw ConfigError("gamma must be >= 2");
    if (cfg.stride < 1) throw ConfigError("stride must be >= 1");
}

constexpr char kExamplesMagic[5] = {'S', 'T', 'P', 'X', '1'};

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("truncated example file");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
}

}  // namespace

std::vector<std::string> select_window_ips(std::span<const FlowRecord> flows,
                                           size_t gamma) {
    std::vector<std::string> ips;
    std::set<std::string> seen;
    for (const auto& f : flows) {
        if (ips.size() >= gamma) break;
        if (seen.insert(f.src_ip).second) ips.push_back(f.src_ip);
        if (ips.size() >= gamma) break;
        if (seen.insert(f.dst_ip).second) ips.push_back(f.dst_ip);
    }
    return ips;
}

std::vector<double> build_feature_matrix(const std::vector<std::string>& ips,
                                         const NodeEmbeddingTable& table,
                                         size_t gamma, size_t epsilon,
                                         size_t* unknown_rows) {
    if (table.dim != epsilon)
        throw ConfigError("embedding table dimension " + std::to_string(table.dim) +
                          " does not match epsilon " + std::to_string(epsilon));
    if (ips.size() > gamma) throw ConfigError("more selected IPs than gamma");
    std::vector<double> F(gamma * epsilon, 0.0);
    for (size_t k = 0; k < ips.size(); ++k) {
        const std::vector<double>* v = table.find(ips[k]);
        if (v == nullptr) {
            if (unknown_rows) ++*unknown_rows;
            continue;  // zero row for IPs unseen at embedding time
        }
        std::copy(v->begin(), v->end(), F.begin() + k * epsilon);
    }
    return F;
}

std::vector<uint8_t> build_adjacency(std::span<const FlowRecord> flows,
                                     const std::vector<std::string>& ips,
                                     size_t gamma) {
    if (ips.size() > gamma) throw ConfigError("more selected IPs than gamma");
    std::unordered_map<std::string, size_t> pos;
    for (size_t i = 0; i < ips.size(); ++i) pos.emplace(ips[i], i);
    std::vector<uint8_t> A(gamma * gamma, 0);
    for (const auto& f : flows) {
        auto si = pos.find(f.src_ip);
        auto di = pos.find(f.dst_ip);
        if (si == pos.end() || di == pos.end()) continue;
        A[si->second * gamma + di->second] = 1;
    }
    return A;
}

std::vector<Example> make_examples(const FlowDataset& sorted_ds,
                                   const NodeEmbeddingTable& table,
                                   const WindowConfig& cfg,
                                   ExampleBuildSummary* summary) {
    validate(cfg);
    // One stream per class label, flows kept in dataset (sorted) order.
    std::map<std::string, std::vector<FlowRecord>> streams;
    for (const auto& r : sorted_ds.records) streams[r.label].push_back(r);

    std::vector<Example> out;
    for (const auto& [label, stream] : streams) {
        size_t n = stream.size();
        if (n < cfg.beta) {
            if (summary) summary->short_streams[label] = n;
            continue;
        }
        for (size_t start = 0; start + cfg.beta <= n; start += cfg.stride) {
            std::span<const FlowRecord> window(stream.data() + start, cfg.beta);
            Example ex;
            ex.label = label;
            ex.window_start = start;
            std::vector<std::string> ips = select_window_ips(window, cfg.gamma);
            size_t unknown = 0;
            ex.F = build_feature_matrix(ips, table, cfg.gamma, cfg.epsilon, &unknown);
            ex.A = build_adjacency(window, ips, cfg.gamma);
            if (summary) summary->unknown_ip_rows += unknown;
            out.push_back(std::move(ex));
        }
        if (summary) summary->per_class[label] = (n - cfg.beta) / cfg.stride + 1;
    }
    return out;
}

void save_examples(const std::string& path, const std::vector<Example>& examples,
                   size_t gamma, size_t epsilon) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write example file: " + path);
    out.write(kExamplesMagic, sizeof(kExamplesMagic));
    put_u32(out, static_cast<uint32_t>(gamma));
    put_u32(out, static_cast<uint32_t>(epsilon));
    for (const auto& ex : examples) {
        if (ex.F.size() != gamma * epsilon || ex.A.size() != gamma * gamma)
            throw ShapeError("example shape does not match (gamma, epsilon)");
        put_u32(out, static_cast<uint32_t>(ex.label.size()));
        out.write(ex.label.data(), static_cast<std::streamsize>(ex.label.size()));
        out.write(reinterpret_cast<const char*>(ex.F.data()),
                  static_cast<std::streamsize>(ex.F.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(ex.A.data()),
                  static_cast<std::streamsize>(ex.A.size()));
    }
    if (!out) throw FormatError("short write to example file: " + path);
}

LoadedExamples load_examples(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open example file: " + path);
    char magic[5];
    if (!in.read(magic, sizeof(magic)) ||
        std::memcmp(magic, kExamplesMagic, sizeof(magic)) != 0)
        throw FormatError("not an example file (bad magic): " + path);
    LoadedExamples loaded;
    loaded.gamma = get_u32(in);
    loaded.epsilon = get_u32(in);
    size_t index = 0;
    while (true) {
        int peek = in.peek();
        if (peek == std::char_traits<char>::eof()) break;
        uint32_t len = get_u32(in);
        Example ex;
        ex.label.resize(len);
        if (len && !in.read(ex.label.data(), len))
            throw FormatError("truncated example file");
        ex.F.resize(loaded.gamma * loaded.epsilon);
        if (!in.read(reinterpret_cast<char*>(ex.F.data()),
                     static_cast<std::streamsize>(ex.F.size() * sizeof(double))))
            throw FormatError("truncated example file");
        ex.A.resize(loaded.gamma * loaded.gamma);
        if (!in.read(reinterpret_cast<char*>(ex.A.data()),
                     static_cast<std::streamsize>(ex.A.size())))
            throw FormatError("truncated example file");
        ex.window_start = index++;
        loaded.examples.push_back(std::move(ex));
    }
    return loaded;
}

std::vector<std::string> example_labels(const std::vector<Example>& examples) {
    std::vector<std::string> labels;
    labels.reserve(examples.size());
    for (const auto& ex : examples) labels.push_back(ex.label);
    return labels;
}

std::pair<std::vector<Example>, std::vector<Example>> hold_out_class(
    const std::vector<Example>& examples, const std::string& class_label) {
    auto [kept_idx, holdout_idx] = hold_out_class(example_labels(examples), class_label);
    std::vector<Example> kept, holdout;
    kept.reserve(kept_idx.size());
    holdout.reserve(holdout_idx.size());
    for (size_t i : kept_idx) kept.push_back(examples[i]);
    for (size_t i : holdout_idx) holdout.push_back(examples[i]);
    return {std::move(kept), std::move(holdout)};
}

DatasetSplit split_train_test(const std::vector<Example>& examples, double ratio,
                              uint64_t seed) {
    return split_train_test(example_labels(examples), ratio, seed);
}

}  // namespace flowembed
