#include "flowembed/fastrp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace flowembed {

const std::vector<double>* NodeEmbeddingTable::find(const std::string& ip) const {
    auto it = index_of.find(ip);
    if (it == index_of.end()) return nullptr;
    return &vectors[it->second];
}

namespace {

uint64_t splitmix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform in [0, 1), keyed on (seed, node, coord, salt).
double keyed_uniform(uint64_t seed, uint64_t node, uint64_t coord, uint64_t salt) {
    uint64_t h = seed;
    h = splitmix64(h ^ (node * 0xd6e8feb86659fd93ULL));
    h = splitmix64(h ^ (coord * 0xa0761d6478bd642fULL));
    h = splitmix64(h ^ (salt * 0xe7037ed1a0b428dbULL));
    return double(h >> 11) * 0x1.0p-53;
}

void validate(const FastRPConfig& cfg) {
    if (cfg.epsilon < 2) throw ConfigError("epsilon must be >= 2");
    if (!(cfg.sparsity_s >= 1.0)) throw ConfigError("sparsity_s must be >= 1");
    if (cfg.iteration_weights.empty())
        throw ConfigError("iteration_weights must be non-empty");
}

bool all_zero(const std::vector<double>& v) {
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

}  // namespace

NodeEmbeddingTable init_random_vectors(size_t n_nodes, const FastRPConfig& cfg) {
    validate(cfg);
    if (n_nodes < 1) throw ConfigError("need at least one node");
    double s = cfg.sparsity_s;
    double hi = std::sqrt(s);
    double p_pos = 1.0 / (2.0 * s);
    double p_nonzero = 1.0 / s;

    NodeEmbeddingTable table;
    table.dim = cfg.epsilon;
    table.vectors.assign(n_nodes, std::vector<double>(cfg.epsilon, 0.0));
    for (size_t n = 0; n < n_nodes; ++n) {
        auto& v = table.vectors[n];
        for (uint64_t salt = 0;; ++salt) {
            for (size_t c = 0; c < cfg.epsilon; ++c) {
                double u = keyed_uniform(cfg.seed, n, c, salt);
                v[c] = u < p_pos ? hi : (u < p_nonzero ? -hi : 0.0);
            }
            if (!all_zero(v)) break;
        }
    }
    return table;
}

std::vector<double> l2_normalize(const std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq == 0.0) throw ZeroVectorError("cannot normalize an all-zero vector");
    double norm = std::sqrt(sq);
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
    return out;
}

std::vector<std::vector<double>> propagate(
    const NeighborIndex& nbr, const std::vector<std::vector<double>>& vectors) {
    if (nbr.size() != vectors.size())
        throw ShapeError("neighbor index covers " + std::to_string(nbr.size()) +
                         " nodes but table has " + std::to_string(vectors.size()));
    size_t dim = vectors.empty() ? 0 : vectors[0].size();
    std::vector<std::vector<double>> out(vectors.size(), std::vector<double>(dim, 0.0));
    for (size_t n = 0; n < vectors.size(); ++n) {
        double total = 0.0;
        for (const auto& [m, w] : nbr[n]) total += w;
        if (total <= 0.0) continue;  // isolated: keep zero vector
        auto& dst = out[n];
        for (const auto& [m, w] : nbr[n]) {
            const auto& src = vectors[m];
            double f = w / total;
            for (size_t c = 0; c < dim; ++c) dst[c] += f * src[c];
        }
    }
    return out;
}

NodeEmbeddingTable propagate(const ConnectionGraph& g, const NodeEmbeddingTable& table) {
    if (table.size() != g.node_count())
        throw ShapeError("embedding table does not cover all graph nodes");
    NodeEmbeddingTable out = table;
    out.vectors = propagate(build_neighbor_index(g), table.vectors);
    return out;
}

NodeEmbeddingTable embed_from_init(const ConnectionGraph& g, NodeEmbeddingTable init,
                                   const FastRPConfig& cfg) {
    validate(cfg);
    size_t n = g.node_count();
    if (n == 0) throw ConfigError("cannot embed an empty graph");
    if (init.size() != n) throw ShapeError("initial table does not cover all nodes");

    NeighborIndex nbr = build_neighbor_index(g);
    const auto& weights = cfg.iteration_weights;

    NodeEmbeddingTable out;
    out.dim = init.dim;
    out.ips = g.ips;
    out.index_of = g.index_of;
    out.vectors.assign(n, std::vector<double>(init.dim, 0.0));

    auto accumulate = [&](const std::vector<std::vector<double>>& stage, double w) {
        for (size_t i = 0; i < n; ++i) {
            if (all_zero(stage[i])) continue;  // isolated-node stages contribute zero
            std::vector<double> nv = l2_normalize(stage[i]);
            for (size_t c = 0; c < out.dim; ++c) out.vectors[i][c] += w * nv[c];
        }
    };

    accumulate(init.vectors, weights[0]);
    std::vector<std::vector<double>> cur = std::move(init.vectors);
    for (size_t deg = 1; deg < weights.size(); ++deg) {
        cur = propagate(nbr, cur);
        accumulate(cur, weights[deg]);
    }
    for (const auto& v : out.vectors)
        for (double x : v)
            if (!std::isfinite(x)) throw NonFiniteError("non-finite node embedding");
    return out;
}

NodeEmbeddingTable embed_nodes(const ConnectionGraph& g, const FastRPConfig& cfg) {
    return embed_from_init(g, init_random_vectors(g.node_count(), cfg), cfg);
}

void write_embeddings_csv(const std::string& path, const NodeEmbeddingTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write embeddings CSV: " + path);
    out << "ip";
    for (size_t c = 0; c < table.dim; ++c) out << ",e" << c;
    out << '\n';
    char buf[64];
    for (size_t i = 0; i < table.size(); ++i) {
        out << table.ips[i];
        for (double x : table.vectors[i]) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << ',' << buf;
        }
        out << '\n';
    }
}

NodeEmbeddingTable read_embeddings_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open embeddings CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("embeddings CSV is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream hs(line);
    std::string col;
    size_t dim = 0;
    if (!std::getline(hs, col, ',') || col != "ip")
        throw FormatError("unexpected embeddings CSV header: " + line);
    while (std::getline(hs, col, ',')) ++dim;
    if (dim < 2) throw FormatError("embeddings CSV has dimension < 2");

    NodeEmbeddingTable table;
    table.dim = dim;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string ip;
        if (!std::getline(ls, ip, ',')) throw RowError(line_no, "malformed row");
        std::vector<double> v;
        v.reserve(dim);
        std::string tok;
        while (std::getline(ls, tok, ',')) {
            char* end = nullptr;
            double x = std::strtod(tok.c_str(), &end);
            if (end != tok.c_str() + tok.size())
                throw RowError(line_no, "bad embedding value: " + tok);
            v.push_back(x);
        }
        if (v.size() != dim)
            throw RowError(line_no, "expected " + std::to_string(dim) + " values");
        table.index_of.emplace(ip, static_cast<uint32_t>(table.vectors.size()));
        table.ips.push_back(ip);
        table.vectors.push_back(std::move(v));
    }
    return table;
}

}  // namespace flowembed
