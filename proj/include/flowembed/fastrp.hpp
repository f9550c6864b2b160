#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowembed/graph.hpp"

namespace flowembed {

struct FastRPConfig {
    size_t epsilon = 32;                                // embedding dimension
    std::vector<double> iteration_weights{1.0, 0.5, 0.5};  // degree 0..d
    double sparsity_s = 3.0;
    uint64_t seed = 0;
};

struct NodeEmbeddingTable {
    size_t dim = 0;
    std::vector<std::vector<double>> vectors;  // node index -> vector
    std::vector<std::string> ips;              // node index -> IP
    std::unordered_map<std::string, uint32_t> index_of;

    size_t size() const { return vectors.size(); }
    // nullptr when the IP is unknown.
    const std::vector<double>* find(const std::string& ip) const;
};

// Independent draws from the very-sparse projection distribution:
// +sqrt(s) with prob 1/(2s), 0 with prob 1 - 1/s, -sqrt(s) with prob 1/(2s).
// Deterministic per (seed, node, coordinate); all-zero vectors are redrawn
// with an incremented per-node salt. IPs are left empty; embed_nodes fills
// them from the graph.
NodeEmbeddingTable init_random_vectors(size_t n_nodes, const FastRPConfig& cfg);

// Throws ZeroVectorError on an all-zero input.
std::vector<double> l2_normalize(const std::vector<double>& v);

// One weighted-mean propagation step over the symmetrized neighborhood.
// Nodes with no neighbors (or all-zero aggregate weight) get a zero vector.
std::vector<std::vector<double>> propagate(const NeighborIndex& nbr,
                                           const std::vector<std::vector<double>>& vectors);
NodeEmbeddingTable propagate(const ConnectionGraph& g, const NodeEmbeddingTable& table);

// final(n) = w0 * l2norm(init_n) + sum_i w_i * l2norm(propagated_i(n)),
// where propagation chains raw intermediates and zero intermediates
// contribute nothing.
NodeEmbeddingTable embed_nodes(const ConnectionGraph& g, const FastRPConfig& cfg);

// Same combination starting from a caller-supplied initial table.
NodeEmbeddingTable embed_from_init(const ConnectionGraph& g, NodeEmbeddingTable init,
                                   const FastRPConfig& cfg);

void write_embeddings_csv(const std::string& path, const NodeEmbeddingTable& table);
NodeEmbeddingTable read_embeddings_csv(const std::string& path);

}  // namespace flowembed
