#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowembed/flow.hpp"

namespace flowembed {

struct EdgeWeightParams {
    double alpha = 1.15;  // decay base, must be > 1
};

struct GraphEdge {
    uint32_t src = 0;
    uint32_t dst = 0;
    double weight = 0.0;
    int64_t timestamp_us = 0;
};

// Directed multigraph over IP addresses. One edge per flow; parallel edges
// between the same node pair are kept. Node indices follow first-appearance
// order (source before destination within a flow).
struct ConnectionGraph {
    std::vector<std::string> ips;  // node index -> IP
    std::vector<GraphEdge> edges;
    std::unordered_map<std::string, uint32_t> index_of;

    size_t node_count() const { return ips.size(); }
    size_t edge_count() const { return edges.size(); }
};

// weight = (src_bytes - dst_bytes) / alpha^duration. May be negative or zero.
double edge_weight(const FlowRecord& flow, const EdgeWeightParams& params);

ConnectionGraph build_graph(const FlowDataset& ds, const EdgeWeightParams& params);

// Union of in- and out-neighbors with |weight| summed over parallel edges,
// sorted by neighbor index. Throws std::out_of_range on an invalid node.
std::vector<std::pair<uint32_t, double>> neighbors(const ConnectionGraph& g,
                                                   uint32_t node);

// Per-node neighbor lists for all nodes, one O(V + E) pass.
using NeighborIndex = std::vector<std::vector<std::pair<uint32_t, double>>>;
NeighborIndex build_neighbor_index(const ConnectionGraph& g);

// Debug dump: src_ip,dst_ip,weight,timestamp_us in edge order. The edge order
// preserves first-appearance node indexing, so read round-trips exactly.
void write_graph_csv(const std::string& path, const ConnectionGraph& g);
ConnectionGraph read_graph_csv(const std::string& path);

}  // namespace flowembed
