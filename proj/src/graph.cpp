#include "flowembed/graph.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace flowembed {

double edge_weight(const FlowRecord& flow, const EdgeWeightParams& params) {
    if (!(params.alpha > 1.0)) throw ConfigError("alpha must be > 1");
    if (!(flow.duration_s >= 0.0)) throw ConfigError("flow duration must be >= 0");
    double diff = double(flow.src_bytes) - double(flow.dst_bytes);
    return diff / std::pow(params.alpha, flow.duration_s);
}

namespace {

uint32_t intern_node(ConnectionGraph& g, const std::string& ip) {
    auto it = g.index_of.find(ip);
    if (it != g.index_of.end()) return it->second;
    uint32_t idx = static_cast<uint32_t>(g.ips.size());
    g.ips.push_back(ip);
    g.index_of.emplace(ip, idx);
    return idx;
}

}  // namespace

ConnectionGraph build_graph(const FlowDataset& ds, const EdgeWeightParams& params) {
    if (!(params.alpha > 1.0)) throw ConfigError("alpha must be > 1");
    ConnectionGraph g;
    g.edges.reserve(ds.records.size());
    for (const auto& flow : ds.records) {
        uint32_t s = intern_node(g, flow.src_ip);
        uint32_t d = intern_node(g, flow.dst_ip);
        g.edges.push_back({s, d, edge_weight(flow, params), flow.timestamp_us});
    }
    return g;
}

NeighborIndex build_neighbor_index(const ConnectionGraph& g) {
    size_t n = g.node_count();
    std::vector<std::map<uint32_t, double>> acc(n);
    for (const auto& e : g.edges) {
        double w = std::fabs(e.weight);
        acc[e.src][e.dst] += w;
        if (e.src != e.dst) acc[e.dst][e.src] += w;
    }
    NeighborIndex idx(n);
    for (size_t i = 0; i < n; ++i)
        idx[i].assign(acc[i].begin(), acc[i].end());
    return idx;
}

std::vector<std::pair<uint32_t, double>> neighbors(const ConnectionGraph& g,
                                                   uint32_t node) {
    if (node >= g.node_count())
        throw std::out_of_range("node index " + std::to_string(node) +
                                " out of range (graph has " +
                                std::to_string(g.node_count()) + " nodes)");
    std::map<uint32_t, double> acc;
    for (const auto& e : g.edges) {
        double w = std::fabs(e.weight);
        if (e.src == node) acc[e.dst] += w;
        if (e.dst == node && e.src != node) acc[e.src] += w;
    }
    return {acc.begin(), acc.end()};
}

void write_graph_csv(const std::string& path, const ConnectionGraph& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write graph CSV: " + path);
    out << "src_ip,dst_ip,weight,timestamp_us\n";
    char buf[64];
    for (const auto& e : g.edges) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.weight);
        out << g.ips[e.src] << ',' << g.ips[e.dst] << ',' << buf << ','
            << e.timestamp_us << '\n';
    }
}

ConnectionGraph read_graph_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open graph CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("graph CSV is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "src_ip,dst_ip,weight,timestamp_us")
        throw FormatError("unexpected graph CSV header: " + line);

    ConnectionGraph g;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string src, dst, w, ts;
        if (!std::getline(ls, src, ',') || !std::getline(ls, dst, ',') ||
            !std::getline(ls, w, ',') || !std::getline(ls, ts))
            throw RowError(line_no, "malformed graph CSV row");
        GraphEdge e;
        e.src = intern_node(g, src);
        e.dst = intern_node(g, dst);
        char* end = nullptr;
        e.weight = std::strtod(w.c_str(), &end);
        if (end != w.c_str() + w.size()) throw RowError(line_no, "bad weight: " + w);
        auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), e.timestamp_us);
        if (ec != std::errc() || p != ts.data() + ts.size())
            throw RowError(line_no, "bad timestamp: " + ts);
        g.edges.push_back(e);
    }
    return g;
}

}  // namespace flowembed
