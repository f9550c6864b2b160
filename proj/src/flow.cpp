#include "flowembed/flow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace flowembed {

const char* const kFlowCsvHeader =
    "timestamp_us,src_ip,dst_ip,src_port,dst_port,duration_s,src_bytes,dst_bytes,label";

std::vector<std::string> FlowDataset::classes() const {
    std::set<std::string> distinct;
    for (const auto& r : records) distinct.insert(r.label);
    return {distinct.begin(), distinct.end()};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

int64_t parse_i64(const std::string& s, size_t line, const char* col) {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw RowError(line, std::string("cannot parse ") + col + " from '" + s + "'");
    return v;
}

uint64_t parse_u64(const std::string& s, size_t line, const char* col) {
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw RowError(line, std::string("cannot parse ") + col + " from '" + s + "'");
    return v;
}

int parse_port(const std::string& s, size_t line, const char* col) {
    int64_t v = parse_i64(s, line, col);
    if (v < 0 || v > 65535)
        throw RowError(line, std::string(col) + " out of range [0, 65535]: " + s);
    return static_cast<int>(v);
}

double parse_duration(const std::string& s, size_t line) {
    if (s.empty()) throw RowError(line, "empty duration_s");
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw RowError(line, "cannot parse duration_s from '" + s + "'");
    if (!(v >= 0.0)) throw RowError(line, "duration_s must be non-negative: " + s);
    return v;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

FlowDataset parse_flow_csv_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw EmptyDatasetError("flow CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> expected = {
        "timestamp_us", "src_ip",   "dst_ip",    "src_port", "dst_port",
        "duration_s",   "src_bytes", "dst_bytes", "label"};
    std::vector<std::string> header = split_csv_line(line);

    std::map<std::string, size_t> col;
    for (size_t i = 0; i < header.size(); ++i) {
        if (col.count(header[i]))
            throw SchemaError("duplicate column: " + header[i]);
        col[header[i]] = i;
    }
    for (const auto& name : expected)
        if (!col.count(name)) throw SchemaError("missing column: " + name);
    for (const auto& [name, idx] : col) {
        (void)idx;
        if (std::find(expected.begin(), expected.end(), name) == expected.end())
            throw SchemaError("unexpected column: " + name);
    }

    FlowDataset ds;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != expected.size())
            throw RowError(line_no, "expected " + std::to_string(expected.size()) +
                                        " fields, got " + std::to_string(f.size()));
        FlowRecord r;
        r.timestamp_us = parse_i64(f[col.at("timestamp_us")], line_no, "timestamp_us");
        r.src_ip = f[col.at("src_ip")];
        r.dst_ip = f[col.at("dst_ip")];
        if (r.src_ip.empty()) throw RowError(line_no, "empty src_ip");
        if (r.dst_ip.empty()) throw RowError(line_no, "empty dst_ip");
        r.src_port = parse_port(f[col.at("src_port")], line_no, "src_port");
        r.dst_port = parse_port(f[col.at("dst_port")], line_no, "dst_port");
        r.duration_s = parse_duration(f[col.at("duration_s")], line_no);
        r.src_bytes = parse_u64(f[col.at("src_bytes")], line_no, "src_bytes");
        r.dst_bytes = parse_u64(f[col.at("dst_bytes")], line_no, "dst_bytes");
        r.label = f[col.at("label")];
        if (r.label.empty()) throw RowError(line_no, "empty label");
        ds.records.push_back(std::move(r));
    }
    if (ds.records.empty()) throw EmptyDatasetError("flow CSV has no data rows");
    return ds;
}

FlowDataset parse_flow_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open flow CSV: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_flow_csv_text(buf.str());
}

std::string flow_csv_to_string(const FlowDataset& ds) {
    std::string out = kFlowCsvHeader;
    out.push_back('\n');
    for (const auto& r : ds.records) {
        out += std::to_string(r.timestamp_us);
        out.push_back(',');
        out += r.src_ip;
        out.push_back(',');
        out += r.dst_ip;
        out.push_back(',');
        out += std::to_string(r.src_port);
        out.push_back(',');
        out += std::to_string(r.dst_port);
        out.push_back(',');
        out += format_double(r.duration_s);
        out.push_back(',');
        out += std::to_string(r.src_bytes);
        out.push_back(',');
        out += std::to_string(r.dst_bytes);
        out.push_back(',');
        out += r.label;
        out.push_back('\n');
    }
    return out;
}

void write_flow_csv(const std::string& path, const FlowDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write flow CSV: " + path);
    out << flow_csv_to_string(ds);
}

FlowDataset sort_flows(FlowDataset ds) {
    std::stable_sort(ds.records.begin(), ds.records.end(),
                     [](const FlowRecord& a, const FlowRecord& b) {
                         if (a.timestamp_us != b.timestamp_us)
                             return a.timestamp_us < b.timestamp_us;
                         if (a.src_ip != b.src_ip) return a.src_ip < b.src_ip;
                         if (a.dst_ip != b.dst_ip) return a.dst_ip < b.dst_ip;
                         return a.src_port < b.src_port;
                     });
    return ds;
}

DatasetSplit split_train_test(const std::vector<std::string>& labels, double ratio,
                              uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ConfigError("split ratio must lie in (0, 1)");
    if (labels.size() < 2) throw ConfigError("need at least 2 examples to split");

    std::map<std::string, std::vector<size_t>> by_class;
    for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::mt19937_64 rng(seed);
    DatasetSplit split;
    for (auto& [label, idx] : by_class) {
        if (idx.size() < 2)
            throw ConfigError("class '" + label + "' has only " +
                              std::to_string(idx.size()) +
                              " example(s); stratified split needs at least 2");
        std::shuffle(idx.begin(), idx.end(), rng);
        size_t n_train = static_cast<size_t>(std::llround(ratio * double(idx.size())));
        n_train = std::min(std::max<size_t>(n_train, 1), idx.size() - 1);
        split.train.insert(split.train.end(), idx.begin(), idx.begin() + n_train);
        split.test.insert(split.test.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::pair<std::vector<size_t>, std::vector<size_t>> hold_out_class(
    const std::vector<std::string>& labels, const std::string& class_label) {
    std::set<std::string> available(labels.begin(), labels.end());
    if (!available.count(class_label)) {
        std::string msg = "unknown holdout class '" + class_label + "'; available:";
        for (const auto& l : available) msg += " " + l;
        throw ConfigError(msg);
    }
    std::vector<size_t> kept, holdout;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == class_label)
            holdout.push_back(i);
        else
            kept.push_back(i);
    }
    return {kept, holdout};
}

}  // namespace flowembed
