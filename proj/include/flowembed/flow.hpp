#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowembed/errors.hpp"

namespace flowembed {

// One aggregated network connection.
struct FlowRecord {
    int64_t timestamp_us = 0;
    std::string src_ip;
    std::string dst_ip;
    int src_port = 0;
    int dst_port = 0;
    double duration_s = 0.0;
    uint64_t src_bytes = 0;
    uint64_t dst_bytes = 0;
    std::string label;
};

struct FlowDataset {
    std::vector<FlowRecord> records;

    // Distinct labels, sorted.
    std::vector<std::string> classes() const;
    size_t size() const { return records.size(); }
};

// Expected CSV header, in canonical column order.
extern const char* const kFlowCsvHeader;

// Parses a labeled flow CSV. Columns may appear in any order but the set of
// column names must match the schema exactly.
FlowDataset parse_flow_csv(const std::string& path);
FlowDataset parse_flow_csv_text(const std::string& text);

void write_flow_csv(const std::string& path, const FlowDataset& ds);
std::string flow_csv_to_string(const FlowDataset& ds);

// Stable ascending sort by (timestamp, src_ip, dst_ip, src_port).
FlowDataset sort_flows(FlowDataset ds);

struct DatasetSplit {
    std::vector<size_t> train;
    std::vector<size_t> test;
    std::optional<std::string> holdout_class;
};

// Per-class stratified random split over example labels. Deterministic for a
// fixed seed. Throws ConfigError when a class has fewer than 2 examples or
// the ratio is outside (0, 1).
DatasetSplit split_train_test(const std::vector<std::string>& labels, double ratio,
                              uint64_t seed);

// Partitions example indices into (kept, holdout) by label, preserving order.
// Throws ConfigError listing the available labels when class_label is absent.
std::pair<std::vector<size_t>, std::vector<size_t>> hold_out_class(
    const std::vector<std::string>& labels, const std::string& class_label);

}  // namespace flowembed
