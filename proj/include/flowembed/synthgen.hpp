#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowembed/flow.hpp"

namespace flowembed {

// Behavioral profile of one malware class: a set of infected hosts beaconing
// to a pool of command-and-control servers with class-specific timing, byte
// asymmetry, and fan-out.
struct ClassProfile {
    std::string label;
    size_t n_hosts = 8;
    double beacon_period_s = 5.0;     // mean seconds between flows per host
    double beacon_jitter_s = 1.0;     // stddev of the period
    double src_bytes_mean = 4000.0;   // lognormal mean (bytes host -> server)
    double src_bytes_sigma = 0.4;     // lognormal sigma in log space
    double dst_bytes_mean = 1000.0;   // lognormal mean (bytes server -> host)
    double dst_bytes_sigma = 0.4;
    double fanout_mean = 3.0;         // servers contacted per host
    double duration_mean_s = 0.5;     // lognormal mean of connection duration
    double duration_sigma = 0.5;
    uint32_t subnet = 0;              // hosts live in 10.<subnet>.0.x, servers 10.<subnet>.1.x
    uint64_t seed = 1;                // topology/draw stream seed
};

// Deterministic spread of mutually distinct profiles.
std::vector<ClassProfile> default_profiles(size_t n_classes);

// Same infrastructure (subnet, topology seed) with all behavioral parameters
// jittered by the given relative amount.
ClassProfile near_duplicate(const ClassProfile& base, const std::string& label,
                            double jitter = 0.03);

// flows_per_class records per profile, interleaved in time, valid against
// the flow CSV schema. Deterministic per (profiles, seed).
FlowDataset generate_dataset(const std::vector<ClassProfile>& profiles,
                             size_t flows_per_class, uint64_t seed);

std::vector<ClassProfile> profiles_from_json_file(const std::string& path);
void profiles_to_json_file(const std::string& path,
                           const std::vector<ClassProfile>& profiles);

}  // namespace flowembed
