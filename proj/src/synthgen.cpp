#include "flowembed/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include <json.hpp>

namespace flowembed {

namespace {

// Draw helpers on top of mt19937_64 so every distribution is pinned down by
// this file rather than the standard library implementation.

double uniform01(std::mt19937_64& rng) {
    return double(rng() >> 11) * 0x1.0p-53;
}

double normal(std::mt19937_64& rng) {
    // Box-Muller; discard the second variate for a simple deterministic stream.
    double u1 = uniform01(rng), u2 = uniform01(rng);
    u1 = std::max(u1, 1e-300);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Lognormal with a target arithmetic mean.
double lognormal_with_mean(std::mt19937_64& rng, double mean, double sigma) {
    double mu = std::log(mean) - sigma * sigma / 2.0;
    return std::exp(mu + sigma * normal(rng));
}

size_t poisson_at_least_1(std::mt19937_64& rng, double lambda) {
    // Knuth's method; fine for the small lambdas used here.
    double l = std::exp(-lambda);
    size_t k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform01(rng);
    } while (p > l);
    return std::max<size_t>(1, k - 1);
}

uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string host_ip(uint32_t subnet, size_t h) {
    return "10." + std::to_string(subnet) + ".0." + std::to_string(h + 1);
}

std::string server_ip(uint32_t subnet, size_t s) {
    return "10." + std::to_string(subnet) + ".1." + std::to_string(s + 1);
}

void check_profile(const ClassProfile& p) {
    if (p.label.empty()) throw ConfigError("profile label must be non-empty");
    if (p.n_hosts < 1) throw ConfigError("profile needs at least one host");
    bool positive = p.beacon_period_s > 0 && p.beacon_jitter_s > 0 &&
                    p.src_bytes_mean > 0 && p.src_bytes_sigma > 0 &&
                    p.dst_bytes_mean > 0 && p.dst_bytes_sigma > 0 &&
                    p.fanout_mean > 0 && p.duration_mean_s > 0 && p.duration_sigma > 0;
    if (!positive)
        throw ConfigError("profile '" + p.label +
                          "' has a non-positive distribution parameter");
}

}  // namespace

std::vector<ClassProfile> default_profiles(size_t n_classes) {
    if (n_classes < 2) throw ConfigError("need at least 2 profiles");
    static const char* kNames[] = {"acrid",   "bayrob",  "corebot", "dridex",
                                   "emotet",  "fynloski", "gozi",    "hancitor",
                                   "icedid",  "jaku",    "kovter",  "lokibot",
                                   "matsnu",  "neutrino", "osiris",  "pykspa"};
    std::vector<ClassProfile> profiles;
    for (size_t i = 0; i < n_classes; ++i) {
        ClassProfile p;
        p.label = i < std::size(kNames)
                      ? kNames[i]
                      : "strain" + std::to_string(i);
        // Coprime cycles keep every pair of classes apart on several axes at
        // once (topology size, fan-out, byte asymmetry, timing). Topologies
        // stay small enough that one sliding window spans the whole class
        // infrastructure, otherwise window composition drifts within a class.
        p.n_hosts = 4 + (i * 2) % 6;
        p.beacon_period_s = 1.2 + 0.9 * double(i);
        p.beacon_jitter_s = 0.08 + 0.12 * p.beacon_period_s;
        double base = 700.0 * std::pow(1.45, double(i));
        switch (i % 3) {
            case 0:  // exfiltration-heavy
                p.src_bytes_mean = base * 5.0;
                p.dst_bytes_mean = base;
                break;
            case 1:  // download-heavy
                p.src_bytes_mean = base;
                p.dst_bytes_mean = base * 5.0;
                break;
            default:  // chatty, near-symmetric
                p.src_bytes_mean = base * 1.6;
                p.dst_bytes_mean = base;
                break;
        }
        p.src_bytes_sigma = 0.35 + 0.05 * double(i % 4);
        p.dst_bytes_sigma = 0.35 + 0.04 * double((i + 2) % 4);
        p.fanout_mean = 1.5 + double((i * 2) % 5);
        p.duration_mean_s = 0.15 * std::pow(1.6, double(i % 5));
        p.duration_sigma = 0.4 + 0.05 * double(i % 3);
        p.subnet = uint32_t(i);
        p.seed = i + 1;
        profiles.push_back(p);
    }
    return profiles;
}

ClassProfile near_duplicate(const ClassProfile& base, const std::string& label,
                            double jitter) {
    ClassProfile p = base;  // same subnet and seed: shared hosts and topology
    p.label = label;
    std::mt19937_64 rng(mix64(base.seed ^ 0x5eedd00dULL));
    auto wiggle = [&](double v) { return v * (1.0 + jitter * (2.0 * uniform01(rng) - 1.0)); };
    p.beacon_period_s = wiggle(p.beacon_period_s);
    p.beacon_jitter_s = wiggle(p.beacon_jitter_s);
    p.src_bytes_mean = wiggle(p.src_bytes_mean);
    p.dst_bytes_mean = wiggle(p.dst_bytes_mean);
    p.duration_mean_s = wiggle(p.duration_mean_s);
    return p;
}

FlowDataset generate_dataset(const std::vector<ClassProfile>& profiles,
                             size_t flows_per_class, uint64_t seed) {
    if (profiles.size() < 2) throw ConfigError("need at least 2 profiles");
    std::set<std::string> labels;
    for (const auto& p : profiles) {
        check_profile(p);
        if (!labels.insert(p.label).second)
            throw ConfigError("duplicate profile label: " + p.label);
    }

    constexpr int64_t kBaseEpochUs = 1600000000000000;  // fixed reference instant
    FlowDataset ds;
    ds.records.reserve(profiles.size() * flows_per_class);

    for (const auto& p : profiles) {
        std::mt19937_64 rng(mix64(seed ^ mix64(p.seed)));

        size_t server_pool =
            std::max<size_t>(2, size_t(std::lround(p.fanout_mean * 1.5)));
        // Per-host contact lists over the class server pool.
        std::vector<std::vector<size_t>> contacts(p.n_hosts);
        for (size_t h = 0; h < p.n_hosts; ++h) {
            size_t fanout =
                std::min(server_pool, poisson_at_least_1(rng, p.fanout_mean));
            std::vector<size_t> pool(server_pool);
            for (size_t s = 0; s < server_pool; ++s) pool[s] = s;
            for (size_t i = 0; i < fanout; ++i) {
                size_t j = i + size_t(uniform01(rng) * double(server_pool - i));
                j = std::min(j, server_pool - 1);
                std::swap(pool[i], pool[j]);
            }
            contacts[h].assign(pool.begin(), pool.begin() + long(fanout));
        }

        // Beacon times per host: staggered phases drifting with the jitter.
        // Each beacon polls the host's whole contact list back-to-back, the
        // way malware walks its fallback server list on a check-in timer.
        std::vector<double> next_t(p.n_hosts);
        for (size_t h = 0; h < p.n_hosts; ++h)
            next_t[h] = double(h) * p.beacon_period_s / double(p.n_hosts) +
                        0.05 * p.beacon_jitter_s * uniform01(rng);

        size_t emitted = 0;
        while (emitted < flows_per_class) {
            // Earliest host beacons next; ties resolved by host index.
            size_t h = 0;
            for (size_t i = 1; i < p.n_hosts; ++i)
                if (next_t[i] < next_t[h]) h = i;

            const auto& list = contacts[h];
            for (size_t c = 0; c < list.size() && emitted < flows_per_class; ++c) {
                FlowRecord r;
                r.timestamp_us =
                    kBaseEpochUs +
                    int64_t(std::llround((next_t[h] + 0.001 * double(c)) * 1e6));
                r.src_ip = host_ip(p.subnet, h);
                r.dst_ip = server_ip(p.subnet, list[c]);
                r.src_port = 49152 + int(uniform01(rng) * 16384.0);
                r.dst_port = 443;
                r.duration_s =
                    lognormal_with_mean(rng, p.duration_mean_s, p.duration_sigma);
                r.src_bytes = uint64_t(std::llround(
                    lognormal_with_mean(rng, p.src_bytes_mean, p.src_bytes_sigma)));
                r.dst_bytes = uint64_t(std::llround(
                    lognormal_with_mean(rng, p.dst_bytes_mean, p.dst_bytes_sigma)));
                r.label = p.label;
                ds.records.push_back(std::move(r));
                ++emitted;
            }

            double gap = p.beacon_period_s + p.beacon_jitter_s * normal(rng);
            next_t[h] += std::max(gap, 0.05 * p.beacon_period_s);
        }
    }
    return sort_flows(std::move(ds));
}

namespace {

using nlohmann::json;

json profile_to_json(const ClassProfile& p) {
    return json{{"label", p.label},
                {"n_hosts", p.n_hosts},
                {"beacon_period_s", p.beacon_period_s},
                {"beacon_jitter_s", p.beacon_jitter_s},
                {"src_bytes_mean", p.src_bytes_mean},
                {"src_bytes_sigma", p.src_bytes_sigma},
                {"dst_bytes_mean", p.dst_bytes_mean},
                {"dst_bytes_sigma", p.dst_bytes_sigma},
                {"fanout_mean", p.fanout_mean},
                {"duration_mean_s", p.duration_mean_s},
                {"duration_sigma", p.duration_sigma},
                {"subnet", p.subnet},
                {"seed", p.seed}};
}

ClassProfile profile_from_json(const json& j) {
    ClassProfile p;
    p.label = j.at("label").get<std::string>();
    p.n_hosts = j.value("n_hosts", p.n_hosts);
    p.beacon_period_s = j.value("beacon_period_s", p.beacon_period_s);
    p.beacon_jitter_s = j.value("beacon_jitter_s", p.beacon_jitter_s);
    p.src_bytes_mean = j.value("src_bytes_mean", p.src_bytes_mean);
    p.src_bytes_sigma = j.value("src_bytes_sigma", p.src_bytes_sigma);
    p.dst_bytes_mean = j.value("dst_bytes_mean", p.dst_bytes_mean);
    p.dst_bytes_sigma = j.value("dst_bytes_sigma", p.dst_bytes_sigma);
    p.fanout_mean = j.value("fanout_mean", p.fanout_mean);
    p.duration_mean_s = j.value("duration_mean_s", p.duration_mean_s);
    p.duration_sigma = j.value("duration_sigma", p.duration_sigma);
    p.subnet = j.value("subnet", p.subnet);
    p.seed = j.value("seed", p.seed);
    check_profile(p);
    return p;
}

}  // namespace

std::vector<ClassProfile> profiles_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open profile file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("invalid profile JSON: " + std::string(e.what()));
    }
    if (!j.is_array()) throw FormatError("profile file must hold a JSON array");
    std::vector<ClassProfile> profiles;
    for (const auto& item : j) profiles.push_back(profile_from_json(item));
    return profiles;
}

void profiles_to_json_file(const std::string& path,
                           const std::vector<ClassProfile>& profiles) {
    json j = json::array();
    for (const auto& p : profiles) j.push_back(profile_to_json(p));
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write profile file: " + path);
    out << j.dump(2) << '\n';
}

}  // namespace flowembed
