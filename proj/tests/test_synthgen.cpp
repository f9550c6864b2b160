#include <doctest.h>

#include <cstdio>
#include <set>

#include "flowembed/synthgen.hpp"

using namespace flowembed;

TEST_CASE("generate_dataset counts, labels and schema validity") {
    std::vector<ClassProfile> profiles = default_profiles(2);
    FlowDataset ds = generate_dataset(profiles, 1000, 7);
    CHECK(ds.records.size() == 2000);
    CHECK(ds.classes().size() == 2);

    SUBCASE("round-trips losslessly through the CSV parser") {
        std::string text = flow_csv_to_string(ds);
        FlowDataset back = parse_flow_csv_text(text);
        REQUIRE(back.records.size() == ds.records.size());
        CHECK(flow_csv_to_string(back) == text);
    }
    SUBCASE("sorted ascending by timestamp") {
        for (size_t i = 1; i < ds.records.size(); ++i)
            CHECK(ds.records[i - 1].timestamp_us <= ds.records[i].timestamp_us);
    }
    SUBCASE("classes use disjoint address space by default") {
        std::set<std::string> ips0, ips1;
        for (const auto& r : ds.records)
            (r.label == profiles[0].label ? ips0 : ips1).insert(r.src_ip);
        for (const auto& ip : ips0) CHECK(ips1.count(ip) == 0);
    }
}

TEST_CASE("same seed emits a byte-identical CSV") {
    std::vector<ClassProfile> profiles = default_profiles(3);
    FlowDataset a = generate_dataset(profiles, 500, 42);
    FlowDataset b = generate_dataset(profiles, 500, 42);
    CHECK(flow_csv_to_string(a) == flow_csv_to_string(b));
    FlowDataset c = generate_dataset(profiles, 500, 43);
    CHECK(flow_csv_to_string(a) != flow_csv_to_string(c));
}

TEST_CASE("empirical byte means track the profile parameters") {
    ClassProfile p = default_profiles(2)[0];
    std::vector<ClassProfile> profiles = {p, default_profiles(2)[1]};
    FlowDataset ds = generate_dataset(profiles, 10000, 3);
    double sum = 0, n = 0;
    for (const auto& r : ds.records) {
        if (r.label != p.label) continue;
        sum += double(r.src_bytes);
        n += 1;
    }
    CHECK(n == 10000);
    CHECK(sum / n == doctest::Approx(p.src_bytes_mean).epsilon(0.05));
}

TEST_CASE("near_duplicate keeps infrastructure and nudges parameters") {
    ClassProfile base = default_profiles(2)[0];
    ClassProfile dup = near_duplicate(base, "variant");
    CHECK(dup.label == "variant");
    CHECK(dup.subnet == base.subnet);
    CHECK(dup.seed == base.seed);
    CHECK(dup.n_hosts == base.n_hosts);
    CHECK(dup.beacon_period_s == doctest::Approx(base.beacon_period_s).epsilon(0.05));
    CHECK(dup.beacon_period_s != base.beacon_period_s);

    SUBCASE("duplicate classes share IP space") {
        FlowDataset ds = generate_dataset({base, dup}, 300, 1);
        std::set<std::string> ips_base, ips_dup;
        for (const auto& r : ds.records)
            (r.label == base.label ? ips_base : ips_dup).insert(r.src_ip);
        CHECK(ips_base == ips_dup);
    }
}

TEST_CASE("profile JSON round-trip and validation") {
    std::vector<ClassProfile> profiles = default_profiles(4);
    std::string path = "profiles_test.json";
    profiles_to_json_file(path, profiles);
    std::vector<ClassProfile> back = profiles_from_json_file(path);
    REQUIRE(back.size() == profiles.size());
    for (size_t i = 0; i < profiles.size(); ++i) {
        CHECK(back[i].label == profiles[i].label);
        CHECK(back[i].n_hosts == profiles[i].n_hosts);
        CHECK(back[i].beacon_period_s == profiles[i].beacon_period_s);
        CHECK(back[i].src_bytes_mean == profiles[i].src_bytes_mean);
        CHECK(back[i].subnet == profiles[i].subnet);
    }
    std::remove(path.c_str());

    SUBCASE("bad parameters are rejected") {
        ClassProfile bad = profiles[0];
        bad.beacon_period_s = -1.0;
        CHECK_THROWS_AS(generate_dataset({bad, profiles[1]}, 10, 0), ConfigError);
    }
    SUBCASE("fewer than two profiles is an error") {
        CHECK_THROWS_AS(generate_dataset({profiles[0]}, 10, 0), ConfigError);
    }
}
