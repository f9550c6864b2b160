#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "flowembed/examples.hpp"

using namespace flowembed;

namespace {

FlowRecord flow(const std::string& src, const std::string& dst, int64_t ts = 0,
                const std::string& label = "x") {
    FlowRecord r;
    r.src_ip = src;
    r.dst_ip = dst;
    r.timestamp_us = ts;
    r.label = label;
    return r;
}

NodeEmbeddingTable table_for(const std::vector<std::string>& ips, size_t dim) {
    NodeEmbeddingTable t;
    t.dim = dim;
    for (size_t i = 0; i < ips.size(); ++i) {
        t.ips.push_back(ips[i]);
        t.index_of.emplace(ips[i], uint32_t(i));
        std::vector<double> v(dim);
        for (size_t c = 0; c < dim; ++c) v[c] = double(i + 1) + double(c) / 10.0;
        t.vectors.push_back(v);
    }
    return t;
}

}  // namespace

TEST_CASE("select_window_ips in first-appearance order") {
    SUBCASE("source before destination, scan order") {
        std::vector<FlowRecord> flows = {flow("a", "b"), flow("c", "a")};
        CHECK(select_window_ips(flows, 4) ==
              std::vector<std::string>{"a", "b", "c"});
    }
    SUBCASE("gamma truncates") {
        std::vector<FlowRecord> flows = {flow("a", "b")};
        CHECK(select_window_ips(flows, 1) == std::vector<std::string>{"a"});
    }
    SUBCASE("self-flow deduplicates") {
        std::vector<FlowRecord> flows = {flow("a", "a")};
        CHECK(select_window_ips(flows, 4) == std::vector<std::string>{"a"});
    }
}

TEST_CASE("build_feature_matrix copies embeddings and zero-pads") {
    NodeEmbeddingTable t = table_for({"a", "b"}, 3);
    SUBCASE("two IPs with gamma 3 leave the last row zero") {
        std::vector<double> F = build_feature_matrix({"a", "b"}, t, 3, 3);
        REQUIRE(F.size() == 9);
        for (size_t c = 0; c < 3; ++c) {
            CHECK(F[c] == t.vectors[0][c]);          // row 0 = a
            CHECK(F[3 + c] == t.vectors[1][c]);      // row 1 = b
            CHECK(F[6 + c] == 0.0);                  // padding
        }
    }
    SUBCASE("row order follows the ip list") {
        std::vector<double> F = build_feature_matrix({"b", "a"}, t, 2, 3);
        for (size_t c = 0; c < 3; ++c) {
            CHECK(F[c] == t.vectors[1][c]);
            CHECK(F[3 + c] == t.vectors[0][c]);
        }
    }
    SUBCASE("unknown IP maps to a zero row and is counted") {
        size_t unknown = 0;
        std::vector<double> F = build_feature_matrix({"a", "ghost"}, t, 2, 3, &unknown);
        CHECK(unknown == 1);
        for (size_t c = 0; c < 3; ++c) CHECK(F[3 + c] == 0.0);
    }
    SUBCASE("dimension mismatch is a config error") {
        CHECK_THROWS_AS(build_feature_matrix({"a"}, t, 2, 5), ConfigError);
    }
}

TEST_CASE("build_adjacency marks directed selected pairs") {
    SUBCASE("chain a->b->c") {
        std::vector<FlowRecord> flows = {flow("a", "b"), flow("b", "c")};
        std::vector<uint8_t> A = build_adjacency(flows, {"a", "b", "c"}, 3);
        REQUIRE(A.size() == 9);
        for (size_t i = 0; i < 3; ++i)
            for (size_t j = 0; j < 3; ++j) {
                uint8_t expect = (i == 0 && j == 1) || (i == 1 && j == 2) ? 1 : 0;
                CHECK(A[i * 3 + j] == expect);
            }
    }
    SUBCASE("empty slice gives the zero matrix") {
        std::vector<FlowRecord> flows;
        std::vector<uint8_t> A = build_adjacency(flows, {"a", "b"}, 2);
        CHECK(A == std::vector<uint8_t>(4, 0));
    }
    SUBCASE("self-flow sets the diagonal") {
        std::vector<FlowRecord> flows = {flow("a", "a")};
        std::vector<uint8_t> A = build_adjacency(flows, {"a", "b"}, 2);
        CHECK(A[0] == 1);
    }
    SUBCASE("flows touching unselected IPs contribute nothing") {
        std::vector<FlowRecord> flows = {flow("a", "zz"), flow("zz", "b")};
        std::vector<uint8_t> A = build_adjacency(flows, {"a", "b"}, 2);
        CHECK(A == std::vector<uint8_t>(4, 0));
    }
}

TEST_CASE("make_examples window arithmetic") {
    NodeEmbeddingTable t = table_for({"h0", "h1", "h2", "h3"}, 4);
    auto dataset = [&](size_t n, const std::string& label = "x") {
        FlowDataset ds;
        for (size_t i = 0; i < n; ++i)
            ds.records.push_back(
                flow("h" + std::to_string(i % 3), "h3", int64_t(i), label));
        return ds;
    };
    WindowConfig cfg{128, 4, 4, 64};

    SUBCASE("exactly beta flows make one example") {
        CHECK(make_examples(dataset(128), t, cfg).size() == 1);
    }
    SUBCASE("256 flows at stride 64 make three examples") {
        std::vector<Example> ex = make_examples(dataset(256), t, cfg);
        REQUIRE(ex.size() == 3);
        CHECK(ex[0].window_start == 0);
        CHECK(ex[1].window_start == 64);
        CHECK(ex[2].window_start == 128);
    }
    SUBCASE("too-short streams produce nothing but are summarized") {
        ExampleBuildSummary summary;
        CHECK(make_examples(dataset(100), t, cfg, &summary).empty());
        CHECK(summary.short_streams.at("x") == 100);
    }
    SUBCASE("window-count formula across a property sweep") {
        std::mt19937_64 rng(9);
        for (int trial = 0; trial < 60; ++trial) {
            size_t n = rng() % 600;
            size_t beta = 1 + rng() % 150;
            size_t stride = 1 + rng() % 80;
            WindowConfig wc{beta, 4, 4, stride};
            size_t got = make_examples(dataset(std::max<size_t>(n, 1)), t, wc).size();
            size_t nn = std::max<size_t>(n, 1);
            size_t want = nn >= beta ? (nn - beta) / stride + 1 : 0;
            CAPTURE(nn);
            CAPTURE(beta);
            CAPTURE(stride);
            CHECK(got == want);
        }
    }
    SUBCASE("per-class streams never mix") {
        FlowDataset ds = dataset(128, "a");
        FlowDataset more = dataset(128, "b");
        ds.records.insert(ds.records.end(), more.records.begin(), more.records.end());
        std::vector<Example> ex = make_examples(ds, t, cfg);
        REQUIRE(ex.size() == 2);
        CHECK(ex[0].label == "a");
        CHECK(ex[1].label == "b");
    }
    SUBCASE("example shapes are exactly gamma x epsilon and gamma x gamma") {
        for (const auto& ex : make_examples(dataset(256), t, cfg)) {
            CHECK(ex.F.size() == cfg.gamma * cfg.epsilon);
            CHECK(ex.A.size() == cfg.gamma * cfg.gamma);
            for (uint8_t a : ex.A) CHECK((a == 0 || a == 1));
        }
    }
}

TEST_CASE("window locality: flows outside a window do not affect it") {
    NodeEmbeddingTable t = table_for({"h0", "h1", "h2", "h3"}, 4);
    WindowConfig cfg{8, 4, 4, 8};
    FlowDataset ds;
    for (size_t i = 0; i < 16; ++i)
        ds.records.push_back(flow("h" + std::to_string(i % 3), "h3", int64_t(i)));
    std::vector<Example> before = make_examples(ds, t, cfg);
    REQUIRE(before.size() == 2);

    // Mutate a flow inside the second window only.
    ds.records[12].src_ip = "h1";
    ds.records[12].dst_ip = "h0";
    std::vector<Example> after = make_examples(ds, t, cfg);
    CHECK(before[0].F == after[0].F);
    CHECK(before[0].A == after[0].A);
    CHECK(before[1].A != after[1].A);
}

TEST_CASE("example file round-trip and corruption handling") {
    NodeEmbeddingTable t = table_for({"h0", "h1", "h2", "h3"}, 4);
    WindowConfig cfg{8, 4, 4, 4};
    FlowDataset ds;
    for (size_t i = 0; i < 24; ++i)
        ds.records.push_back(
            flow("h" + std::to_string(i % 3), "h3", int64_t(i), i < 12 ? "a" : "b"));
    std::vector<Example> ex = make_examples(ds, t, cfg);
    REQUIRE(!ex.empty());

    std::string path = "examples_test.stpx";
    save_examples(path, ex, cfg.gamma, cfg.epsilon);
    LoadedExamples back = load_examples(path);
    CHECK(back.gamma == cfg.gamma);
    CHECK(back.epsilon == cfg.epsilon);
    REQUIRE(back.examples.size() == ex.size());
    for (size_t i = 0; i < ex.size(); ++i) {
        CHECK(back.examples[i].label == ex[i].label);
        CHECK(back.examples[i].F == ex[i].F);
        CHECK(back.examples[i].A == ex[i].A);
    }

    SUBCASE("bad magic") {
        std::ofstream out("examples_bad.stpx", std::ios::binary);
        out << "NOTXX";
        out.close();
        CHECK_THROWS_AS(load_examples("examples_bad.stpx"), FormatError);
        std::remove("examples_bad.stpx");
    }
    SUBCASE("truncated file") {
        std::ifstream in(path, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out("examples_trunc.stpx", std::ios::binary);
        out.write(data.data(), long(data.size()) - 7);
        out.close();
        CHECK_THROWS_AS(load_examples("examples_trunc.stpx"), FormatError);
        std::remove("examples_trunc.stpx");
    }
    std::remove(path.c_str());
}

TEST_CASE("example-level holdout and split wrappers") {
    std::vector<Example> ex;
    for (int i = 0; i < 12; ++i) {
        Example e;
        e.label = i % 3 == 0 ? "hold" : "keep";
        e.F = {double(i)};
        ex.push_back(e);
    }
    auto [kept, holdout] = hold_out_class(ex, "hold");
    CHECK(kept.size() == 8);
    CHECK(holdout.size() == 4);
    for (const auto& e : holdout) CHECK(e.label == "hold");

    DatasetSplit split = split_train_test(kept, 0.5, 1);
    CHECK(split.train.size() + split.test.size() == kept.size());
}
