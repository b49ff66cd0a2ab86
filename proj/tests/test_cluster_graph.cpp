#include <catch2/catch_amalgamated.hpp>

#include "hulk/cluster_graph.hpp"
#include "test_util.hpp"

using namespace hulk;
using Catch::Approx;

TEST_CASE("single node parses to 1x1 zero adjacency") {
    ClusterGraph g = parse_cluster(R"({
      "nodes": [{"id": 0, "region": "Beijing", "compute": 8.6, "memory_gb": 152}]
    })");
    REQUIRE(g.size() == 1);
    CHECK(g.node(0).region == "Beijing");
    CHECK(g.node(0).compute_capability == 8.6);
    CHECK(g.node(0).memory_gb == 152.0);
    REQUIRE(g.adjacency().rows() == 1);
    CHECK(g.adjacency()(0, 0) == 0.0);
    CHECK(g.edges().empty());
}

TEST_CASE("empty node list is rejected") {
    CHECK_THROWS_WITH(ClusterGraph::build({}, {}), "empty cluster");
    auto v = lint_cluster(R"({"nodes": []})");
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "empty cluster");
}

TEST_CASE("edge declared once fills both triangle halves") {
    ClusterGraph g = testutil::wan_graph();
    int i0 = g.index_of(0), i1 = g.index_of(1);
    CHECK(g.adjacency()(i0, i1) == 30.0);
    CHECK(g.adjacency()(i1, i0) == 30.0);
    CHECK(g.connected(i0, i1));
}

TEST_CASE("adjacency is symmetric with zero diagonal") {
    ClusterGraph g = testutil::demo_graph();
    const auto& w = g.adjacency();
    for (int i = 0; i < g.size(); ++i) {
        CHECK(w(i, i) == 0.0);
        for (int j = 0; j < g.size(); ++j) {
            CHECK(w(i, j) == w(j, i));
            CHECK(w(i, j) >= 0.0);
            CHECK((g.mask()(i, j) != 0) == (w(i, j) > 0.0));
        }
    }
}

TEST_CASE("validate accepts the fixture graphs") {
    CHECK(validate(testutil::demo_graph()).empty());
    CHECK(validate(testutil::wan_graph()).empty());
}

TEST_CASE("lint reports self-loop") {
    auto v = lint_cluster(R"({
      "nodes": [{"id": 3, "region": "Tokyo", "compute": 1, "memory_gb": 1}],
      "edges": [{"a": 3, "b": 3, "ms_per_64b": 5}]
    })");
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "self-loop at 3");
}

TEST_CASE("lint reports non-positive latency") {
    auto v = lint_cluster(R"({
      "nodes": [{"id": 0, "region": "a", "compute": 1, "memory_gb": 1},
                {"id": 1, "region": "b", "compute": 1, "memory_gb": 1}],
      "edges": [{"a": 0, "b": 1, "ms_per_64b": -5}]
    })");
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "non-positive latency on (0,1)");
}

TEST_CASE("lint flags structural problems") {
    CHECK(lint_cluster("not json").at(0).rfind("malformed syntax", 0) == 0);
    CHECK(lint_cluster(R"([1,2])").at(0) == "cluster file must be a JSON object");
    CHECK(lint_cluster(R"({"machines": []})").size() == 2);  // unknown key + missing nodes
    CHECK(lint_cluster(R"({"nodes": [{"id": 0, "region": "x", "compute": 1,
                                      "memory_gb": 1, "gpu": "A100"}]})")
              .at(0) == "unknown key \"gpu\" in node");
}

TEST_CASE("duplicate ids and conflicting duplicate edges are rejected") {
    CHECK_THROWS_WITH(
        ClusterGraph::build({{0, "a", 1, 1}, {0, "b", 1, 1}}, {}),
        "duplicate node id 0");
    // Same pair, same latency: tolerated as a mirror declaration.
    ClusterGraph ok = ClusterGraph::build({{0, "a", 1, 1}, {1, "b", 1, 1}},
                                          {{0, 1, 7}, {1, 0, 7}});
    CHECK(ok.edges().size() == 1);
    CHECK_THROWS_WITH(
        ClusterGraph::build({{0, "a", 1, 1}, {1, "b", 1, 1}}, {{0, 1, 7}, {1, 0, 8}}),
        "conflicting duplicate edge (1,0)");
}

TEST_CASE("serialize and parse round-trip byte-identically") {
    ClusterGraph g = testutil::demo_graph();
    std::string text = serialize_cluster(g);
    ClusterGraph h = parse_cluster(text);
    CHECK(serialize_cluster(h) == text);
    CHECK(same_cluster(g, h));
}

TEST_CASE("feature row scales compute and memory by configured maxima") {
    ClusterGraph g = parse_cluster(R"({
      "nodes": [{"id": 0, "region": "Beijing", "compute": 8.6, "memory_gb": 152}]
    })");
    FeatureMatrix fm = embed_features(g, FeatureConfig::standard());
    REQUIRE(fm.rows.cols() == 13);
    CHECK(fm.rows(0, 0) == 1.0);  // Beijing is first in the vocabulary
    CHECK(fm.rows(0, 11) == Approx(8.6 / 9.0));
    CHECK(fm.rows(0, 12) == Approx(152.0 / 1024.0));
    CHECK(fm.rows(0, 11) == Approx(0.9556).margin(1e-4));
    CHECK(fm.rows(0, 12) == Approx(0.1484).margin(1e-4));
}

TEST_CASE("unknown region maps to the fallback slot") {
    ClusterGraph g = parse_cluster(R"({
      "nodes": [{"id": 0, "region": "Atlantis", "compute": 1, "memory_gb": 1}]
    })");
    FeatureMatrix fm = embed_features(g, FeatureConfig::standard());
    CHECK(fm.rows(0, 10) == 1.0);
    for (int c = 0; c < 10; ++c) CHECK(fm.rows(0, c) == 0.0);
}

TEST_CASE("identical nodes embed to identical rows") {
    ClusterGraph g = ClusterGraph::build(
        {{0, "Rome", 7, 384}, {1, "Rome", 7, 384}}, {{0, 1, 5}});
    FeatureMatrix fm = embed_features(g, FeatureConfig::standard());
    CHECK(fm.rows.row(0) == fm.rows.row(1));
}

TEST_CASE("feature rows have one-hot regions and unit-interval numerics") {
    FeatureMatrix fm = embed_features(testutil::demo_graph(), FeatureConfig::standard());
    for (int i = 0; i < fm.rows.rows(); ++i) {
        double region_sum = fm.rows.row(i).head(11).sum();
        CHECK(region_sum == 1.0);
        CHECK(fm.rows.row(i).head(11).maxCoeff() == 1.0);
        CHECK(fm.rows(i, 11) >= 0.0);
        CHECK(fm.rows(i, 11) <= 1.0);
        CHECK(fm.rows(i, 12) >= 0.0);
        CHECK(fm.rows(i, 12) <= 1.0);
    }
}

TEST_CASE("feature scaling clamps values above the configured maximum") {
    ClusterGraph g = parse_cluster(R"({
      "nodes": [{"id": 0, "region": "Rome", "compute": 99, "memory_gb": 4096}]
    })");
    FeatureMatrix fm = embed_features(g, FeatureConfig::standard());
    CHECK(fm.rows(0, 11) == 1.0);
    CHECK(fm.rows(0, 12) == 1.0);
}

TEST_CASE("add_machine attaches a linked node") {
    ClusterGraph g = testutil::demo_graph();
    ClusterGraph h = add_machine(g, {45, "Rome", 7, 384}, {{6, 12.0}, {2, 158.6}});
    CHECK(h.size() == 9);
    REQUIRE(h.has_node(45));
    int i45 = h.index_of(45);
    CHECK(h.degree(i45) == 2);
    CHECK(h.adjacency()(i45, h.index_of(6)) == 12.0);
    CHECK(validate(h).empty());
}

TEST_CASE("add_machine with no links yields an isolated node") {
    ClusterGraph h = add_machine(testutil::demo_graph(), {45, "Rome", 7, 384}, {});
    CHECK(h.degree(h.index_of(45)) == 0);
    CHECK(validate(h).empty());
}

TEST_CASE("add_machine rejects unknown peers and duplicate ids") {
    ClusterGraph g = testutil::demo_graph();
    CHECK_THROWS_WITH(add_machine(g, {45, "Rome", 7, 384}, {{999, 1.0}}),
                      "unknown peer id 999");
    CHECK_THROWS_WITH(add_machine(g, {0, "Rome", 7, 384}, {}), "duplicate node id 0");
    CHECK_THROWS_WITH(add_machine(g, {45, "Rome", 7, 384}, {{6, 0.0}}),
                      "non-positive latency on (45,6)");
}

TEST_CASE("remove undoes add") {
    ClusterGraph g = testutil::demo_graph();
    ClusterGraph h = remove_machine(add_machine(g, {45, "Rome", 7, 384}, {{6, 12.0}}), 45);
    CHECK(same_cluster(g, h));
}

TEST_CASE("remove_machine error cases") {
    ClusterGraph one = parse_cluster(R"({
      "nodes": [{"id": 0, "region": "x", "compute": 1, "memory_gb": 1}]
    })");
    CHECK_THROWS_WITH(remove_machine(one, 0), "empty cluster");
    CHECK_THROWS_WITH(remove_machine(testutil::demo_graph(), 999), "unknown machine id 999");
}

TEST_CASE("subgraph keeps only induced nodes and edges") {
    ClusterGraph g = testutil::wan_graph();
    ClusterGraph s = subgraph(g, {0, 1, 2});
    CHECK(s.size() == 3);
    CHECK(s.edges().size() == 3);  // (0,1), (0,2), (1,2)
    CHECK(validate(s).empty());
}

TEST_CASE("connectivity queries on subsets") {
    ClusterGraph g = testutil::demo_graph();
    CHECK(is_connected_subset(g, {0, 1, 2}));
    CHECK(is_connected_subset(g, {4}));
    CHECK_FALSE(is_connected_subset(g, {}));
    CHECK_FALSE(is_connected_subset(g, {1, 7}));  // no direct edge, no in-set path
    CHECK(is_connected_subset(g, testutil::ids_of(g)));
}
