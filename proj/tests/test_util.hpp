#pragma once

// Shared fixtures. demo_graph() mirrors data/demo_cluster.json: four regional
// sites with two machines each, low intra-site latency, WAN ring between
// sites. wan_graph() is a denser 8-node single-machine-per-region cluster for
// scheduler exercises. Task lists use published model sizes.

#include <set>
#include <string>
#include <vector>

#include "hulk/cluster_graph.hpp"
#include "hulk/scheduler.hpp"

namespace testutil {

inline hulk::ClusterGraph demo_graph() {
    std::vector<hulk::MachineNode> nodes = {
        {0, "Beijing", 8.6, 640},    {1, "Beijing", 7.0, 152},
        {2, "California", 8.0, 512}, {3, "California", 8.6, 96},
        {4, "London", 6.1, 384},     {5, "London", 7.5, 192},
        {6, "Tokyo", 7.0, 320},      {7, "Tokyo", 8.0, 256}};
    std::vector<hulk::CommEdge> edges = {
        {0, 1, 3},    {2, 3, 2},     {4, 5, 4},   {6, 7, 3},      // intra-site
        {1, 2, 89.1}, {3, 4, 132.3}, {5, 6, 228}, {7, 0, 74.3}};  // WAN ring
    return hulk::ClusterGraph::build(std::move(nodes), std::move(edges));
}

inline hulk::ClusterGraph wan_graph() {
    std::vector<hulk::MachineNode> nodes = {
        {0, "Beijing", 8.6, 152},  {1, "Nanjing", 7.0, 96},  {2, "California", 8.0, 640},
        {3, "Tokyo", 8.6, 192},    {4, "Berlin", 6.1, 88},   {5, "London", 7.5, 256},
        {6, "Rome", 7.0, 384},     {7, "Brasilia", 8.0, 640}};
    std::vector<hulk::CommEdge> edges = {
        {0, 1, 30},    {0, 2, 89.1},  {0, 3, 74.3},  {0, 4, 250.5}, {1, 2, 97.9},
        {1, 4, 213.7}, {1, 5, 176.7}, {2, 3, 118.8}, {2, 5, 132.3}, {2, 6, 158.6},
        {2, 7, 158.6}, {3, 5, 228},   {3, 7, 288},   {4, 5, 24},    {4, 6, 28},
        {5, 6, 25},    {5, 7, 191},   {6, 7, 221}};
    return hulk::ClusterGraph::build(std::move(nodes), std::move(edges));
}

// Four comparable-size fine-tunes; mirrors data/demo_tasks.json.
inline std::vector<hulk::TaskSpec> demo_tasks() {
    return {{"BERT-large", 340000000LL, 2.0, std::nullopt},
            {"RoBERTa", 355000000LL, 2.0, std::nullopt},
            {"XLNet", 340000000LL, 2.0, std::nullopt},
            {"SpanBERT", 340000000LL, 2.0, std::nullopt}};
}

inline std::vector<hulk::TaskSpec> paper_tasks() {
    return {{"OPT", 175000000000LL, 2.0, std::nullopt},
            {"T5", 11000000000LL, 2.0, std::nullopt},
            {"GPT-2", 1500000000LL, 2.0, std::nullopt},
            {"BERT-large", 340000000LL, 2.0, std::nullopt}};
}

inline std::vector<hulk::TaskSpec> six_tasks() {
    auto t = paper_tasks();
    t.push_back({"RoBERTa", 355000000LL, 2.0, std::nullopt});
    t.push_back({"XLNet", 340000000LL, 2.0, std::nullopt});
    return t;
}

inline std::set<int> ids_of(const hulk::ClusterGraph& g) {
    std::set<int> out;
    for (const auto& n : g.nodes()) out.insert(n.id);
    return out;
}

}  // namespace testutil
