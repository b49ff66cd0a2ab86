#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hulk/cluster_graph.hpp"
#include "hulk/errors.hpp"
#include "hulk/scheduler.hpp"

namespace hulk {

struct LabelSet {
    std::vector<int> labels;  // node-index order, -1 = unlabeled
    int num_classes = 0;
};

// Deterministic heuristic oracle the classifier learns to imitate: for each
// task in priority order, seed a bucket at the highest-memory free node and
// grow it along the lowest-latency attachments until the size target and
// memory threshold are met. Nodes that end up in no bucket stay unlabeled.
inline LabelSet synthesize_labels(const ClusterGraph& g, const std::vector<TaskSpec>& tasks,
                                  double overhead_factor = 1.2) {
    if (tasks.empty()) throw DomainError("no tasks to label for");
    const int n = g.size();
    const std::vector<int> order = priority_order(tasks);
    std::vector<TaskSpec> prio(tasks.size());
    for (size_t r = 0; r < order.size(); ++r) prio[r] = tasks[order[r]];
    const std::vector<int> targets = size_classes(prio, n);
    const int num_tasks = static_cast<int>(tasks.size());

    LabelSet out;
    out.labels.assign(n, -1);
    out.num_classes = num_tasks;

    std::set<int> free;
    for (int i = 0; i < n; ++i) free.insert(i);

    for (int r = 0; r < num_tasks; ++r) {
        if (free.empty()) break;
        const double req = requirement_gb(prio[r], overhead_factor);
        const int remaining_cnt = num_tasks - 1 - r;
        int seed = -1;
        for (int x : free)
            if (seed < 0 || g.node(x).memory_gb > g.node(seed).memory_gb) seed = x;
        std::set<int> group = {seed};
        double mem = g.node(seed).memory_gb;
        while (mem < req || static_cast<int>(group.size()) < targets[r]) {
            if (static_cast<int>(free.size() - group.size()) <= remaining_cnt) break;
            const int pick = detail::best_attach(g, group, free);
            if (pick < 0) break;
            group.insert(pick);
            mem += g.node(pick).memory_gb;
        }
        const int cls = class_for_rank(r, num_tasks);
        for (int i : group) {
            out.labels[i] = cls;
            free.erase(i);
        }
    }
    return out;
}

// Label file: { "labels": {"<node id>": class}, "num_classes": int }.
// Ids absent from "labels" are unlabeled. A "meta" object is tolerated.
inline LabelSet parse_labels(const std::string& text, const ClusterGraph& g) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DomainError(std::string("label file: ") + e.what());
    }
    if (!j.is_object() || !j.contains("labels") || !j.contains("num_classes"))
        throw DomainError("label file: missing labels/num_classes");
    for (const auto& [key, _] : j.items())
        if (key != "labels" && key != "num_classes" && key != "meta")
            throw DomainError("label file: unknown key \"" + key + "\"");
    if (!j["num_classes"].is_number_integer() || j["num_classes"].get<int>() <= 0)
        throw DomainError("label file: num_classes must be a positive integer");
    LabelSet out;
    out.num_classes = j["num_classes"].get<int>();
    out.labels.assign(g.size(), -1);
    if (!j["labels"].is_object()) throw DomainError("label file: labels must be an object");
    for (const auto& [key, val] : j["labels"].items()) {
        int id;
        try {
            size_t used = 0;
            id = std::stoi(key, &used);
            if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
            throw DomainError("label file: non-integer node id \"" + key + "\"");
        }
        if (!g.has_node(id))
            throw DomainError("label file: unknown node id " + std::to_string(id));
        if (!val.is_number_integer() || val.get<int>() < 0 ||
            val.get<int>() >= out.num_classes)
            throw DomainError("label file: class for node " + std::to_string(id) +
                              " outside [0, num_classes)");
        out.labels[g.index_of(id)] = val.get<int>();
    }
    return out;
}

inline std::string serialize_labels(const LabelSet& ls, const ClusterGraph& g,
                                    const nlohmann::json& meta = nullptr) {
    if (static_cast<int>(ls.labels.size()) != g.size())
        throw DomainError("label set does not match graph size");
    nlohmann::json j;
    j["labels"] = nlohmann::json::object();
    for (int i = 0; i < g.size(); ++i)
        if (ls.labels[i] >= 0) j["labels"][std::to_string(g.node(i).id)] = ls.labels[i];
    j["num_classes"] = ls.num_classes;
    if (!meta.is_null()) j["meta"] = meta;
    return j.dump(2) + "\n";
}

}  // namespace hulk
