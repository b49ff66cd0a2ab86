#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hulk/cluster_graph.hpp"
#include "hulk/errors.hpp"
#include "hulk/gnn.hpp"

namespace hulk {

struct TaskSpec {
    std::string name;
    std::int64_t param_count = 0;
    double bytes_per_param = 2.0;  // fp16 default
    std::optional<double> min_memory_gb;
};

// Aggregate group memory a task needs: the explicit threshold if given, but
// never less than params * bytes * overhead (optimizer state etc.).
inline double requirement_gb(const TaskSpec& t, double overhead_factor = 1.2) {
    const double derived = static_cast<double>(t.param_count) * t.bytes_per_param *
                           overhead_factor / (1024.0 * 1024.0 * 1024.0);
    return std::max(t.min_memory_gb.value_or(0.0), derived);
}

// Task indices sorted by descending parameter count, name as tie-break.
inline std::vector<int> priority_order(const std::vector<TaskSpec>& tasks) {
    std::vector<int> order(tasks.size());
    for (size_t i = 0; i < tasks.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (tasks[a].param_count != tasks[b].param_count)
            return tasks[a].param_count > tasks[b].param_count;
        return tasks[a].name < tasks[b].name;
    });
    return order;
}

// The class a task of the given priority rank trains under: largest class
// index = largest task.
inline int class_for_rank(int rank, int num_tasks) { return num_tasks - 1 - rank; }

// Largest-remainder split of n machines proportional to parameter counts,
// every task getting at least one. Returned sizes align with the input order.
inline std::vector<int> size_classes(const std::vector<TaskSpec>& tasks, int n) {
    if (tasks.empty()) return {};
    if (n < static_cast<int>(tasks.size()))
        throw DomainError("fewer machines than tasks");
    const size_t k = tasks.size();
    long double total = 0.0L;
    for (const auto& t : tasks) {
        if (t.param_count <= 0) throw DomainError("non-positive task parameter count");
        total += static_cast<long double>(t.param_count);
    }
    std::vector<int> sizes(k);
    std::vector<long double> remainder(k);
    int used = 0;
    for (size_t i = 0; i < k; ++i) {
        const long double quota =
            static_cast<long double>(n) * static_cast<long double>(tasks[i].param_count) / total;
        sizes[i] = static_cast<int>(quota);
        remainder[i] = quota - sizes[i];
        used += sizes[i];
    }
    std::vector<size_t> by_rem(k);
    for (size_t i = 0; i < k; ++i) by_rem[i] = i;
    std::sort(by_rem.begin(), by_rem.end(), [&](size_t a, size_t b) {
        if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
        return tasks[a].name < tasks[b].name;
    });
    for (int i = 0; used < n; ++used, ++i) ++sizes[by_rem[i % k]];
    for (size_t i = 0; i < k; ++i) {
        while (sizes[i] == 0) {
            size_t donor = std::max_element(sizes.begin(), sizes.end()) - sizes.begin();
            if (sizes[donor] <= 1) throw DomainError("cannot give every task a machine");
            --sizes[donor];
            ++sizes[i];
        }
    }
    return sizes;
}

struct Feasibility {
    bool ok = false;
    std::string reason;
};

inline Feasibility check_feasibility(const ClusterGraph& g, const std::set<int>& ids,
                                     const TaskSpec& t, double overhead_factor = 1.2) {
    if (ids.empty()) return {false, "empty group"};
    double mem = 0.0;
    std::set<int> idx;
    for (int id : ids) {
        if (!g.has_node(id)) throw DomainError("unknown machine id " + std::to_string(id));
        mem += g.node(g.index_of(id)).memory_gb;
        idx.insert(g.index_of(id));
    }
    if (mem < requirement_gb(t, overhead_factor))
        return {false, "insufficient aggregate memory"};
    if (!is_connected_index_set(g, idx)) return {false, "disconnected group"};
    return {true, ""};
}

struct Assignment {
    std::map<std::string, std::set<int>> groups;  // task name -> machine ids
    std::set<int> leftovers;                      // machine ids in no group
    std::vector<std::string> waiting;             // task names, priority order
};

namespace detail {

inline double group_memory(const ClusterGraph& g, const std::set<int>& idx) {
    double mem = 0.0;
    for (int i : idx) mem += g.node(i).memory_gb;
    return mem;
}

// Mean latency from a candidate node to the group members it can reach
// directly; +inf when it touches none (not attachable).
inline double mean_latency_to(const ClusterGraph& g, int cand, const std::set<int>& group) {
    double sum = 0.0;
    int links = 0;
    for (int m : group)
        if (g.connected(cand, m)) {
            sum += g.adjacency()(cand, m);
            ++links;
        }
    if (links == 0) return std::numeric_limits<double>::infinity();
    return sum / links;
}

inline std::set<int> largest_component(const ClusterGraph& g, const std::set<int>& idx) {
    std::set<int> best;
    std::set<int> left = idx;
    while (!left.empty()) {
        std::vector<int> stack = {*left.begin()};
        std::set<int> comp;
        left.erase(left.begin());
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            comp.insert(v);
            for (auto it = left.begin(); it != left.end();) {
                if (g.connected(v, *it)) {
                    stack.push_back(*it);
                    it = left.erase(it);
                } else {
                    ++it;
                }
            }
        }
        if (comp.size() > best.size()) best = comp;
    }
    return best;
}

// Best residual node to attach: lowest mean latency, then higher memory,
// then lower index.
inline int best_attach(const ClusterGraph& g, const std::set<int>& group,
                       const std::set<int>& pool) {
    int best = -1;
    double best_lat = std::numeric_limits<double>::infinity();
    for (int x : pool) {
        if (group.count(x)) continue;
        const double lat = mean_latency_to(g, x, group);
        if (std::isinf(lat)) continue;
        if (lat < best_lat ||
            (lat == best_lat && best >= 0 &&
             (g.node(x).memory_gb > g.node(best).memory_gb ||
              (g.node(x).memory_gb == g.node(best).memory_gb && x < best)))) {
            best = x;
            best_lat = lat;
        }
    }
    return best;
}

// Candidate repair around Alg. 1's feasibility verdict: keep the largest
// connected component, grow by cheap residual neighbors until the memory
// threshold and target size are met, then trim latency-worst non-cut nodes
// while the group is oversized or starves the remaining tasks.
inline std::set<int> repair_candidate(const ClusterGraph& g, std::set<int> cand,
                                      const std::set<int>& residual, double req,
                                      int target, double remaining_req,
                                      int remaining_cnt) {
    if (cand.empty()) {
        int seed = -1;
        for (int x : residual)
            if (seed < 0 || g.node(x).memory_gb > g.node(seed).memory_gb) seed = x;
        if (seed < 0) return {};
        cand.insert(seed);
    } else {
        cand = largest_component(g, cand);
    }
    const double residual_mem = group_memory(g, residual);
    std::set<int> group = cand;
    double mem = group_memory(g, group);
    while (mem < req || static_cast<int>(group.size()) < target) {
        if (mem >= req) {
            // Target-filling is advisory: stop rather than starve later tasks.
            if (residual_mem - mem < remaining_req + 1e-9) break;
            if (static_cast<int>(residual.size() - group.size()) <= remaining_cnt) break;
        }
        const int pick = best_attach(g, group, residual);
        if (pick < 0) break;
        group.insert(pick);
        mem += g.node(pick).memory_gb;
    }
    while (group.size() > 1) {
        const bool oversized = static_cast<int>(group.size()) > target;
        const bool starving =
            residual_mem - mem < remaining_req - 1e-9 ||
            static_cast<int>(residual.size() - group.size()) < remaining_cnt;
        if (!oversized && !starving) break;
        int worst = -1;
        double worst_lat = -1.0;
        for (int x : group) {
            if (mem - g.node(x).memory_gb < req) continue;
            std::set<int> rest = group;
            rest.erase(x);
            if (!is_connected_index_set(g, rest)) continue;
            const double lat = mean_latency_to(g, x, rest);
            if (lat > worst_lat) {
                worst = x;
                worst_lat = lat;
            }
        }
        if (worst < 0) break;
        group.erase(worst);
        mem -= g.node(worst).memory_gb;
    }
    return group;
}

}  // namespace detail

// Algorithm-1 style assignment: global precheck, then peel per-task groups
// off the residual graph in priority order using the classifier, carrying
// infeasible candidates into the next iteration.
inline Assignment assign_tasks(const ClusterGraph& g, const GnnModel& m,
                               const std::vector<TaskSpec>& tasks,
                               const FeatureConfig& fcfg = FeatureConfig::standard(),
                               double overhead_factor = 1.2) {
    Assignment out;
    const int n = g.size();
    for (int i = 0; i < n; ++i) out.leftovers.insert(g.node(i).id);
    if (tasks.empty()) return out;
    if (static_cast<int>(tasks.size()) > n) throw DomainError("more tasks than machines");
    if (m.feature_dim != fcfg.feature_dim())
        throw DomainError("model feature dimension does not match feature config");
    if (m.num_classes < static_cast<int>(tasks.size()))
        throw DomainError("model class count below task count");

    double total_req = 0.0;
    for (const auto& t : tasks) total_req += requirement_gb(t, overhead_factor);
    if (g.total_memory_gb() < total_req)
        throw DomainError("insufficient aggregate memory");

    const std::vector<int> order = priority_order(tasks);
    std::vector<TaskSpec> prio(tasks.size());
    for (size_t r = 0; r < order.size(); ++r) prio[r] = tasks[order[r]];
    const std::vector<int> targets = size_classes(prio, n);
    const int num_tasks = static_cast<int>(tasks.size());

    std::set<int> residual;  // node indices still unassigned
    for (int i = 0; i < n; ++i) residual.insert(i);
    std::set<int> carry;
    int prev_size = n;

    for (int r = 0; r < num_tasks; ++r) {
        const TaskSpec& t = prio[r];
        const double req = requirement_gb(t, overhead_factor);
        double remaining_req = 0.0;
        for (int r2 = r + 1; r2 < num_tasks; ++r2)
            remaining_req += requirement_gb(prio[r2], overhead_factor);
        const int remaining_cnt = num_tasks - 1 - r;

        if (residual.empty()) {
            out.waiting.push_back(t.name);
            continue;
        }

        std::set<int> cand = carry;
        carry.clear();
        {
            std::set<int> ids;
            for (int i : residual) ids.insert(g.node(i).id);
            const ClusterGraph sub = subgraph(g, ids);
            const FeatureMatrix x = embed_features(sub, fcfg);
            const Prediction pred = predict(m, sub, x.rows);
            const int cls = class_for_rank(r, num_tasks);
            for (int i = 0; i < sub.size(); ++i)
                if (pred.labels[i] == cls) cand.insert(g.index_of(sub.node(i).id));
        }

        const int target = std::min(targets[r], prev_size);
        std::set<int> group = detail::repair_candidate(g, cand, residual, req, target,
                                                       remaining_req, remaining_cnt);
        const bool ok = !group.empty() && detail::group_memory(g, group) >= req &&
                        is_connected_index_set(g, group);
        if (ok) {
            std::set<int>& ids = out.groups[t.name];
            for (int i : group) {
                ids.insert(g.node(i).id);
                residual.erase(i);
                out.leftovers.erase(g.node(i).id);
            }
            prev_size = static_cast<int>(group.size());
        } else {
            carry = group;  // merged into the next candidate (Alg. 1 lines 10-13)
            out.waiting.push_back(t.name);
        }

        if (r + 1 < num_tasks && detail::group_memory(g, residual) < remaining_req) {
            for (int r2 = r + 1; r2 < num_tasks; ++r2) out.waiting.push_back(prio[r2].name);
            break;
        }
    }
    return out;
}

inline Assignment replan_after_failure(const ClusterGraph& g, const GnnModel& m,
                                       const std::vector<TaskSpec>& tasks, int failed_id,
                                       const FeatureConfig& fcfg = FeatureConfig::standard(),
                                       double overhead_factor = 1.2) {
    return assign_tasks(remove_machine(g, failed_id), m, tasks, fcfg, overhead_factor);
}

// ---------------------------------------------------------------------------
// Task manifest and assignment files

inline std::vector<TaskSpec> parse_tasks(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DomainError(std::string("task manifest: ") + e.what());
    }
    if (!j.is_array()) throw DomainError("task manifest: expected a JSON array");
    std::vector<TaskSpec> tasks;
    std::set<std::string> names;
    for (const auto& item : j) {
        if (!item.is_object()) throw DomainError("task manifest: entry is not an object");
        for (const auto& [key, _] : item.items())
            if (key != "name" && key != "params" && key != "bytes_per_param" &&
                key != "min_memory_gb")
                throw DomainError("task manifest: unknown key \"" + key + "\"");
        TaskSpec t;
        if (!item.contains("name") || !item["name"].is_string() ||
            item["name"].get<std::string>().empty())
            throw DomainError("task manifest: missing or empty name");
        t.name = item["name"].get<std::string>();
        if (!names.insert(t.name).second)
            throw DomainError("task manifest: duplicate task \"" + t.name + "\"");
        if (!item.contains("params") || !item["params"].is_number_integer() ||
            item["params"].get<std::int64_t>() <= 0)
            throw DomainError("task manifest: params must be a positive integer (" + t.name +
                              ")");
        t.param_count = item["params"].get<std::int64_t>();
        if (item.contains("bytes_per_param")) {
            if (!item["bytes_per_param"].is_number() ||
                item["bytes_per_param"].get<double>() <= 0.0)
                throw DomainError("task manifest: bytes_per_param must be positive (" +
                                  t.name + ")");
            t.bytes_per_param = item["bytes_per_param"].get<double>();
        }
        if (item.contains("min_memory_gb")) {
            if (!item["min_memory_gb"].is_number() ||
                item["min_memory_gb"].get<double>() <= 0.0)
                throw DomainError("task manifest: min_memory_gb must be positive (" + t.name +
                                  ")");
            t.min_memory_gb = item["min_memory_gb"].get<double>();
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

inline std::string serialize_assignment(const Assignment& a,
                                        const nlohmann::json& meta = nullptr) {
    nlohmann::json j;
    j["groups"] = nlohmann::json::object();
    for (const auto& [name, ids] : a.groups) j["groups"][name] = ids;
    j["leftovers"] = a.leftovers;
    j["waiting"] = a.waiting;
    if (!meta.is_null()) j["meta"] = meta;
    return j.dump(2) + "\n";
}

inline Assignment parse_assignment(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DomainError(std::string("assignment: ") + e.what());
    }
    if (!j.is_object() || !j.contains("groups") || !j.contains("leftovers") ||
        !j.contains("waiting"))
        throw DomainError("assignment: missing groups/leftovers/waiting");
    Assignment a;
    for (const auto& [name, ids] : j["groups"].items())
        for (const auto& id : ids) a.groups[name].insert(id.get<int>());
    for (const auto& id : j["leftovers"]) a.leftovers.insert(id.get<int>());
    for (const auto& name : j["waiting"]) a.waiting.push_back(name.get<std::string>());
    return a;
}

}  // namespace hulk
