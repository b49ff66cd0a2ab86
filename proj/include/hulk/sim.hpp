#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "hulk/cluster_graph.hpp"
#include "hulk/errors.hpp"
#include "hulk/rng.hpp"
#include "hulk/scheduler.hpp"
#include "hulk/version.hpp"

namespace hulk {

// System A = data parallelism, B = whole-fleet pipeline, C = whole-fleet
// tensor parallelism, Hulk = per-group pipeline over the planner's groups.
enum class Strategy { DataParallel, Pipeline, TensorParallel, HulkGrouped };

inline const char* strategy_label(Strategy s) {
    switch (s) {
        case Strategy::DataParallel: return "A";
        case Strategy::Pipeline: return "B";
        case Strategy::TensorParallel: return "C";
        case Strategy::HulkGrouped: return "Hulk";
    }
    throw DomainError("unknown strategy");
}

inline Strategy parse_strategy(const std::string& s) {
    if (s == "A") return Strategy::DataParallel;
    if (s == "B") return Strategy::Pipeline;
    if (s == "C") return Strategy::TensorParallel;
    if (s == "Hulk") return Strategy::HulkGrouped;
    throw DomainError("unknown strategy \"" + s + "\" (expected A, B, C or Hulk)");
}

struct CostModelConfig {
    std::int64_t tokens_per_step = 2048;
    int micro_batches = 4;  // Gpipe's K
    double activation_bytes_per_boundary = 6400.0;
    double flops_per_param_token = 6.0;
    double tflops_per_compute_unit = 2.0;  // throughput = compute_capability * this
    int model_layers = 24;                 // pipeline-splittable / tensor-parallel layers
    double overhead_factor = 1.2;          // memory overhead, shared with the scheduler
};

struct SimEntry {
    std::string strategy;
    std::string task;
    double comm_ms = 0.0;
    double compute_ms = 0.0;
    double total_ms = 0.0;
};

struct SimReport {
    std::vector<SimEntry> entries;
};

// Latency is ms per 64 bytes; messages pay per started 64-byte chunk.
// Requires a direct edge.
inline double transfer_time(const ClusterGraph& g, int a, int b, double bytes) {
    if (!g.has_node(a) || !g.has_node(b)) throw DomainError("unknown machine id");
    if (bytes < 0.0) throw DomainError("negative byte count");
    const int i = g.index_of(a);
    const int j = g.index_of(b);
    if (!g.connected(i, j))
        throw DomainError("no edge between machines " + std::to_string(a) + " and " +
                          std::to_string(b));
    return std::ceil(bytes / 64.0) * g.adjacency()(i, j);
}

// All-pairs cheapest per-64-byte route; hops forward whole chunks, so
// per-chunk costs add along a path. Used when a strategy needs a pair with
// no direct edge.
struct PathTable {
    Eigen::MatrixXd cost;  // per-64B; inf = unreachable
};

inline PathTable shortest_paths(const ClusterGraph& g) {
    const int n = g.size();
    const double inf = std::numeric_limits<double>::infinity();
    PathTable pt;
    pt.cost = Eigen::MatrixXd::Constant(n, n, inf);
    for (int i = 0; i < n; ++i) pt.cost(i, i) = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (g.connected(i, j)) pt.cost(i, j) = g.adjacency()(i, j);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (pt.cost(i, k) + pt.cost(k, j) < pt.cost(i, j))
                    pt.cost(i, j) = pt.cost(i, k) + pt.cost(k, j);
    return pt;
}

namespace detail {

inline double route_cost(const ClusterGraph& g, const PathTable& pt, int i, int j) {
    const double c = pt.cost(i, j);
    if (std::isinf(c))
        throw DomainError("no route between machines " + std::to_string(g.node(i).id) +
                          " and " + std::to_string(g.node(j).id));
    return c;
}

inline double throughput_flops_per_ms(const MachineNode& n, const CostModelConfig& cfg) {
    return n.compute_capability * cfg.tflops_per_compute_unit * 1e9;
}

inline double task_flops(const TaskSpec& t, double tokens, const CostModelConfig& cfg) {
    return cfg.flops_per_param_token * static_cast<double>(t.param_count) * tokens;
}

// Ring all-reduce: 2(m-1) steps of bytes/m chunks, each step paced by the
// slowest ring edge.
inline double ring_allreduce_ms(const ClusterGraph& g, const PathTable& pt,
                                const std::vector<int>& ring, double bytes) {
    const int m = static_cast<int>(ring.size());
    if (m < 2) return 0.0;
    double slowest = 0.0;
    for (int k = 0; k < m; ++k)
        slowest = std::max(slowest, route_cost(g, pt, ring[k], ring[(k + 1) % m]));
    const double chunk = bytes / m;
    return 2.0 * (m - 1) * std::ceil(chunk / 64.0) * slowest;
}

// Largest-remainder layer split proportional to stage memory; earlier
// stages win remainder ties.
inline std::vector<int> split_layers(const ClusterGraph& g, const std::vector<int>& chain,
                                     int layers) {
    const size_t m = chain.size();
    double total_mem = 0.0;
    for (int i : chain) total_mem += g.node(i).memory_gb;
    std::vector<int> out(m, 0);
    std::vector<double> remainder(m, 0.0);
    int used = 0;
    for (size_t s = 0; s < m; ++s) {
        const double quota = layers * g.node(chain[s]).memory_gb / total_mem;
        out[s] = static_cast<int>(quota);
        remainder[s] = quota - out[s];
        used += out[s];
    }
    std::vector<size_t> by_rem(m);
    for (size_t s = 0; s < m; ++s) by_rem[s] = s;
    std::stable_sort(by_rem.begin(), by_rem.end(),
                     [&](size_t a, size_t b) { return remainder[a] > remainder[b]; });
    for (int k = 0; used < layers; ++used, ++k) ++out[by_rem[k % m]];
    return out;
}

struct StageCost {
    double comm_ms = 0.0;
    double compute_ms = 0.0;
};

// Gpipe-flavored pipeline over an ordered chain: stage boundaries move
// activations forward and gradients back, K micro-batches each; compute
// carries the (K + S - 1)/K bubble factor.
inline StageCost pipeline_cost(const ClusterGraph& g, const PathTable& pt,
                               const std::vector<int>& chain, const TaskSpec& t,
                               const CostModelConfig& cfg) {
    const std::vector<int> layers = split_layers(g, chain, cfg.model_layers);
    std::vector<size_t> stages;
    for (size_t s = 0; s < chain.size(); ++s)
        if (layers[s] > 0) stages.push_back(s);
    StageCost out;
    const double chunks = std::ceil(cfg.activation_bytes_per_boundary / 64.0);
    for (size_t k = 0; k + 1 < stages.size(); ++k)
        out.comm_ms += 2.0 * cfg.micro_batches * chunks *
                       route_cost(g, pt, chain[stages[k]], chain[stages[k + 1]]);
    const double total_flops =
        task_flops(t, static_cast<double>(cfg.tokens_per_step), cfg);
    double stage_sum = 0.0;
    for (size_t s : stages)
        stage_sum += total_flops * layers[s] / cfg.model_layers /
                     throughput_flops_per_ms(g.node(chain[s]), cfg);
    const double fill =
        (cfg.micro_batches + static_cast<double>(stages.size()) - 1.0) / cfg.micro_batches;
    out.compute_ms = fill * stage_sum;
    return out;
}

// Nearest-neighbor chain from the highest-memory member (ties: lower id).
inline std::vector<int> greedy_chain(const ClusterGraph& g, const PathTable& pt,
                                     const std::vector<int>& members) {
    int start = members.front();
    for (int i : members)
        if (g.node(i).memory_gb > g.node(start).memory_gb) start = i;
    std::vector<int> chain = {start};
    std::set<int> left(members.begin(), members.end());
    left.erase(start);
    while (!left.empty()) {
        const int cur = chain.back();
        int best = -1;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int x : left) {
            const double c = pt.cost(cur, x);
            if (c < best_cost) {
                best = x;
                best_cost = c;
            }
        }
        if (best < 0) best = *left.begin();  // unreachable; fail later on route lookup
        chain.push_back(best);
        left.erase(best);
    }
    return chain;
}

}  // namespace detail

// Cost of running one task on the given machines under one strategy.
// A/B/C take the whole fleet; HulkGrouped takes the task's group.
inline SimEntry simulate(const ClusterGraph& g, const std::set<int>& member_ids,
                         const TaskSpec& t, Strategy s,
                         const CostModelConfig& cfg = CostModelConfig{}) {
    if (member_ids.empty()) throw DomainError("empty machine set");
    std::vector<int> members;  // indices, canonical id order
    for (int id : member_ids) {
        if (!g.has_node(id)) throw DomainError("unknown machine id " + std::to_string(id));
        members.push_back(g.index_of(id));
    }
    std::sort(members.begin(), members.end());
    const PathTable pt = shortest_paths(g);

    SimEntry e;
    e.strategy = strategy_label(s);
    e.task = t.name;
    switch (s) {
        case Strategy::DataParallel: {
            std::vector<int> part;
            for (int i : members)
                if (g.node(i).memory_gb >= requirement_gb(t, cfg.overhead_factor))
                    part.push_back(i);
            if (part.empty())
                throw DomainError("no machine fits task \"" + t.name +
                                  "\" for data parallelism");
            const double model_bytes =
                static_cast<double>(t.param_count) * t.bytes_per_param;
            e.comm_ms = detail::ring_allreduce_ms(g, pt, part, model_bytes);
            double slowest = std::numeric_limits<double>::infinity();
            for (int i : part)
                slowest = std::min(slowest,
                                   detail::throughput_flops_per_ms(g.node(i), cfg));
            const double tokens =
                static_cast<double>(cfg.tokens_per_step) / static_cast<double>(part.size());
            e.compute_ms = detail::task_flops(t, tokens, cfg) / slowest;
            break;
        }
        case Strategy::Pipeline: {
            const detail::StageCost c = detail::pipeline_cost(g, pt, members, t, cfg);
            e.comm_ms = c.comm_ms;
            e.compute_ms = c.compute_ms;
            break;
        }
        case Strategy::TensorParallel: {
            e.comm_ms = cfg.model_layers * 2.0 *
                        detail::ring_allreduce_ms(g, pt, members,
                                                  cfg.activation_bytes_per_boundary);
            double agg = 0.0;
            for (int i : members) agg += detail::throughput_flops_per_ms(g.node(i), cfg);
            e.compute_ms =
                detail::task_flops(t, static_cast<double>(cfg.tokens_per_step), cfg) / agg;
            break;
        }
        case Strategy::HulkGrouped: {
            std::vector<std::vector<int>> chains;
            chains.push_back(detail::greedy_chain(g, pt, members));
            chains.push_back(members);
            chains.emplace_back(members.rbegin(), members.rend());
            bool first = true;
            detail::StageCost best;
            for (const auto& chain : chains) {
                const detail::StageCost c = detail::pipeline_cost(g, pt, chain, t, cfg);
                if (first || c.comm_ms < best.comm_ms) best = c;
                first = false;
            }
            e.comm_ms = best.comm_ms;
            e.compute_ms = best.compute_ms;
            break;
        }
    }
    e.total_ms = e.comm_ms + e.compute_ms;
    return e;
}

struct CompareResult {
    SimReport report;
    Assignment assignment;
};

// Full grid: Systems A/B/C on the fleet plus HulkGrouped on the planner's
// groups, one row per (strategy, task), strategies outer, manifest order
// inner.
inline CompareResult compare(const ClusterGraph& g, const GnnModel& m,
                             const std::vector<TaskSpec>& tasks,
                             const CostModelConfig& cfg = CostModelConfig{},
                             const FeatureConfig& fcfg = FeatureConfig::standard()) {
    CompareResult out;
    if (tasks.empty()) return out;
    out.assignment = assign_tasks(g, m, tasks, fcfg, cfg.overhead_factor);
    std::set<int> fleet;
    for (int i = 0; i < g.size(); ++i) fleet.insert(g.node(i).id);
    for (Strategy s :
         {Strategy::DataParallel, Strategy::Pipeline, Strategy::TensorParallel})
        for (const auto& t : tasks)
            out.report.entries.push_back(simulate(g, fleet, t, s, cfg));
    for (const auto& t : tasks) {
        const auto it = out.assignment.groups.find(t.name);
        if (it == out.assignment.groups.end())
            throw DomainError("task \"" + t.name + "\" is waiting; nothing to simulate");
        out.report.entries.push_back(
            simulate(g, it->second, t, Strategy::HulkGrouped, cfg));
    }
    return out;
}

inline double total_comm_ms(const SimReport& r, const std::string& strategy) {
    double sum = 0.0;
    for (const auto& e : r.entries)
        if (e.strategy == strategy) sum += e.comm_ms;
    return sum;
}

inline std::string report_csv(const SimReport& r, std::uint64_t seed) {
    std::string out = "# seed=" + std::to_string(seed) + " tool_version=" + kToolVersion +
                      "\nstrategy,task,comm_ms,compute_ms,total_ms\n";
    char buf[256];
    for (const auto& e : r.entries) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.3f,%.3f,%.3f\n", e.strategy.c_str(),
                      e.task.c_str(), e.comm_ms, e.compute_ms, e.total_ms);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic fleet generation

struct RegionLatencyTable {
    std::vector<std::string> regions;
    Eigen::MatrixXd base_ms;  // inter-region ms per 64B
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> reachable;
    double intra_lo = 1.0;
    double intra_hi = 5.0;

    static const RegionLatencyTable& standard();
};

namespace detail {

inline RegionLatencyTable make_standard_latency_table() {
    RegionLatencyTable t;
    t.regions = standard_regions();
    const int n = static_cast<int>(t.regions.size());
    t.base_ms = Eigen::MatrixXd::Zero(n, n);
    t.reachable =
        Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
    auto idx = [&](const std::string& r) {
        return static_cast<int>(std::find(t.regions.begin(), t.regions.end(), r) -
                                t.regions.begin());
    };
    auto set = [&](const char* a, const char* b, double ms) {
        const int i = idx(a);
        const int j = idx(b);
        t.base_ms(i, j) = t.base_ms(j, i) = ms;
        t.reachable(i, j) = t.reachable(j, i) = 1;
    };
    // Measured rows; the Beijing-Paris pair stays unreachable.
    set("Beijing", "California", 89.1);
    set("Beijing", "Tokyo", 74.3);
    set("Beijing", "Berlin", 250.5);
    set("Beijing", "London", 229.8);
    set("Beijing", "New Delhi", 341.9);
    set("Beijing", "Rome", 296.0);
    set("Beijing", "Brasilia", 341.8);
    set("Nanjing", "California", 97.9);
    set("Nanjing", "Tokyo", 173.8);
    set("Nanjing", "Berlin", 213.7);
    set("Nanjing", "London", 176.7);
    set("Nanjing", "New Delhi", 236.3);
    set("Nanjing", "Paris", 265.1);
    set("Nanjing", "Rome", 741.3);
    set("Nanjing", "Brasilia", 351.3);
    set("California", "Tokyo", 118.8);
    set("California", "Berlin", 144.8);
    set("California", "London", 132.3);
    set("California", "New Delhi", 197.0);
    set("California", "Paris", 133.9);
    set("California", "Rome", 158.6);
    set("California", "Brasilia", 158.6);
    // Remaining pairs: internet-RTT-flavored constants.
    set("Beijing", "Nanjing", 35.0);
    set("Tokyo", "Berlin", 243.0);
    set("Tokyo", "London", 228.0);
    set("Tokyo", "New Delhi", 127.0);
    set("Tokyo", "Paris", 235.0);
    set("Tokyo", "Rome", 251.0);
    set("Tokyo", "Brasilia", 288.0);
    set("Berlin", "London", 24.0);
    set("Berlin", "New Delhi", 129.0);
    set("Berlin", "Paris", 21.0);
    set("Berlin", "Rome", 28.0);
    set("Berlin", "Brasilia", 225.0);
    set("London", "New Delhi", 112.0);
    set("London", "Paris", 9.0);
    set("London", "Rome", 25.0);
    set("London", "Brasilia", 191.0);
    set("New Delhi", "Paris", 105.0);
    set("New Delhi", "Rome", 118.0);
    set("New Delhi", "Brasilia", 320.0);
    set("Paris", "Rome", 23.0);
    set("Paris", "Brasilia", 184.0);
    set("Rome", "Brasilia", 221.0);
    return t;
}

}  // namespace detail

inline const RegionLatencyTable& RegionLatencyTable::standard() {
    static const RegionLatencyTable t = detail::make_standard_latency_table();
    return t;
}

// 8-GPU machine tiers used to sample fleet hardware.
struct GpuTier {
    const char* gpu;
    double compute_capability;
    double memory_gb;
};

inline constexpr GpuTier kGpuRoster[] = {
    {"A100", 8.0, 640.0},     {"A40", 8.6, 384.0},     {"V100", 7.0, 256.0},
    {"RTX A5000", 8.6, 192.0}, {"GTX 1080Ti", 6.1, 88.0}, {"RTX 3090", 8.6, 192.0},
    {"TITAN Xp", 6.1, 96.0},
};
inline constexpr int kGpuRosterSize = static_cast<int>(std::size(kGpuRoster));

// Seeded synthetic fleet over the standard region set. The first machines
// cover every hardware tier once (so e.g. at least one machine fits the
// largest model outright); the rest sample the roster. Inter-region links
// take the table's base latency with +-10% jitter, a seeded fraction of
// pairs drop out, and same-region links are cheap.
inline ClusterGraph generate_fleet(std::uint64_t seed, int n,
                                   const RegionLatencyTable& table =
                                       RegionLatencyTable::standard(),
                                   double disconnect_fraction = 0.05) {
    if (n < 1) throw DomainError("fleet size must be positive");
    Rng rng(seed);
    const int num_regions = static_cast<int>(table.regions.size());
    std::vector<MachineNode> nodes;
    std::vector<int> region_of(n);
    for (int i = 0; i < n; ++i) {
        const GpuTier& tier =
            kGpuRoster[i < kGpuRosterSize ? i
                                          : static_cast<int>(rng.uniform_int(kGpuRosterSize))];
        region_of[i] = static_cast<int>(rng.uniform_int(num_regions));
        nodes.push_back({i, table.regions[region_of[i]], tier.compute_capability,
                         tier.memory_gb});
    }
    std::vector<CommEdge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const int ri = region_of[i];
            const int rj = region_of[j];
            if (ri == rj) {
                edges.push_back({i, j, rng.uniform(table.intra_lo, table.intra_hi)});
                continue;
            }
            if (!table.reachable(ri, rj)) continue;
            if (rng.uniform01() < disconnect_fraction) continue;
            const double jitter = 1.0 + rng.uniform(-0.1, 0.1);
            edges.push_back({i, j, table.base_ms(ri, rj) * jitter});
        }
    return ClusterGraph::build(nodes, edges);
}

}  // namespace hulk
