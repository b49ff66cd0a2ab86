#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hulk/errors.hpp"

namespace hulk {

struct MachineNode {
    int id = 0;
    std::string region;
    double compute_capability = 0.0;  // abstract positive score
    double memory_gb = 0.0;           // total GPU memory on the machine
};

struct CommEdge {
    int a = 0;
    int b = 0;
    double latency_ms_per_64b = 0.0;  // ms to move one 64-byte message
};

// Latency-weighted machine graph. Immutable after construction; mutations
// (add_machine/remove_machine) build new values. W is indexed by node
// position, not id. Absence of an edge is tracked in `mask` so that a
// zero in W never means "very fast link".
class ClusterGraph {
  public:
    using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

    static ClusterGraph build(std::vector<MachineNode> nodes, std::vector<CommEdge> edges) {
        ClusterGraph g;
        g.nodes_ = std::move(nodes);
        g.edges_ = std::move(edges);
        std::string err = g.init_derived();
        if (!err.empty()) throw DomainError(err);
        return g;
    }

    int size() const { return static_cast<int>(nodes_.size()); }
    const std::vector<MachineNode>& nodes() const { return nodes_; }
    const std::vector<CommEdge>& edges() const { return edges_; }
    const Eigen::MatrixXd& adjacency() const { return w_; }
    const Mask& mask() const { return mask_; }

    bool has_node(int id) const { return index_.count(id) > 0; }

    int index_of(int id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw DomainError("unknown machine id " + std::to_string(id));
        return it->second;
    }

    // Positional accessor; pair with index_of(id) for id-based lookup.
    const MachineNode& node(int i) const { return nodes_[static_cast<size_t>(i)]; }

    bool connected(int ia, int ib) const { return mask_(ia, ib) != 0; }

    std::vector<int> neighbor_indices(int i) const {
        std::vector<int> out;
        for (int j = 0; j < size(); ++j)
            if (mask_(i, j)) out.push_back(j);
        return out;
    }

    int degree(int i) const {
        int d = 0;
        for (int j = 0; j < size(); ++j) d += mask_(i, j) ? 1 : 0;
        return d;
    }

    double max_latency() const {
        double m = 0.0;
        for (const auto& e : edges_) m = std::max(m, e.latency_ms_per_64b);
        return m;
    }

    double total_memory_gb() const {
        double s = 0.0;
        for (const auto& n : nodes_) s += n.memory_gb;
        return s;
    }

  private:
    // Populates W/mask/index. Returns an error message instead of throwing so
    // the lint path can reuse it.
    std::string init_derived() {
        if (nodes_.empty()) return "empty cluster";
        const int n = size();
        index_.clear();
        for (int i = 0; i < n; ++i) {
            if (nodes_[i].id < 0) return "negative machine id " + std::to_string(nodes_[i].id);
            if (!index_.emplace(nodes_[i].id, i).second)
                return "duplicate node id " + std::to_string(nodes_[i].id);
            if (nodes_[i].region.empty())
                return "empty region on node " + std::to_string(nodes_[i].id);
            if (!(nodes_[i].compute_capability > 0))
                return "non-positive compute on node " + std::to_string(nodes_[i].id);
            if (!(nodes_[i].memory_gb > 0))
                return "non-positive memory on node " + std::to_string(nodes_[i].id);
        }
        w_ = Eigen::MatrixXd::Zero(n, n);
        mask_ = Mask::Zero(n, n);
        std::vector<CommEdge> canon;
        canon.reserve(edges_.size());
        for (const auto& e : edges_) {
            if (!index_.count(e.a) || !index_.count(e.b))
                return "edge (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                       ") references unknown id";
            if (e.a == e.b) return "self-loop at " + std::to_string(e.a);
            if (!(e.latency_ms_per_64b > 0))
                return "non-positive latency on (" + std::to_string(e.a) + "," +
                       std::to_string(e.b) + ")";
            int ia = index_[e.a], ib = index_[e.b];
            if (mask_(ia, ib)) {
                if (w_(ia, ib) != e.latency_ms_per_64b)
                    return "conflicting duplicate edge (" + std::to_string(e.a) + "," +
                           std::to_string(e.b) + ")";
                continue;  // identical mirror declaration
            }
            w_(ia, ib) = w_(ib, ia) = e.latency_ms_per_64b;
            mask_(ia, ib) = mask_(ib, ia) = 1;
            canon.push_back({std::min(e.a, e.b), std::max(e.a, e.b), e.latency_ms_per_64b});
        }
        edges_ = std::move(canon);
        return {};
    }

    friend std::vector<std::string> validate(const ClusterGraph& g);

    std::vector<MachineNode> nodes_;
    std::vector<CommEdge> edges_;
    Eigen::MatrixXd w_;
    Mask mask_;
    std::unordered_map<int, int> index_;
};

// Re-checks every graph invariant. Violations are data, not failures.
inline std::vector<std::string> validate(const ClusterGraph& g) {
    std::vector<std::string> out;
    std::set<int> seen;
    for (const auto& n : g.nodes()) {
        if (n.id < 0) out.push_back("negative machine id " + std::to_string(n.id));
        if (!seen.insert(n.id).second)
            out.push_back("duplicate node id " + std::to_string(n.id));
        if (n.region.empty()) out.push_back("empty region on node " + std::to_string(n.id));
        if (!(n.compute_capability > 0))
            out.push_back("non-positive compute on node " + std::to_string(n.id));
        if (!(n.memory_gb > 0))
            out.push_back("non-positive memory on node " + std::to_string(n.id));
    }
    std::set<std::pair<int, int>> pairs;
    for (const auto& e : g.edges()) {
        if (e.a == e.b) out.push_back("self-loop at " + std::to_string(e.a));
        if (!(e.latency_ms_per_64b > 0))
            out.push_back("non-positive latency on (" + std::to_string(e.a) + "," +
                          std::to_string(e.b) + ")");
        if (!seen.count(e.a) || !seen.count(e.b))
            out.push_back("edge (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                          ") references unknown id");
        if (!pairs.insert({std::min(e.a, e.b), std::max(e.a, e.b)}).second)
            out.push_back("duplicate edge (" + std::to_string(e.a) + "," +
                          std::to_string(e.b) + ")");
    }
    const auto& w = g.adjacency();
    if (w.rows() != g.size() || w.cols() != g.size()) {
        out.push_back("adjacency shape mismatch");
        return out;
    }
    for (int i = 0; i < g.size(); ++i) {
        if (w(i, i) != 0.0) out.push_back("nonzero diagonal at " + std::to_string(i));
        for (int j = 0; j < g.size(); ++j) {
            if (w(i, j) != w(j, i)) {
                out.push_back("asymmetric adjacency");
                return out;
            }
            if (w(i, j) < 0.0) {
                out.push_back("negative adjacency entry");
                return out;
            }
        }
    }
    return out;
}

namespace detail {

inline std::string lint_node(const nlohmann::json& j, std::vector<MachineNode>& nodes) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "id" && it.key() != "region" && it.key() != "compute" &&
            it.key() != "memory_gb")
            return "unknown key \"" + it.key() + "\" in node";
    if (!j.contains("id") || !j["id"].is_number_integer()) return "node missing integer id";
    if (!j.contains("region") || !j["region"].is_string()) return "node missing region";
    if (!j.contains("compute") || !j["compute"].is_number()) return "node missing compute";
    if (!j.contains("memory_gb") || !j["memory_gb"].is_number())
        return "node missing memory_gb";
    nodes.push_back({j["id"].get<int>(), j["region"].get<std::string>(),
                     j["compute"].get<double>(), j["memory_gb"].get<double>()});
    return {};
}

inline std::string lint_edge(const nlohmann::json& j, std::vector<CommEdge>& edges) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "a" && it.key() != "b" && it.key() != "ms_per_64b")
            return "unknown key \"" + it.key() + "\" in edge";
    if (!j.contains("a") || !j["a"].is_number_integer()) return "edge missing integer a";
    if (!j.contains("b") || !j["b"].is_number_integer()) return "edge missing integer b";
    if (!j.contains("ms_per_64b") || !j["ms_per_64b"].is_number())
        return "edge missing ms_per_64b";
    edges.push_back({j["a"].get<int>(), j["b"].get<int>(), j["ms_per_64b"].get<double>()});
    return {};
}

}  // namespace detail

// Checks cluster-file text and reports every violation found. Used by the
// CLI `validate` command; parse_cluster is the throwing wrapper.
inline std::vector<std::string> lint_cluster(const std::string& text,
                                             ClusterGraph* out_graph = nullptr) {
    std::vector<std::string> violations;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        violations.push_back(std::string("malformed syntax: ") + e.what());
        return violations;
    }
    if (!j.is_object()) {
        violations.push_back("cluster file must be a JSON object");
        return violations;
    }
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "nodes" && it.key() != "edges")
            violations.push_back("unknown key \"" + it.key() + "\"");
    if (!j.contains("nodes") || !j["nodes"].is_array()) {
        violations.push_back("missing \"nodes\" array");
        return violations;
    }
    std::vector<MachineNode> nodes;
    std::vector<CommEdge> edges;
    for (const auto& nj : j["nodes"]) {
        std::string err = detail::lint_node(nj, nodes);
        if (!err.empty()) violations.push_back(err);
    }
    if (j.contains("edges")) {
        if (!j["edges"].is_array()) {
            violations.push_back("\"edges\" must be an array");
        } else {
            for (const auto& ej : j["edges"]) {
                std::string err = detail::lint_edge(ej, edges);
                if (!err.empty()) violations.push_back(err);
            }
        }
    }
    if (!violations.empty()) return violations;
    try {
        ClusterGraph g = ClusterGraph::build(std::move(nodes), std::move(edges));
        if (out_graph) *out_graph = std::move(g);
    } catch (const DomainError& e) {
        violations.push_back(e.what());
    }
    return violations;
}

inline ClusterGraph parse_cluster(const std::string& text) {
    ClusterGraph g;
    auto violations = lint_cluster(text, &g);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "invalid cluster file:";
        for (const auto& v : violations) msg << "\n  " << v;
        throw DomainError(msg.str());
    }
    return g;
}

// Canonical form: nodes sorted by id, edges by (min,max), 2-space indent.
inline std::string serialize_cluster(const ClusterGraph& g) {
    std::vector<MachineNode> nodes = g.nodes();
    std::sort(nodes.begin(), nodes.end(),
              [](const MachineNode& x, const MachineNode& y) { return x.id < y.id; });
    std::vector<CommEdge> edges = g.edges();
    std::sort(edges.begin(), edges.end(), [](const CommEdge& x, const CommEdge& y) {
        return std::tie(x.a, x.b) < std::tie(y.a, y.b);
    });
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : nodes)
        j["nodes"].push_back({{"id", n.id},
                              {"region", n.region},
                              {"compute", n.compute_capability},
                              {"memory_gb", n.memory_gb}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : edges)
        j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"ms_per_64b", e.latency_ms_per_64b}});
    return j.dump(2) + "\n";
}

inline bool same_cluster(const ClusterGraph& a, const ClusterGraph& b) {
    return serialize_cluster(a) == serialize_cluster(b);
}

inline ClusterGraph add_machine(const ClusterGraph& g, const MachineNode& m,
                                const std::vector<std::pair<int, double>>& links) {
    if (g.has_node(m.id)) throw DomainError("duplicate node id " + std::to_string(m.id));
    std::vector<MachineNode> nodes = g.nodes();
    nodes.push_back(m);
    std::vector<CommEdge> edges = g.edges();
    for (const auto& [peer, latency] : links) {
        if (!g.has_node(peer)) throw DomainError("unknown peer id " + std::to_string(peer));
        if (!(latency > 0))
            throw DomainError("non-positive latency on (" + std::to_string(m.id) + "," +
                              std::to_string(peer) + ")");
        edges.push_back({m.id, peer, latency});
    }
    return ClusterGraph::build(std::move(nodes), std::move(edges));
}

inline ClusterGraph remove_machine(const ClusterGraph& g, int id) {
    g.index_of(id);  // throws on unknown id
    std::vector<MachineNode> nodes;
    for (const auto& n : g.nodes())
        if (n.id != id) nodes.push_back(n);
    std::vector<CommEdge> edges;
    for (const auto& e : g.edges())
        if (e.a != id && e.b != id) edges.push_back(e);
    return ClusterGraph::build(std::move(nodes), std::move(edges));
}

// Induced subgraph on `ids`, preserving node order.
inline ClusterGraph subgraph(const ClusterGraph& g, const std::set<int>& ids) {
    std::vector<MachineNode> nodes;
    for (const auto& n : g.nodes())
        if (ids.count(n.id)) nodes.push_back(n);
    std::vector<CommEdge> edges;
    for (const auto& e : g.edges())
        if (ids.count(e.a) && ids.count(e.b)) edges.push_back(e);
    return ClusterGraph::build(std::move(nodes), std::move(edges));
}

inline bool is_connected_index_set(const ClusterGraph& g, const std::set<int>& idx) {
    if (idx.empty()) return false;
    std::vector<int> stack{*idx.begin()};
    std::set<int> seen{*idx.begin()};
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        for (int j : idx)
            if (!seen.count(j) && g.connected(i, j)) {
                seen.insert(j);
                stack.push_back(j);
            }
    }
    return seen.size() == idx.size();
}

inline bool is_connected_subset(const ClusterGraph& g, const std::set<int>& ids) {
    if (ids.empty()) return false;
    std::set<int> idx;
    for (int id : ids) idx.insert(g.index_of(id));
    return is_connected_index_set(g, idx);
}

// ---------------------------------------------------------------------------
// Node feature embedding

inline const std::vector<std::string>& standard_regions() {
    static const std::vector<std::string> regions = {
        "Beijing", "Nanjing",   "California", "Tokyo", "Berlin",
        "London",  "New Delhi", "Paris",      "Rome",  "Brasilia"};
    return regions;
}

struct FeatureConfig {
    std::vector<std::string> regions;     // one-hot vocabulary; unknown slot appended
    std::optional<double> max_compute;    // unset: max over the graph
    std::optional<double> max_memory_gb;  // unset: max over the graph

    static FeatureConfig standard() {
        FeatureConfig cfg;
        cfg.regions = standard_regions();
        cfg.max_compute = 9.0;
        cfg.max_memory_gb = 1024.0;
        return cfg;
    }

    int feature_dim() const { return static_cast<int>(regions.size()) + 1 + 2; }
};

struct FeatureMatrix {
    Eigen::MatrixXd rows;               // one row per node, node order
    std::vector<std::string> regions;   // vocabulary actually used
    double max_compute = 0.0;           // scaling constants, recorded for
    double max_memory_gb = 0.0;         // reproducibility
};

// Row i encodes node i: one-hot region block (unknown slot last), then
// compute and memory scaled into [0, 1] by the configured maxima.
inline FeatureMatrix embed_features(const ClusterGraph& g, const FeatureConfig& cfg) {
    FeatureMatrix fm;
    fm.regions = cfg.regions;
    double maxc = 0.0, maxm = 0.0;
    for (const auto& n : g.nodes()) {
        maxc = std::max(maxc, n.compute_capability);
        maxm = std::max(maxm, n.memory_gb);
    }
    fm.max_compute = cfg.max_compute.value_or(maxc);
    fm.max_memory_gb = cfg.max_memory_gb.value_or(maxm);
    const int nregions = static_cast<int>(cfg.regions.size());
    const int dim = cfg.feature_dim();
    fm.rows = Eigen::MatrixXd::Zero(g.size(), dim);
    for (int i = 0; i < g.size(); ++i) {
        const auto& node = g.nodes()[i];
        int slot = nregions;  // unknown
        for (int r = 0; r < nregions; ++r)
            if (cfg.regions[r] == node.region) {
                slot = r;
                break;
            }
        fm.rows(i, slot) = 1.0;
        fm.rows(i, nregions + 1) =
            std::clamp(node.compute_capability / fm.max_compute, 0.0, 1.0);
        fm.rows(i, nregions + 2) = std::clamp(node.memory_gb / fm.max_memory_gb, 0.0, 1.0);
    }
    return fm;
}

}  // namespace hulk
