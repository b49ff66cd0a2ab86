#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hulk/cluster_graph.hpp"
#include "hulk/errors.hpp"
#include "hulk/gnn.hpp"
#include "hulk/labeler.hpp"
#include "hulk/scheduler.hpp"
#include "hulk/sim.hpp"
#include "hulk/version.hpp"

namespace hulk {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) throw IoError("failed reading " + p.string());
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + p.parent_path().string());
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.good()) throw IoError("failed writing " + p.string());
}

// Run manifest: one JSON file wiring a whole pipeline run. All paths are
// resolved relative to the manifest's directory.
struct RunManifest {
    std::filesystem::path cluster_path;
    std::filesystem::path tasks_path;
    std::optional<std::filesystem::path> labels_path;
    TrainConfig train;
    GnnConfig model;  // num_classes filled from labels at train time
    CostModelConfig cost;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::vector<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw DomainError(where + ": unknown key \"" + key + "\"");
}

inline double require_positive(const nlohmann::json& v, const std::string& what) {
    if (!v.is_number() || v.get<double>() <= 0.0)
        throw DomainError("run manifest: " + what + " must be positive");
    return v.get<double>();
}

inline int require_positive_int(const nlohmann::json& v, const std::string& what) {
    if (!v.is_number_integer() || v.get<int>() <= 0)
        throw DomainError("run manifest: " + what + " must be a positive integer");
    return v.get<int>();
}

}  // namespace detail

inline RunManifest load_manifest(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DomainError(std::string("run manifest: ") + e.what());
    }
    if (!j.is_object()) throw DomainError("run manifest: expected a JSON object");
    detail::reject_unknown_keys(
        j, {"cluster", "tasks", "labels", "train", "model", "cost_model", "out", "seed"},
        "run manifest");
    for (const char* key : {"cluster", "tasks", "out"})
        if (!j.contains(key) || !j[key].is_string())
            throw DomainError(std::string("run manifest: missing string key \"") + key +
                              "\"");
    if (!j.contains("seed") || !j["seed"].is_number_integer() ||
        j["seed"].get<std::int64_t>() < 0)
        throw DomainError("run manifest: seed must be a non-negative integer");

    RunManifest m;
    const std::filesystem::path base = path.parent_path();
    m.cluster_path = base / j["cluster"].get<std::string>();
    m.tasks_path = base / j["tasks"].get<std::string>();
    m.out_dir = base / j["out"].get<std::string>();
    m.seed = j["seed"].get<std::uint64_t>();
    m.train.seed = m.seed;
    m.model.seed = m.seed;
    if (j.contains("labels")) {
        if (!j["labels"].is_string())
            throw DomainError("run manifest: labels must be a path string");
        m.labels_path = base / j["labels"].get<std::string>();
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        detail::reject_unknown_keys(t, {"learning_rate", "steps", "seed"},
                                    "run manifest train");
        if (t.contains("learning_rate"))
            m.train.learning_rate = detail::require_positive(t["learning_rate"],
                                                             "train.learning_rate");
        if (t.contains("steps")) {
            if (!t["steps"].is_number_integer() || t["steps"].get<int>() < 0)
                throw DomainError("run manifest: train.steps must be a non-negative integer");
            m.train.steps = t["steps"].get<int>();
        }
        if (t.contains("seed")) {
            if (!t["seed"].is_number_integer() || t["seed"].get<std::int64_t>() < 0)
                throw DomainError("run manifest: train.seed must be non-negative");
            m.train.seed = t["seed"].get<std::uint64_t>();
            m.model.seed = m.train.seed;
        }
    }
    if (j.contains("model")) {
        const auto& mm = j["model"];
        detail::reject_unknown_keys(mm, {"edge_dim", "hidden_dim", "gcn_layers"},
                                    "run manifest model");
        if (mm.contains("edge_dim"))
            m.model.edge_dim = detail::require_positive_int(mm["edge_dim"], "model.edge_dim");
        if (mm.contains("hidden_dim"))
            m.model.hidden_dim =
                detail::require_positive_int(mm["hidden_dim"], "model.hidden_dim");
        if (mm.contains("gcn_layers"))
            m.model.gcn_layers =
                detail::require_positive_int(mm["gcn_layers"], "model.gcn_layers");
    }
    if (j.contains("cost_model")) {
        const auto& c = j["cost_model"];
        detail::reject_unknown_keys(
            c,
            {"tokens_per_step", "micro_batches", "activation_bytes_per_boundary",
             "flops_per_param_token", "tflops_per_compute_unit", "model_layers",
             "overhead_factor"},
            "run manifest cost_model");
        if (c.contains("tokens_per_step"))
            m.cost.tokens_per_step = static_cast<std::int64_t>(
                detail::require_positive_int(c["tokens_per_step"], "cost_model.tokens_per_step"));
        if (c.contains("micro_batches"))
            m.cost.micro_batches =
                detail::require_positive_int(c["micro_batches"], "cost_model.micro_batches");
        if (c.contains("activation_bytes_per_boundary"))
            m.cost.activation_bytes_per_boundary = detail::require_positive(
                c["activation_bytes_per_boundary"], "cost_model.activation_bytes_per_boundary");
        if (c.contains("flops_per_param_token"))
            m.cost.flops_per_param_token = detail::require_positive(
                c["flops_per_param_token"], "cost_model.flops_per_param_token");
        if (c.contains("tflops_per_compute_unit"))
            m.cost.tflops_per_compute_unit = detail::require_positive(
                c["tflops_per_compute_unit"], "cost_model.tflops_per_compute_unit");
        if (c.contains("model_layers"))
            m.cost.model_layers =
                detail::require_positive_int(c["model_layers"], "cost_model.model_layers");
        if (c.contains("overhead_factor"))
            m.cost.overhead_factor =
                detail::require_positive(c["overhead_factor"], "cost_model.overhead_factor");
    }
    return m;
}

namespace detail {

inline nlohmann::json output_meta(const RunManifest& m) {
    return nlohmann::json{{"seed", m.seed}, {"tool_version", kToolVersion}};
}

struct TrainedArtifacts {
    ClusterGraph graph;
    std::vector<TaskSpec> tasks;
    LabelSet labels;
};

inline TrainedArtifacts load_inputs(const RunManifest& m) {
    TrainedArtifacts a;
    a.graph = parse_cluster(read_file(m.cluster_path));
    a.tasks = parse_tasks(read_file(m.tasks_path));
    if (m.labels_path)
        a.labels = parse_labels(read_file(*m.labels_path), a.graph);
    else
        a.labels = synthesize_labels(a.graph, a.tasks, m.cost.overhead_factor);
    return a;
}

inline GnnModel load_checkpoint(const RunManifest& m,
                                const std::optional<std::filesystem::path>& override_path) {
    const std::filesystem::path p =
        override_path ? *override_path : m.out_dir / "model.ckpt";
    return load_model(read_file(p));
}

inline std::string format_ms(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace detail

inline int cmd_validate(const std::filesystem::path& cluster_path, std::ostream& out) {
    const std::string text = read_file(cluster_path);
    const std::vector<std::string> violations = lint_cluster(text);
    for (const auto& v : violations) out << v << "\n";
    return violations.empty() ? 0 : 1;
}

inline int cmd_train(const RunManifest& m, std::ostream& out) {
    detail::TrainedArtifacts a = detail::load_inputs(m);
    const FeatureConfig fcfg = FeatureConfig::standard();
    GnnConfig cfg = m.model;
    cfg.num_classes = a.labels.num_classes;
    cfg.seed = m.train.seed;
    GnnModel model = make_model(fcfg.feature_dim(), cfg);
    const FeatureMatrix x = embed_features(a.graph, fcfg);
    TrainResult result = train(std::move(model), a.graph, x.rows, a.labels.labels, m.train);

    write_file(m.out_dir / "model.ckpt", save_model(result.model));
    std::string trace = "# seed=" + std::to_string(m.seed) +
                        " tool_version=" + kToolVersion + "\nstep,loss,accuracy\n";
    char buf[128];
    for (const auto& row : result.trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f\n", row.step, row.loss, row.accuracy);
        trace += buf;
    }
    write_file(m.out_dir / "trace.csv", trace);
    if (!m.labels_path)
        write_file(m.out_dir / "labels.json",
                   serialize_labels(a.labels, a.graph, detail::output_meta(m)));

    const Prediction pred = predict(result.model, a.graph, x.rows);
    const std::vector<int> mask = labeled_indices(a.labels.labels);
    const double acc = accuracy(pred.probs, a.labels.labels, mask);
    out << "parameters: " << param_count(result.model) << "\n";
    std::snprintf(buf, sizeof(buf), "final_accuracy: %.6f\n", acc);
    out << buf;
    return 0;
}

inline int cmd_assign(const RunManifest& m,
                      const std::optional<std::filesystem::path>& checkpoint,
                      std::ostream& out) {
    detail::TrainedArtifacts a = detail::load_inputs(m);
    const GnnModel model = detail::load_checkpoint(m, checkpoint);
    const Assignment assignment =
        assign_tasks(a.graph, model, a.tasks, FeatureConfig::standard(), m.cost.overhead_factor);
    write_file(m.out_dir / "assignment.json",
               serialize_assignment(assignment, detail::output_meta(m)));
    for (const auto& t : a.tasks) {
        const auto it = assignment.groups.find(t.name);
        if (it != assignment.groups.end())
            out << t.name << ": assigned " << it->second.size() << " machines\n";
        else
            out << t.name << ": waiting\n";
    }
    out << "leftovers: " << assignment.leftovers.size() << "\n";
    return 0;
}

inline int cmd_simulate(const RunManifest& m,
                        const std::optional<std::filesystem::path>& checkpoint,
                        const std::string& strategy_str, std::ostream& out) {
    detail::TrainedArtifacts a = detail::load_inputs(m);
    const Strategy strategy = parse_strategy(strategy_str);
    SimReport report;
    if (strategy == Strategy::HulkGrouped) {
        const GnnModel model = detail::load_checkpoint(m, checkpoint);
        const Assignment assignment = assign_tasks(a.graph, model, a.tasks,
                                                   FeatureConfig::standard(),
                                                   m.cost.overhead_factor);
        for (const auto& t : a.tasks) {
            const auto it = assignment.groups.find(t.name);
            if (it == assignment.groups.end())
                throw DomainError("task \"" + t.name + "\" is waiting; nothing to simulate");
            report.entries.push_back(simulate(a.graph, it->second, t, strategy, m.cost));
        }
    } else {
        std::set<int> fleet;
        for (int i = 0; i < a.graph.size(); ++i) fleet.insert(a.graph.node(i).id);
        for (const auto& t : a.tasks)
            report.entries.push_back(simulate(a.graph, fleet, t, strategy, m.cost));
    }
    write_file(m.out_dir / ("simulate_" + strategy_str + ".csv"),
               report_csv(report, m.seed));
    double comm = 0.0;
    double compute = 0.0;
    for (const auto& e : report.entries) {
        comm += e.comm_ms;
        compute += e.compute_ms;
    }
    out << "total_comm_ms: " << detail::format_ms(comm) << "\n";
    out << "total_compute_ms: " << detail::format_ms(compute) << "\n";
    return 0;
}

inline int cmd_compare(const RunManifest& m,
                       const std::optional<std::filesystem::path>& checkpoint,
                       std::ostream& out) {
    detail::TrainedArtifacts a = detail::load_inputs(m);
    const GnnModel model = detail::load_checkpoint(m, checkpoint);
    const CompareResult result =
        compare(a.graph, model, a.tasks, m.cost, FeatureConfig::standard());
    write_file(m.out_dir / "report.csv", report_csv(result.report, m.seed));
    const double hulk = total_comm_ms(result.report, "Hulk");
    const double best = std::min({total_comm_ms(result.report, "A"),
                                  total_comm_ms(result.report, "B"),
                                  total_comm_ms(result.report, "C")});
    out << "hulk_comm_ms: " << detail::format_ms(hulk) << "\n";
    out << "best_baseline_comm_ms: " << detail::format_ms(best) << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "comm_reduction_percent: %+.1f\n",
                  best > 0.0 ? (best - hulk) / best * 100.0 : 0.0);
    out << buf;
    return 0;
}

}  // namespace hulk
