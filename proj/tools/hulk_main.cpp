#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "hulk/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hulk: latency-aware placement planner for distributed training"};
    app.require_subcommand(1);

    std::string cluster_file;
    CLI::App* validate = app.add_subcommand("validate", "Check a cluster file");
    validate->add_option("cluster", cluster_file, "cluster JSON file")->required();

    std::string manifest_path;
    std::string checkpoint_path;
    std::string strategy;
    std::string out_override;
    std::int64_t seed_override = -1;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--manifest", manifest_path, "run manifest JSON")->required();
        cmd->add_option("--out", out_override, "override the manifest output directory");
        cmd->add_option("--seed", seed_override, "override the manifest seed");
    };
    CLI::App* train = app.add_subcommand("train", "Train the node classifier");
    add_common(train);
    CLI::App* assign = app.add_subcommand("assign", "Carve the cluster into task groups");
    add_common(assign);
    assign->add_option("--checkpoint", checkpoint_path, "model checkpoint path");
    CLI::App* simulate = app.add_subcommand("simulate", "Cost one strategy");
    add_common(simulate);
    simulate->add_option("--checkpoint", checkpoint_path, "model checkpoint path");
    simulate->add_option("--strategy", strategy, "A, B, C or Hulk")->required();
    CLI::App* cmp = app.add_subcommand("compare", "Cost all strategies");
    add_common(cmp);
    cmp->add_option("--checkpoint", checkpoint_path, "model checkpoint path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (validate->parsed()) return hulk::cmd_validate(cluster_file, std::cout);
        hulk::RunManifest m = hulk::load_manifest(manifest_path);
        if (seed_override >= 0) {
            m.seed = static_cast<std::uint64_t>(seed_override);
            m.train.seed = m.seed;
            m.model.seed = m.seed;
        }
        if (!out_override.empty()) m.out_dir = out_override;
        std::optional<std::filesystem::path> ckpt;
        if (!checkpoint_path.empty()) ckpt = checkpoint_path;
        if (train->parsed()) return hulk::cmd_train(m, std::cout);
        if (assign->parsed()) return hulk::cmd_assign(m, ckpt, std::cout);
        if (simulate->parsed()) return hulk::cmd_simulate(m, ckpt, strategy, std::cout);
        if (cmp->parsed()) return hulk::cmd_compare(m, ckpt, std::cout);
    } catch (const hulk::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const hulk::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
