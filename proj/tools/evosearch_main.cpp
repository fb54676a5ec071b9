// Experiment runner: run / sweep / compare.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.

#include "evo/experiment.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct CommonFlags {
    std::optional<std::uint64_t> seed_override;
    std::string output_dir;
    bool quiet = false;
};

evo::ExperimentConfig load(const std::string& path, const CommonFlags& flags) {
    auto cfg = evo::load_experiment_config(path);
    if (flags.seed_override) cfg.seeds = {*flags.seed_override};
    if (!flags.output_dir.empty()) cfg.output_dir = flags.output_dir;
    return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw evo::RuntimeError("cannot write " + path.string());
    out << text;
}

// A compare argument is either a run directory or the config that produced it.
std::filesystem::path run_dir_of(const std::string& arg) {
    const std::filesystem::path p(arg);
    if (std::filesystem::is_regular_file(p)) return evo::load_experiment_config(p).output_dir;
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EvoSearch and baselines on analytic Gaussian-mixture models"};
    app.require_subcommand(1);
    CommonFlags flags;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed-override", flags.seed_override, "Run only this seed");
        cmd->add_option("--output-dir", flags.output_dir, "Write artifacts here instead of the config's output_dir");
        cmd->add_flag("--quiet", flags.quiet, "Only print warnings and errors");
    };

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run every configured method and seed at the configured budget");
    run->add_option("config", config_path, "Experiment config (YAML)")->required();
    add_common(run);

    std::vector<std::uint64_t> budgets;
    auto* sweep = app.add_subcommand("sweep", "Repeat the run over a list of NFE budgets");
    sweep->add_option("config", config_path, "Experiment config (YAML)")->required();
    sweep->add_option("--budgets", budgets, "Ascending NFE budgets (default: sweep.budgets from the config)")->delimiter(',');
    add_common(sweep);

    std::vector<std::string> runs;
    auto* compare = app.add_subcommand("compare", "Tabulate completed runs (run directories or their configs)");
    compare->add_option("runs", runs, "Run directories or config files")->required();
    compare->add_option("--output-dir", flags.output_dir, "Where to write comparison.md and comparison.csv");
    compare->add_flag("--quiet", flags.quiet, "Do not print the table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    spdlog::set_level(flags.quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        const evo::RunOptions options{flags.quiet};
        if (run->parsed()) {
            const auto cfg = load(config_path, flags);
            evo::run_experiment(cfg, cfg.output_dir, cfg.nfe_budget, options);
            if (!flags.quiet) spdlog::info("wrote {}", cfg.output_dir.string());
        } else if (sweep->parsed()) {
            const auto cfg = load(config_path, flags);
            const auto& list = budgets.empty() ? cfg.sweep_budgets : budgets;
            if (list.empty()) throw evo::ConfigError(config_path + ": sweep.budgets: no budgets given (use --budgets)");
            evo::sweep_experiment(cfg, cfg.output_dir, list, options);
            if (!flags.quiet) spdlog::info("wrote {}", cfg.output_dir.string());
        } else {
            std::vector<std::filesystem::path> dirs;
            for (const auto& r : runs) dirs.push_back(run_dir_of(r));
            const auto rows = evo::compare_runs(dirs);
            const std::filesystem::path out = flags.output_dir.empty() ? "." : flags.output_dir;
            std::filesystem::create_directories(out);
            const auto markdown = evo::comparison_markdown(rows);
            write_file(out / "comparison.md", markdown);
            write_file(out / "comparison.csv", evo::comparison_csv(rows));
            if (!flags.quiet) std::cout << markdown;
        }
    } catch (const evo::ConfigError& e) {
        spdlog::error("configuration error: {}", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        spdlog::error("runtime error: {}", e.what());
        return kRuntimeError;
    }
    return kOk;
}
