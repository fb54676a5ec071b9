#pragma once

#include "evo/baselines.hpp"
#include "evo/evosearch.hpp"
#include "evo/metrics.hpp"
#include "evo/models.hpp"
#include "evo/parallel.hpp"
#include "evo/rewards.hpp"
#include "evo/samplers.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace evo {

enum class Method { EvoSearch, BestOfN, ParticleSampling };

std::string to_string(Method method);
Method parse_method(const std::string& name);

/// Everything needed to construct the pre-trained model and its sampler.
struct ModelSpec {
    ModelKind kind = ModelKind::DiffusionEpsilon;
    GaussianMixture mixture = GaussianMixture::ring(8, 1.0, 0.04);
    int num_steps = 50;
    double beta_min = 0.002;
    double beta_max = 0.4;
    double eta = 0.2;
    double flow_sigma_scale = 0.5;
};

/// Parsed experiment file. Population sizes for EvoSearch are a shape: with
/// a budget and scale_to_budget they are rescaled so that the search costs
/// about nfe_budget model calls.
struct ExperimentConfig {
    ModelSpec model;
    RewardFn reward = RewardFn::circle(2.0);
    double target_alpha = 1.0;
    std::vector<Method> methods{Method::EvoSearch, Method::BestOfN, Method::ParticleSampling};
    std::optional<std::uint64_t> nfe_budget;
    EvoConfig evosearch;
    bool scale_to_budget = true;
    std::optional<std::size_t> best_of_n;  // rollouts; derived from the budget when unset
    std::size_t best_of_n_final_k = 10;
    ParticleSamplingConfig particle_sampling;
    bool particles_from_budget = true;
    CoverageSpec coverage;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::filesystem::path output_dir = "runs/default";
    ExecPolicy policy = ExecPolicy::Serial;
    std::vector<std::uint64_t> sweep_budgets;
};

/// The 8-component ring scenario at 2e4 model calls per method.
ExperimentConfig default_experiment_config();

/// Parse a YAML experiment file. Errors are ConfigError messages of the form
/// "<source>:<line>:<column>: <field>: <problem>".
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Round-trippable YAML of a fully resolved config.
std::string dump_experiment_config(const ExperimentConfig& cfg);

Denoiser make_denoiser(const ModelSpec& spec, ExecPolicy policy = ExecPolicy::Serial);

/// Method settings at one budget (or at the declared sizes when budget is empty).
struct ResolvedMethods {
    EvoConfig evosearch;
    std::size_t best_of_n = 0;
    std::size_t best_of_n_final_k = 10;
    ParticleSamplingConfig particle_sampling;
    std::uint64_t evosearch_nfe = 0;
    std::uint64_t budget = 0;
};

/// Applies budget scaling and checks that each method's declared cost lies
/// within 5% of the budget.
ResolvedMethods resolve_methods(const ExperimentConfig& cfg, std::optional<std::uint64_t> budget);

SearchResult run_method(Method method, const ResolvedMethods& resolved, const Denoiser& denoiser,
                        const RewardFn& fn, std::uint64_t seed);

/// Per-seed metrics computed from an event log alone.
struct SeedSummary {
    std::string method;
    std::uint64_t seed = 0;
    std::uint64_t budget = 0;
    std::uint64_t model_calls = 0;
    std::uint64_t events = 0;
    double final_best = 0.0;
    double top_k_mean = 0.0;
    double diversity = 0.0;
    double angular_coverage = 0.0;
    double mode_coverage = 0.0;
};

SeedSummary summarize_events(const std::string& method, std::uint64_t seed, std::uint64_t budget,
                             const std::vector<Event>& events, std::size_t final_k, const CoverageSpec& coverage,
                             const GaussianMixture& model);

std::size_t final_k_for(Method method, const ResolvedMethods& resolved);

struct RunOptions {
    bool quiet = false;
};

/// Runs every method and seed at one budget and writes the run directory:
///   manifest.yaml, summary.csv, generations.csv, curve.svg,
///   <method>/seed_<s>/events.csv, <method>/scatter.svg
std::vector<SeedSummary> run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                        std::optional<std::uint64_t> budget, const RunOptions& options = {});

/// One run directory per budget (budget_<B>/) plus sweep.csv and scaling.svg.
std::vector<SeedSummary> sweep_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                          const std::vector<std::uint64_t>& budgets, const RunOptions& options = {});

struct ComparisonRow {
    std::string run;
    std::string method;
    std::size_t seeds = 0;
    double final_best_mean = 0.0;
    double final_best_std = 0.0;
    double diversity_mean = 0.0;
    double angular_coverage_mean = 0.0;
    double nfe_mean = 0.0;
};

/// Recomputes per-method metrics from the event logs of completed runs.
/// Throws ConfigError when the runs use different rewards.
std::vector<ComparisonRow> compare_runs(const std::vector<std::filesystem::path>& run_dirs);
std::string comparison_markdown(const std::vector<ComparisonRow>& rows);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

}  // namespace evo
