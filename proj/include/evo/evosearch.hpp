#pragma once

#include "evo/core.hpp"
#include "evo/rewards.hpp"
#include "evo/rng.hpp"
#include "evo/samplers.hpp"
#include "evo/schedules.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace evo {

struct EvoConfig {
    double beta = 0.3;              // initial-noise mutation rate
    std::size_t elites = 4;         // m
    std::size_t tournament_size = 2;  // b
    EvolutionSchedule schedule;     // T
    PopulationSchedule populations; // K
    std::size_t final_k = 10;

    /// Checks ranges and schedule consistency against `num_steps`.
    void validate(int num_steps) const;
};

/// Evolution-schedule index j -> every state cached at t_j so far.
struct PopulationLedger {
    std::vector<Batch> pools;
};

/// Rewards aligned 1:1 with PopulationLedger::pools by concatenation order.
struct RewardLedger {
    std::vector<std::vector<double>> rewards;
};

/// One fully denoised, reward-evaluated sample.
struct Event {
    int generation = 0;
    std::uint64_t cumulative_nfe = 0;
    double reward = 0.0;
    std::vector<double> x;
};

struct GenerationStats {
    int generation = 0;
    int step = 0;
    std::size_t evaluated = 0;
    double mean = 0.0;
    double max = 0.0;
    double std = 0.0;
    std::vector<std::size_t> pool_sizes;
    std::uint64_t cumulative_nfe = 0;
};

struct SearchResult {
    std::string method;
    Batch outputs;                       // final_k best samples, descending reward
    std::vector<double> output_rewards;
    std::vector<Event> events;           // archive in evaluation order
    std::vector<double> best_reward_curve;  // running best over events
    std::vector<GenerationStats> generation_stats;
    NfeLedger ledger;

    double best_reward() const { return output_rewards.empty() ? best_reward_curve.back() : output_rewards.front(); }
};

/// child = sqrt(1 - beta^2) parent + beta xi, xi ~ N(0, I) from key.particle(i).
Batch mutate_initial_noise(const Batch& parents, double beta, const RngKey& key);
/// Same with caller-supplied noise.
Batch mutate_initial_noise(const Batch& parents, double beta, const Batch& noise);

/// child = parent + sigma_t xi with sigma_t the sampler's injected-noise scale
/// at t. Throws ConfigError if that scale is zero (deterministic sampler).
Batch mutate_intermediate(const Batch& parents, int t, const Denoiser& denoiser, const RngKey& key);
Batch mutate_intermediate(const Batch& parents, double sigma, const Batch& noise);

/// Pool indices of k tournament winners. Each cycle draws b distinct entrants
/// uniformly (cycle c uses key.particle(c)); the highest fitness wins, ties to
/// the lowest index.
std::vector<std::size_t> tournament_select(std::span<const double> fitness, std::size_t k, std::size_t b,
                                           const RngKey& key);
Batch tournament_select(const Batch& pool, std::span<const double> fitness, std::size_t k, std::size_t b,
                        const RngKey& key);

/// Indices of the m largest values, descending, ties to the lowest index.
std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t m);

/// One generation: roll x_start (at t = T[g]) out to x0 while caching the
/// states passing every scheduled step into the pools, score the x0, extend
/// the reward ledger for every index >= g, then return elites plus mutated
/// tournament winners of size K[g + 1]. Evaluated samples are appended to
/// `archive`.
Batch evosearch_generation(const Batch& x_start, std::size_t g, PopulationLedger& pools, RewardLedger& rewards,
                           const EvoConfig& cfg, const Denoiser& denoiser, const RewardFn& fn, const RngKey& key,
                           NfeLedger& ledger, std::vector<Event>& archive);

/// Full search from k_start Gaussian noises. Outputs are the final_k best
/// samples of the archive of every x0 evaluated during the run.
SearchResult evosearch_run(const EvoConfig& cfg, const Denoiser& denoiser, const RewardFn& fn, std::uint64_t seed);

/// Prefix maximum of archive rewards in evaluation order.
std::vector<double> running_best(std::span<const Event> archive);

/// Fills outputs, output_rewards and best_reward_curve from `events`.
void finalize_result(SearchResult& result, std::size_t final_k);

/// Standard-normal batch with particle i drawn from key.particle(i).
Batch gaussian_noise(std::size_t n, std::size_t dim, const RngKey& key);

}  // namespace evo
