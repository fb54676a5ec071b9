#pragma once

#include "evo/core.hpp"
#include "evo/evosearch.hpp"
#include "evo/rewards.hpp"
#include "evo/rng.hpp"
#include "evo/samplers.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace evo {

enum class ResamplingMode { Multinomial, Systematic };

struct ParticleSamplingConfig {
    std::size_t num_particles = 400;
    int resample_interval = 5;  // steps between resampling events
    double lambda = 10.0;       // potential temperature
    ResamplingMode resampling = ResamplingMode::Systematic;
    std::size_t final_k = 10;

    void validate() const;
};

/// n independent rollouts from fresh noise; uses the same random streams as
/// the first EvoSearch generation.
SearchResult best_of_n(std::size_t n, const Denoiser& denoiser, const RewardFn& fn, std::uint64_t seed,
                       std::size_t final_k = 10);

/// E[x0 | x_t]; exact for the analytic models.
Batch posterior_mean_x0(const Batch& x_t, int t, const Denoiser& denoiser, NfeLedger* ledger = nullptr);

/// Ancestor indices drawn in proportion to `weights`.
std::vector<std::size_t> resample_indices(std::span<const double> weights, ResamplingMode mode, const RngKey& key);
Batch resample(const Batch& states, std::span<const double> weights, ResamplingMode mode, const RngKey& key);

/// Feynman-Kac particle steering with the Max potential. Particles are
/// denoised in lockstep; after every `resample_interval` steps the posterior
/// mean of each particle's pre-step state is scored, the running maximum M_i
/// is updated and the post-step particles are resampled with weights
/// exp(lambda (M_i_new - M_i_prev)). The estimate reuses the step's model
/// evaluation, so NFE = particles x steps.
SearchResult particle_sampling(const ParticleSamplingConfig& cfg, const Denoiser& denoiser, const RewardFn& fn,
                               std::uint64_t seed);

}  // namespace evo
