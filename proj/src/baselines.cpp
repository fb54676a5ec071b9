#include "evo/baselines.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace evo {

void ParticleSamplingConfig::validate() const {
    if (num_particles < 1) throw ConfigError("particle_sampling.num_particles: must be >= 1");
    if (resample_interval < 1) throw ConfigError("particle_sampling.resample_interval: must be >= 1");
    if (!(lambda > 0.0)) throw ConfigError("particle_sampling.lambda: must be > 0");
    if (final_k < 1) throw ConfigError("particle_sampling.final_k: must be >= 1");
}

SearchResult best_of_n(std::size_t n, const Denoiser& denoiser, const RewardFn& fn, std::uint64_t seed,
                       std::size_t final_k) {
    if (n < 1) throw ConfigError("best_of_n.n: must be >= 1");
    const RngKey key(seed);
    SearchResult result;
    result.method = "best_of_n";
    const int start = denoiser.num_steps();
    const Batch noise = gaussian_noise(n, denoiser.dim(), key.fork(Stream::InitialNoise));
    const auto fit = fitness(noise, start, denoiser, fn, key.fork(Stream::Rollout, 0), result.ledger);
    const std::uint64_t per_particle = static_cast<std::uint64_t>(start);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = fit.x0.row(i);
        result.events.push_back(Event{0, (i + 1) * per_particle, fit.rewards[i], {row.begin(), row.end()}});
    }
    finalize_result(result, final_k);
    return result;
}

Batch posterior_mean_x0(const Batch& x_t, int t, const Denoiser& denoiser, NfeLedger* ledger) {
    return denoiser.posterior_mean_x0(x_t, t, ledger);
}

std::vector<std::size_t> resample_indices(std::span<const double> weights, ResamplingMode mode, const RngKey& key) {
    const std::size_t n = weights.size();
    if (n == 0) throw std::invalid_argument("resample: no weights");
    std::vector<double> cdf(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
            throw std::invalid_argument("resample: weights must be finite and >= 0");
        }
        total += weights[i];
        cdf[i] = total;
    }
    if (!(total > 0.0)) throw std::invalid_argument("resample: weights are all zero");

    auto locate = [&](double u) {
        // First index whose cumulative weight exceeds u; zero-weight entries are never chosen.
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return std::min(static_cast<std::size_t>(it - cdf.begin()), n - 1);
    };

    std::vector<std::size_t> out(n);
    if (mode == ResamplingMode::Multinomial) {
        for (std::size_t i = 0; i < n; ++i) {
            auto rng = key.particle(i);
            out[i] = locate(rng.uniform() * total);
        }
    } else {
        auto rng = key.sequential();
        const double offset = rng.uniform();
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = locate((static_cast<double>(i) + offset) / static_cast<double>(n) * total);
        }
    }
    return out;
}

Batch resample(const Batch& states, std::span<const double> weights, ResamplingMode mode, const RngKey& key) {
    if (states.size() != weights.size()) throw std::invalid_argument("resample: states/weights size mismatch");
    return states.gather(resample_indices(weights, mode, key));
}

SearchResult particle_sampling(const ParticleSamplingConfig& cfg, const Denoiser& denoiser, const RewardFn& fn,
                               std::uint64_t seed) {
    cfg.validate();
    const RngKey key(seed);
    const std::size_t n = cfg.num_particles;
    const int start = denoiser.num_steps();
    SearchResult result;
    result.method = "particle_sampling";

    Batch x = gaussian_noise(n, denoiser.dim(), key.fork(Stream::InitialNoise));
    const RngKey rollout = key.fork(Stream::Rollout, 0);
    std::vector<double> running_max(n, -std::numeric_limits<double>::infinity());
    bool first_event = true;
    Batch x0_hat;
    std::vector<double> log_w(n), weights(n);

    for (int t = start; t >= 1; --t) {
        const bool resample_now = (start - t + 1) % cfg.resample_interval == 0;
        denoiser.step(x, t, rollout.fork(static_cast<std::uint64_t>(t)), result.ledger, resample_now ? &x0_hat : nullptr);
        if (!resample_now) continue;

        const auto estimates = reward(fn, x0_hat, result.ledger);
        std::vector<double> new_max(n);
        for (std::size_t i = 0; i < n; ++i) {
            new_max[i] = std::max(running_max[i], estimates[i]);
            const double increment = first_event ? new_max[i] : new_max[i] - running_max[i];
            log_w[i] = cfg.lambda * increment;
        }
        first_event = false;

        double peak = -std::numeric_limits<double>::infinity();
        for (double v : log_w) peak = std::max(peak, v);
        bool usable = std::isfinite(peak);
        double total = 0.0;
        if (usable) {
            for (std::size_t i = 0; i < n; ++i) {
                weights[i] = std::isnan(log_w[i]) ? 0.0 : std::exp(log_w[i] - peak);
                total += weights[i];
            }
            usable = total > 0.0 && std::isfinite(total);
        }
        if (!usable) {
            spdlog::warn("particle_sampling: resampling weights underflowed at step {}; using uniform weights", t);
            std::fill(weights.begin(), weights.end(), 1.0);
        }
        const auto ancestors = resample_indices(weights, cfg.resampling, key.fork(Stream::Resample, t));
        x = x.gather(ancestors);
        for (std::size_t i = 0; i < n; ++i) running_max[i] = new_max[ancestors[i]];
    }

    const auto final_rewards = reward(fn, x, result.ledger);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = x.row(i);
        result.events.push_back(Event{0, result.ledger.model_calls, final_rewards[i], {row.begin(), row.end()}});
    }
    finalize_result(result, cfg.final_k);
    return result;
}

}  // namespace evo
