#include "evo/evosearch.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <numeric>
#include <random>
#include <string>

namespace evo {

namespace {

// Identical configs are validated once per seed; report each warning once.
void warn_once(const std::string& message) {
    static std::mutex mutex;
    static std::set<std::string> seen;
    const std::lock_guard lock(mutex);
    if (seen.insert(message).second) spdlog::warn("{}", message);
}

}  // namespace

void EvoConfig::validate(int num_steps) const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("evosearch.beta: must lie in [0, 1]");
    if (tournament_size < 1) throw ConfigError("evosearch.tournament_size: must be >= 1");
    if (final_k < 1) throw ConfigError("evosearch.final_k: must be >= 1");
    validate_schedules(schedule, populations, num_steps);
    const auto& k = populations.sizes;
    if (tournament_size > k[0]) {
        throw ConfigError("evosearch.tournament_size: " + std::to_string(tournament_size) +
                          " exceeds the first pool size " + std::to_string(k[0]));
    }
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (elites >= k[i]) {
            throw ConfigError("evosearch.elites: m = " + std::to_string(elites) +
                              " must be smaller than every population size (k[" + std::to_string(i) +
                              "] = " + std::to_string(k[i]) + ")");
        }
    }
    const std::size_t smallest = *std::min_element(k.begin(), k.end());
    if (elites * 4 > smallest) {
        warn_once("evosearch.elites: m = " + std::to_string(elites) + " is more than a quarter of the smallest population (" +
                  std::to_string(smallest) + ")");
    }
}

Batch gaussian_noise(std::size_t n, std::size_t dim, const RngKey& key) {
    Batch out(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = key.particle(i);
        for (double& v : out.row(i)) v = rng.normal();
    }
    return out;
}

Batch mutate_initial_noise(const Batch& parents, double beta, const Batch& noise) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("mutation: beta must lie in [0, 1]");
    if (noise.size() != parents.size() || noise.dim() != parents.dim()) {
        throw std::invalid_argument("mutate_initial_noise: noise shape mismatch");
    }
    const double keep = std::sqrt(1.0 - beta * beta);
    Batch children(parents.size(), parents.dim());
    for (std::size_t k = 0; k < parents.data().size(); ++k) {
        children.data()[k] = keep * parents.data()[k] + beta * noise.data()[k];
    }
    return children;
}

Batch mutate_initial_noise(const Batch& parents, double beta, const RngKey& key) {
    return mutate_initial_noise(parents, beta, gaussian_noise(parents.size(), parents.dim(), key));
}

Batch mutate_intermediate(const Batch& parents, double sigma, const Batch& noise) {
    if (!(sigma >= 0.0)) throw ConfigError("mutation: sigma must be >= 0");
    if (noise.size() != parents.size() || noise.dim() != parents.dim()) {
        throw std::invalid_argument("mutate_intermediate: noise shape mismatch");
    }
    Batch children(parents.size(), parents.dim());
    for (std::size_t k = 0; k < parents.data().size(); ++k) {
        children.data()[k] = parents.data()[k] + sigma * noise.data()[k];
    }
    return children;
}

Batch mutate_intermediate(const Batch& parents, int t, const Denoiser& denoiser, const RngKey& key) {
    const double sigma = denoiser.mutation_sigma(t);
    if (!(sigma > 0.0)) {
        throw ConfigError("mutation: the sampler injects no noise at step " + std::to_string(t) +
                          "; intermediate mutation needs a stochastic schedule (eta > 0 or flow sigma_scale > 0)");
    }
    return mutate_intermediate(parents, sigma, gaussian_noise(parents.size(), parents.dim(), key));
}

std::vector<std::size_t> tournament_select(std::span<const double> fitness, std::size_t k, std::size_t b,
                                           const RngKey& key) {
    const std::size_t n = fitness.size();
    if (n == 0) throw std::invalid_argument("tournament_select: empty pool");
    if (b < 1 || b > n) throw std::invalid_argument("tournament_select: tournament size must lie in [1, pool size]");
    std::vector<std::size_t> winners(k);
    std::vector<std::size_t> entrants;
    entrants.reserve(b);
    for (std::size_t cycle = 0; cycle < k; ++cycle) {
        auto rng = key.particle(cycle);
        // Floyd's sampling: b distinct indices out of n.
        entrants.clear();
        for (std::size_t j = n - b; j < n; ++j) {
            std::uniform_int_distribution<std::size_t> pick(0, j);
            const std::size_t candidate = pick(rng);
            const bool taken = std::find(entrants.begin(), entrants.end(), candidate) != entrants.end();
            entrants.push_back(taken ? j : candidate);
        }
        std::size_t best = entrants.front();
        for (std::size_t e : entrants) {
            if (fitness[e] > fitness[best] || (fitness[e] == fitness[best] && e < best)) best = e;
        }
        winners[cycle] = best;
    }
    return winners;
}

Batch tournament_select(const Batch& pool, std::span<const double> fitness, std::size_t k, std::size_t b,
                        const RngKey& key) {
    if (pool.size() != fitness.size()) throw std::invalid_argument("tournament_select: pool/fitness size mismatch");
    const auto idx = tournament_select(fitness, k, b, key);
    return pool.gather(idx);
}

std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t m) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    order.resize(std::min(m, order.size()));
    return order;
}

namespace {

GenerationStats summarize(int generation, int step, std::span<const double> r, const PopulationLedger& pools,
                          std::uint64_t nfe) {
    GenerationStats s;
    s.generation = generation;
    s.step = step;
    s.evaluated = r.size();
    s.cumulative_nfe = nfe;
    if (!r.empty()) {
        s.mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
        s.max = *std::max_element(r.begin(), r.end());
        double var = 0.0;
        for (double v : r) var += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(var / static_cast<double>(r.size()));
    }
    for (const auto& p : pools.pools) s.pool_sizes.push_back(p.size());
    return s;
}

}  // namespace

Batch evosearch_generation(const Batch& x_start, std::size_t g, PopulationLedger& pools, RewardLedger& rewards,
                           const EvoConfig& cfg, const Denoiser& denoiser, const RewardFn& fn, const RngKey& key,
                           NfeLedger& ledger, std::vector<Event>& archive) {
    const auto& times = cfg.schedule.times;
    if (g >= times.size()) throw std::invalid_argument("evosearch_generation: generation index out of range");
    if (pools.pools.size() != times.size()) pools.pools.resize(times.size());
    if (rewards.rewards.size() != times.size()) rewards.rewards.resize(times.size());
    const std::size_t k = cfg.populations.sizes.at(g + 1);
    const std::size_t m = cfg.elites;
    if (k < m) {
        throw ConfigError("evosearch.elites: m = " + std::to_string(m) + " exceeds the population size " +
                          std::to_string(k));
    }
    const int t_start = times[g];
    const std::uint64_t nfe_before = archive.empty() ? 0 : archive.back().cumulative_nfe;

    // Cache the rollout's states at every scheduled step t_j <= t_start.
    TrajectoryHook hook;
    hook.times.assign(times.begin() + static_cast<std::ptrdiff_t>(g), times.end());
    hook.callback = [&](int t, const Batch& x) {
        const auto it = std::find(times.begin(), times.end(), t);
        pools.pools[static_cast<std::size_t>(it - times.begin())].append(x);
    };
    const auto fit = fitness(x_start, t_start, denoiser, fn, key.fork(Stream::Rollout, g), ledger, &hook);

    for (std::size_t i = g; i < rewards.rewards.size(); ++i) {
        rewards.rewards[i].insert(rewards.rewards[i].end(), fit.rewards.begin(), fit.rewards.end());
    }

    const std::uint64_t work = ledger.model_calls - nfe_before;
    const std::uint64_t per_particle = fit.rewards.empty() ? 0 : work / fit.rewards.size();
    for (std::size_t i = 0; i < fit.rewards.size(); ++i) {
        auto row = fit.x0.row(i);
        archive.push_back(Event{static_cast<int>(g), nfe_before + (i + 1) * per_particle, fit.rewards[i],
                                std::vector<double>(row.begin(), row.end())});
    }
    if (!archive.empty()) archive.back().cumulative_nfe = ledger.model_calls;

    const Batch& pool = pools.pools[g];
    const std::vector<double>& pool_fitness = rewards.rewards[g];

    const auto elite_idx = top_indices(pool_fitness, m);
    Batch children = pool.gather(elite_idx);
    if (k == m) return children;  // pure elitism: nothing to select or mutate
    const Batch parents =
        tournament_select(pool, pool_fitness, k - m, cfg.tournament_size, key.fork(Stream::Selection, g));
    const RngKey mutation_key = key.fork(Stream::Mutation, g);
    children.append(g == 0 ? mutate_initial_noise(parents, cfg.beta, mutation_key)
                           : mutate_intermediate(parents, t_start, denoiser, mutation_key));
    return children;
}

SearchResult evosearch_run(const EvoConfig& cfg, const Denoiser& denoiser, const RewardFn& fn, std::uint64_t seed) {
    cfg.validate(denoiser.num_steps());
    const RngKey key(seed);
    const auto& times = cfg.schedule.times;

    SearchResult result;
    result.method = "evosearch";
    PopulationLedger pools;
    RewardLedger rewards;
    pools.pools.resize(times.size());
    rewards.rewards.resize(times.size());

    Batch x = gaussian_noise(cfg.populations.sizes[0], denoiser.dim(), key.fork(Stream::InitialNoise));
    std::size_t g = 0;
    for (int t = times.front(); t >= 1; --t) {
        if (t == times[g]) {
            const std::size_t before = result.events.size();
            x = evosearch_generation(x, g, pools, rewards, cfg, denoiser, fn, key, result.ledger, result.events);
            std::vector<double> gen_rewards;
            for (std::size_t i = before; i < result.events.size(); ++i) gen_rewards.push_back(result.events[i].reward);
            result.generation_stats.push_back(
                summarize(static_cast<int>(g), t, gen_rewards, pools, result.ledger.model_calls));
            ++g;
            // The last generation's children would be denoised but never
            // scored, so the run ends here.
            if (g == times.size()) break;
        }
        denoiser.step(x, t, key.fork(Stream::Advance, static_cast<std::uint64_t>(t)), result.ledger);
    }
    finalize_result(result, cfg.final_k);
    return result;
}

std::vector<double> running_best(std::span<const Event> archive) {
    if (archive.empty()) throw std::invalid_argument("running_best: empty archive");
    std::vector<double> curve(archive.size());
    double best = archive.front().reward;
    for (std::size_t i = 0; i < archive.size(); ++i) {
        best = std::max(best, archive[i].reward);
        curve[i] = best;
    }
    return curve;
}

void finalize_result(SearchResult& result, std::size_t final_k) {
    if (result.events.empty()) throw RuntimeError(result.method + ": no samples were evaluated");
    std::vector<double> r(result.events.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = result.events[i].reward;
    const auto best = top_indices(r, final_k);
    const std::size_t dim = result.events.front().x.size();
    result.outputs = Batch(best.size(), dim);
    result.output_rewards.clear();
    for (std::size_t i = 0; i < best.size(); ++i) {
        const auto& e = result.events[best[i]];
        std::copy(e.x.begin(), e.x.end(), result.outputs.row(i).begin());
        result.output_rewards.push_back(e.reward);
    }
    result.best_reward_curve = running_best(result.events);
}

}  // namespace evo
