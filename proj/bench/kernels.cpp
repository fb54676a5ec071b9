// Serial reference vs OpenMP kernels on the default ring scenario.
// Args: particle count (population size for EvoSearch), then 0 = serial, 1 = parallel.

#include "evo/baselines.hpp"
#include "evo/evosearch.hpp"
#include "evo/rewards.hpp"

#include <benchmark/benchmark.h>

using namespace evo;

namespace {

Denoiser ring(ExecPolicy policy) {
    return Denoiser(GaussianMixture::ring(8, 1.0, 0.04), make_linear_schedule(50, 0.002, 0.4, 0.2), policy);
}

ExecPolicy policy_of(const benchmark::State& state) {
    return state.range(1) == 0 ? ExecPolicy::Serial : ExecPolicy::Parallel;
}

void BM_DenoiseToEnd(benchmark::State& state) {
    const auto den = ring(policy_of(state));
    const auto n = static_cast<std::size_t>(state.range(0));
    const Batch x = gaussian_noise(n, 2, RngKey(1));
    for (auto _ : state) {
        NfeLedger ledger;
        benchmark::DoNotOptimize(den.denoise_to_end(x, 50, RngKey(2), ledger));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 50);
}

void BM_Fitness(benchmark::State& state) {
    const auto den = ring(policy_of(state));
    const auto n = static_cast<std::size_t>(state.range(0));
    const Batch x = gaussian_noise(n, 2, RngKey(1));
    const auto fn = RewardFn::circle(2.0);
    for (auto _ : state) {
        NfeLedger ledger;
        benchmark::DoNotOptimize(fitness(x, 25, den, fn, RngKey(3), ledger));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 25);
}

void BM_ParticleSampling(benchmark::State& state) {
    const auto den = ring(policy_of(state));
    ParticleSamplingConfig cfg;
    cfg.num_particles = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(particle_sampling(cfg, den, RewardFn::circle(2.0), 0));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 50);
}

void BM_EvoSearchRun(benchmark::State& state) {
    const auto den = ring(policy_of(state));
    const auto k = static_cast<std::size_t>(state.range(0));
    EvoConfig cfg;
    cfg.schedule = make_uniform_evolution_schedule(50, 5);
    cfg.populations = make_population_schedule(k, 5);
    const auto nfe = static_cast<std::int64_t>(evosearch_nfe(cfg.schedule, cfg.populations));
    for (auto _ : state) benchmark::DoNotOptimize(evosearch_run(cfg, den, RewardFn::circle(2.0), 0));
    state.SetItemsProcessed(state.iterations() * nfe);
}

void policies(benchmark::internal::Benchmark* b, std::initializer_list<std::int64_t> sizes) {
    b->ArgNames({"n", "parallel"});
    for (auto n : sizes) {
        for (std::int64_t p : {0, 1}) b->Args({n, p});
    }
    b->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_DenoiseToEnd)->Apply([](auto* b) { policies(b, {400, 4000}); });
BENCHMARK(BM_Fitness)->Apply([](auto* b) { policies(b, {400, 4000}); });
BENCHMARK(BM_ParticleSampling)->Apply([](auto* b) { policies(b, {400, 4000}); });
BENCHMARK(BM_EvoSearchRun)->Apply([](auto* b) { policies(b, {64, 640}); });

BENCHMARK_MAIN();
