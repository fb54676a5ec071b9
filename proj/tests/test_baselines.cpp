#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evo/baselines.hpp"
#include "support.hpp"

#include <cmath>
#include <limits>

using namespace evo;

namespace {

Denoiser ring_denoiser() {
    return Denoiser(GaussianMixture::ring(8, 1.0, 0.04), make_linear_schedule(50, 0.002, 0.4, 0.2));
}

ParticleSamplingConfig ps_config(std::size_t n, int interval, double lambda) {
    ParticleSamplingConfig cfg;
    cfg.num_particles = n;
    cfg.resample_interval = interval;
    cfg.lambda = lambda;
    cfg.final_k = n;
    return cfg;
}

}  // namespace

TEST_CASE("best-of-N") {
    const auto den = ring_denoiser();
    const auto fn = RewardFn::circle(2.0);
    SUBCASE("n = 1 keeps its single rollout") {
        const auto r = best_of_n(1, den, fn, 3, 10);
        CHECK(r.events.size() == 1);
        CHECK(r.outputs.size() == 1);
        CHECK(r.ledger.model_calls == 50);
    }
    SUBCASE("constant reward keeps the first rollout on top") {
        const auto r = best_of_n(12, den, RewardFn::constant(1.0), 3, 1);
        CHECK(std::equal(r.events[0].x.begin(), r.events[0].x.end(), r.outputs.row(0).begin()));
    }
    SUBCASE("the best output is the maximum over independently replayed rollouts") {
        const RngKey key(4);
        NfeLedger ledger;
        const auto x0 = den.denoise_to_end(gaussian_noise(64, 2, key.fork(Stream::InitialNoise)), 50,
                                           key.fork(Stream::Rollout, 0), ledger);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < x0.size(); ++i) best = std::max(best, fn(x0.row(i)));
        const auto r = best_of_n(64, den, fn, 4, 10);
        CHECK(r.best_reward() == best);
        CHECK(r.ledger.model_calls == 64u * 50u);
        CHECK(r.events.back().cumulative_nfe == 64u * 50u);
    }
    SUBCASE("n = 0 is a configuration error") { CHECK_THROWS_AS(best_of_n(0, den, fn, 1, 1), ConfigError); }
}

TEST_CASE("posterior mean of x0") {
    const double mu = 0.6, v = 0.3;
    const GaussianMixture one(2, {1.0}, {{mu, -mu}}, {v});
    const Batch x = gaussian_noise(5, 2, RngKey(1));
    SUBCASE("diffusion closed form") {
        const auto ns = make_linear_schedule(50, 0.002, 0.4, 0.2);
        const Denoiser den(one, ns);
        CHECK(posterior_mean_x0(x, 0, den) == x);
        NfeLedger ledger;
        const auto m = posterior_mean_x0(x, 20, den, &ledger);
        CHECK(ledger.model_calls == 5);
        const double a = ns.alpha_bar(20), V = a * v + 1 - a;
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t d = 0; d < 2; ++d) {
                const double c = d == 0 ? mu : -mu;
                CHECK(m.row(i)[d] == doctest::Approx(c + std::sqrt(a) * v / V * (x.row(i)[d] - std::sqrt(a) * c)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("flow closed form") {
        const Denoiser den(one, make_uniform_flow_grid(50, 0.5));
        const auto m = posterior_mean_x0(x, 20, den);
        const double s = 0.4, V = (1 - s) * (1 - s) * v + s * s;
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t d = 0; d < 2; ++d) {
                const double c = d == 0 ? mu : -mu;
                CHECK(m.row(i)[d] == doctest::Approx(c + (1 - s) * v / V * (x.row(i)[d] - (1 - s) * c)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("resampling") {
    SUBCASE("a delta weight selects one ancestor") {
        const std::vector<double> w{0.0, 0.0, 3.0, 0.0};
        for (auto mode : {ResamplingMode::Systematic, ResamplingMode::Multinomial}) {
            CHECK(resample_indices(w, mode, RngKey(1)) == std::vector<std::size_t>{2, 2, 2, 2});
        }
    }
    SUBCASE("systematic resampling of equal weights is the identity") {
        const std::vector<double> w(17, 0.25);
        const auto idx = resample_indices(w, ResamplingMode::Systematic, RngKey(2));
        for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);
    }
    SUBCASE("systematic counts stay within one of n w_i") {
        auto rng = RngKey(3).sequential();
        std::vector<double> w(50);
        double total = 0.0;
        for (double& v : w) total += (v = rng.uniform());
        const auto idx = resample_indices(w, ResamplingMode::Systematic, RngKey(4));
        std::vector<double> counts(50, 0.0);
        for (auto i : idx) counts[i] += 1.0;
        for (std::size_t i = 0; i < 50; ++i) CHECK(std::abs(counts[i] - 50.0 * w[i] / total) < 1.0);
    }
    SUBCASE("multinomial draws follow the weights") {
        const std::size_t n = 30000;
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = i % 3 == 0 ? 1.0 : (i % 3 == 1 ? 2.0 : 7.0);
        const auto idx = resample_indices(w, ResamplingMode::Multinomial, RngKey(5));
        std::vector<double> freq(3, 0.0);
        for (auto i : idx) freq[i % 3] += 1.0 / n;
        for (std::size_t c = 0; c < 3; ++c) {
            const double pr = c == 0 ? 0.1 : (c == 1 ? 0.2 : 0.7);
            CHECK(std::abs(freq[c] - pr) < 4 * std::sqrt(pr * (1 - pr) / n));
        }
    }
    SUBCASE("invalid weights") {
        for (auto w : {std::vector<double>{}, std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, -1.0},
                       std::vector<double>{1.0, std::nan("")}, std::vector<double>{1.0, INFINITY}}) {
            CHECK_THROWS_AS(resample_indices(w, ResamplingMode::Systematic, RngKey(1)), std::invalid_argument);
        }
    }
    SUBCASE("states follow their ancestors") {
        Batch s(3, 1);
        s.row(0)[0] = 10, s.row(1)[0] = 20, s.row(2)[0] = 30;
        const auto r = resample(s, std::vector<double>{0.0, 1.0, 0.0}, ResamplingMode::Multinomial, RngKey(1));
        for (std::size_t i = 0; i < 3; ++i) CHECK(r.row(i)[0] == 20);
    }
}

TEST_CASE("particle sampling") {
    const auto den = ring_denoiser();
    const auto fn = RewardFn::circle(2.0);
    SUBCASE("without resampling it is best-of-N") {
        const auto ps = particle_sampling(ps_config(32, 51, 10.0), den, fn, 7);
        const auto bon = best_of_n(32, den, fn, 7, 32);
        CHECK(ps.outputs == bon.outputs);
        CHECK(ps.ledger.model_calls == bon.ledger.model_calls);
    }
    SUBCASE("a vanishing temperature leaves the particles independent") {
        const auto ps = particle_sampling(ps_config(32, 5, 1e-300), den, fn, 8);
        const auto bon = best_of_n(32, den, fn, 8, 32);
        CHECK(ps.outputs == bon.outputs);
    }
    SUBCASE("particle count and cost are constant") {
        const auto ps = particle_sampling(ps_config(40, 5, 10.0), den, fn, 9);
        CHECK(ps.events.size() == 40);
        CHECK(ps.ledger.model_calls == 40u * 50u);
        CHECK(ps.ledger.reward_calls == 40u * 10u + 40u);
    }
    SUBCASE("resampling moves particles toward higher reward") {
        std::vector<double> ps_best, bon_best;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            ps_best.push_back(particle_sampling(ps_config(100, 5, 10.0), den, fn, seed).best_reward());
            bon_best.push_back(best_of_n(100, den, fn, seed, 10).best_reward());
        }
        CHECK(test::mean_of(ps_best) > test::mean_of(bon_best));
    }
    SUBCASE("underflowing weights fall back to uniform resampling") {
        const RewardFn hopeless(ExpressionReward{Expression::parse("log(0 * x)")});
        const auto ps = particle_sampling(ps_config(16, 5, 10.0), den, hopeless, 1);
        CHECK(ps.events.size() == 16);
        CHECK(ps.best_reward() == -std::numeric_limits<double>::infinity());
    }
    SUBCASE("serial and parallel agree") {
        auto par = den;
        par.set_policy(ExecPolicy::Parallel);
        CHECK(particle_sampling(ps_config(64, 5, 10.0), den, fn, 2).outputs ==
              particle_sampling(ps_config(64, 5, 10.0), par, fn, 2).outputs);
    }
    SUBCASE("invalid settings") {
        CHECK_THROWS_AS(particle_sampling(ps_config(0, 5, 1.0), den, fn, 1), ConfigError);
        CHECK_THROWS_AS(particle_sampling(ps_config(4, 0, 1.0), den, fn, 1), ConfigError);
        CHECK_THROWS_AS(particle_sampling(ps_config(4, 5, 0.0), den, fn, 1), ConfigError);
    }
}

TEST_CASE("methods spend the same budget") {
    const auto den = ring_denoiser();
    const auto fn = RewardFn::circle(2.0);
    EvoConfig cfg;
    cfg.schedule = make_uniform_evolution_schedule(50, 5);
    cfg.populations.sizes = {167, 83, 83, 83, 83, 83};
    const double budget = 20000;
    const auto evo = evosearch_run(cfg, den, fn, 0).ledger.model_calls;
    const auto bon = best_of_n(400, den, fn, 0).ledger.model_calls;
    const auto ps = particle_sampling(ps_config(400, 5, 10.0), den, fn, 0).ledger.model_calls;
    CHECK(evo == 19970);
    for (double nfe : {double(evo), double(bon), double(ps)}) CHECK(std::abs(nfe - budget) <= 0.05 * budget);
}
