#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evo/parallel.hpp"
#include "evo/rng.hpp"

#include <atomic>
#include <cmath>
#include <set>
#include <vector>

using namespace evo;

TEST_CASE("keys are pure functions of the seed and fork path") {
    const RngKey a(42), b(42);
    CHECK(a.value() == b.value());
    CHECK(a.fork(Stream::Rollout, 3).value() == b.fork(Stream::Rollout, 3).value());
    CHECK(a.fork(Stream::Rollout, 3).value() != a.fork(Stream::Rollout, 4).value());
    CHECK(a.fork(Stream::Rollout).value() != a.fork(Stream::Mutation).value());
    CHECK(RngKey(1).value() != RngKey(2).value());
}

TEST_CASE("particle streams are distinct and reproducible") {
    const RngKey key(7);
    std::set<std::uint64_t> first_draws;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        auto r = key.particle(i);
        first_draws.insert(r());
    }
    CHECK(first_draws.size() == 1000);
    auto r1 = key.particle(5), r2 = key.particle(5);
    for (int k = 0; k < 10; ++k) CHECK(r1() == r2());
}

TEST_CASE("uniform draws lie in [0, 1) and normals have unit moments") {
    auto rng = RngKey(3).sequential();
    double sum = 0.0, sq = 0.0;
    constexpr int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::abs(sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("for_each_particle visits every index once under both policies") {
    for (auto policy : {ExecPolicy::Serial, ExecPolicy::Parallel}) {
        std::vector<std::atomic<int>> hits(1000);
        for_each_particle(policy, hits.size(), [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) CHECK(h.load() == 1);
    }
}
