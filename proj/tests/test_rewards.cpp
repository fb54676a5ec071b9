#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "evo/evosearch.hpp"
#include "evo/rewards.hpp"
#include "support.hpp"

#include <cmath>
#include <limits>
#include <numbers>

using namespace evo;

namespace {

std::vector<double> p(double x, double y) { return {x, y}; }

RewardFn expr(const char* text) { return RewardFn(ExpressionReward{Expression::parse(text)}); }

}  // namespace

TEST_CASE("circle reward") {
    const auto r = RewardFn::circle(2.0);
    CHECK(r(p(2.0, 0.0)) == 0.0);
    CHECK(r(p(0.0, 0.0)) == -4.0);
    CHECK(r(p(3.0, 0.0)) == -5.0);
    CHECK(r(p(std::sqrt(2.0), std::sqrt(2.0))) == doctest::Approx(0.0));
    // Rotation invariant.
    for (double a = 0.0; a < 6.3; a += 0.7) CHECK(r(p(1.3 * std::cos(a), 1.3 * std::sin(a))) == doctest::Approx(-(4.0 - 1.69)));
}

TEST_CASE("reward counts evaluations") {
    Batch x(5, 2);
    NfeLedger ledger;
    const auto out = reward(RewardFn::circle(2.0), x, ledger);
    CHECK(out.size() == 5);
    CHECK(ledger.reward_calls == 5);
    CHECK(ledger.model_calls == 0);
}

TEST_CASE("radial band and mixture log-density rewards") {
    const RewardFn band(RadialBandReward{{0.0, 0.0}, 2.0, 0.1});
    CHECK(band(p(2.05, 0.0)) == 0.0);
    CHECK(band(p(0.0, -1.95)) == 0.0);
    CHECK(band(p(2.5, 0.0)) == doctest::Approx(-0.4));
    CHECK(band(p(0.0, 0.0)) == doctest::Approx(-1.9));
    const RewardFn shifted(RadialBandReward{{1.0, 1.0}, 1.0, 0.0});
    CHECK(shifted(p(2.0, 1.0)) == 0.0);

    const auto ring = GaussianMixture::ring(8, 1.0, 0.04);
    const RewardFn logp(MixtureLogDensityReward{ring});
    for (auto q : {p(0.0, 0.0), p(1.0, 0.0), p(-0.3, 2.0)}) CHECK(logp(q) == log_density_p0(ring, q));
}

TEST_CASE("expression rewards") {
    CHECK(expr("-(x - 1)^2 - y^2")(p(1.0, 0.0)) == 0.0);
    CHECK(expr("-(x - 1)^2 - y^2")(p(0.0, 0.0)) == -1.0);
    CHECK(expr("2 * x0 + x1 / 4")(p(1.0, 2.0)) == 2.5);
    CHECK(expr("2^3^2")(p(0, 0)) == 512.0);
    CHECK(expr("2**3")(p(0, 0)) == 8.0);
    CHECK(expr("sqrt(abs(x)) + exp(0) + log(e) + cos(pi)")(p(-4.0, 0.0)) == doctest::Approx(3.0));
    CHECK(expr("-x*y")(p(2.0, 3.0)) == -6.0);
    CHECK(expr("sin(pi / 2)")(p(0, 0)) == doctest::Approx(1.0));
    // NaN maps to -infinity so search never prefers an undefined sample.
    CHECK(expr("log(x)")(p(-1.0, 0.0)) == -std::numeric_limits<double>::infinity());
    CHECK(expr("sqrt(x)")(p(-1.0, 0.0)) == -std::numeric_limits<double>::infinity());

    CHECK(Expression::parse("x0 + x3").max_variable() == 3);
    CHECK(Expression::parse("y").max_variable() == 1);
    CHECK(Expression::parse("2").max_variable() == -1);
    CHECK(RewardFn::constant(1.5)(p(9.0, 9.0)) == 1.5);
    CHECK_THROWS_AS(expr("z")(p(1.0, 2.0)), std::invalid_argument);
    for (const char* bad : {"", "x +", "x +* 2", "(x", "x)", "foo(x)", "q", "1..2", "x y"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(Expression::parse(bad), ConfigError);
    }
    try {
        Expression::parse("x + $");
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("column 5") != std::string::npos);
    }
}

TEST_CASE("describe is canonical") {
    CHECK(RewardFn::circle(2.0).describe() == "circle(radius=2)");
    CHECK(RewardFn::circle(2.0).describe() != RewardFn::circle(2.5).describe());
    CHECK(expr("x").describe() == "expression(x)");
}

TEST_CASE("fitness at t = 0 is the reward itself") {
    const Denoiser den(GaussianMixture::ring(8, 1.0, 0.04), make_linear_schedule(50, 0.002, 0.4, 0.2));
    const Batch x = gaussian_noise(9, 2, RngKey(1));
    NfeLedger ledger;
    const auto fit = fitness(x, 0, den, RewardFn::circle(2.0), RngKey(2), ledger);
    CHECK(fit.x0 == x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(fit.rewards[i] == RewardFn::circle(2.0)(x.row(i)));
    CHECK(ledger.model_calls == 0);
    CHECK(ledger.reward_calls == 9);
}

TEST_CASE("fitness of a constant reward is that constant") {
    const Denoiser den(GaussianMixture::ring(8, 1.0, 0.04), make_linear_schedule(50, 0.002, 0.4, 0.2));
    NfeLedger ledger;
    const auto fit = fitness(gaussian_noise(16, 2, RngKey(1)), 30, den, RewardFn::constant(-0.25), RngKey(3), ledger);
    for (double r : fit.rewards) CHECK(r == -0.25);
    CHECK(ledger.model_calls == 16u * 30u);
}

TEST_CASE("fitness from pure noise estimates the expected reward under the sampler") {
    // Single component N(mu, v): the DDIM output is exactly Gaussian with
    // moments given by the affine recursion, so E[x^2 + y^2] is known.
    const double mu = 0.7, v = 0.1;
    const auto ns = make_linear_schedule(50, 0.002, 0.4, 0.2);
    double m = 0.0, s2 = 1.0;
    for (int t = 50; t >= 1; --t) {
        const double a = ns.alpha_bar(t), ap = ns.alpha_bar(t - 1), sig = ns.sigma(t);
        const double V = a * v + 1.0 - a, k = std::sqrt(1.0 - a) / V;
        const double c = std::sqrt(1.0 - ap - sig * sig) - std::sqrt(ap * (1.0 - a) / a);
        const double A = std::sqrt(ap / a) + c * k;
        m = A * m - c * k * std::sqrt(a) * mu;
        s2 = A * A * s2 + sig * sig;
    }
    const double expected = 2.0 * (m * m + s2);

    const Denoiser den(GaussianMixture(2, {1.0}, {{mu, mu}}, {v}), ns);
    const auto fn = expr("x^2 + y^2");
    std::vector<double> means;
    for (std::uint64_t seed : {5, 6}) {
        NfeLedger ledger;
        const auto fit = fitness(gaussian_noise(100000, 2, RngKey(seed)), 50, den, fn, RngKey(seed + 10), ledger);
        const double mean = test::mean_of(fit.rewards);
        const double se = std::sqrt(test::var_of(fit.rewards) / 1e5);
        CHECK(std::abs(mean - expected) < 4 * se);
        means.push_back(mean);
        if (means.size() == 2) CHECK(std::abs(means[0] - means[1]) < 3 * std::sqrt(2.0) * se);
    }
}

TEST_CASE("tilted target") {
    const auto ring = GaussianMixture::ring(8, 1.0, 0.04);
    Batch x(3, 2);
    x.row(1)[0] = 1.0;
    x.row(2)[1] = -2.0;
    SUBCASE("zero reward leaves the base density") {
        const auto lt = log_target_unnormalized(TargetDistribution(ring, RewardFn::constant(0.0), 0.5), x);
        for (std::size_t i = 0; i < 3; ++i) CHECK(lt[i] == log_density_p0(ring, x.row(i)));
    }
    SUBCASE("large alpha approaches the base density") {
        const auto lt = log_target_unnormalized(TargetDistribution(ring, RewardFn::circle(2.0), 1e12), x);
        for (std::size_t i = 0; i < 3; ++i) CHECK(lt[i] == doctest::Approx(log_density_p0(ring, x.row(i))).epsilon(1e-10));
    }
    SUBCASE("alpha must be positive") {
        CHECK_THROWS_AS(TargetDistribution(ring, RewardFn::circle(2.0), 0.0), ConfigError);
    }
    SUBCASE("small alpha puts the mode on the reward circle next to a data mode") {
        // Data modes at radius 2.5, reward peak at radius 2: for alpha = 0.01
        // the kink of the reward at radius 2 dominates the density gradient.
        const auto far = GaussianMixture::ring(8, 2.5, 0.04);
        const TargetDistribution target(far, RewardFn::circle(2.0), 0.01);
        constexpr int n = 601;
        Batch grid(static_cast<std::size_t>(n) * n, 2);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                grid.row(static_cast<std::size_t>(i) * n + j)[0] = -3.0 + 0.01 * i;
                grid.row(static_cast<std::size_t>(i) * n + j)[1] = -3.0 + 0.01 * j;
            }
        }
        const auto lt = log_target_unnormalized(target, grid);
        std::size_t best = 0;
        for (std::size_t k = 1; k < lt.size(); ++k) {
            // Independent evaluation of the same density at every grid point.
            const auto q = grid.row(k);
            double dens = 0.0;
            for (std::size_t c = 0; c < 8; ++c) {
                const auto mu = far.mean(c);
                const double d2 = (q[0] - mu[0]) * (q[0] - mu[0]) + (q[1] - mu[1]) * (q[1] - mu[1]);
                dens += 0.125 * std::exp(-d2 / 0.08) / (2 * std::numbers::pi * 0.04);
            }
            const double manual = std::log(dens) - std::abs(q[0] * q[0] + q[1] * q[1] - 4.0) / 0.01;
            REQUIRE(lt[k] == doctest::Approx(manual).epsilon(1e-9));
            if (lt[k] > lt[best]) best = k;
        }
        const auto q = grid.row(best);
        CHECK(std::hypot(q[0], q[1]) == doctest::Approx(2.0).epsilon(0.01));
        const double angle = std::atan2(q[1], q[0]) / (std::numbers::pi / 4);
        CHECK(std::abs(angle - std::round(angle)) < 0.02);
    }
}
