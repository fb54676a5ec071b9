#pragma once

#include "evo/core.hpp"
#include "evo/expression.hpp"
#include "evo/models.hpp"
#include "evo/rng.hpp"
#include "evo/samplers.hpp"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace evo {

/// r(x) = -| ||x||^2 - R^2 |
struct CircleReward {
    double radius = 2.0;
};

/// r(x) = log p(x) under a fixed mixture.
struct MixtureLogDensityReward {
    GaussianMixture mixture;
};

/// Zero inside the annulus | ||x - c|| - R | <= width, linear penalty outside.
struct RadialBandReward {
    std::vector<double> center;
    double radius = 2.0;
    double width = 0.1;
};

struct ExpressionReward {
    Expression expression;
};

/// Reward on clean samples. Total on finite inputs: expression rewards that
/// evaluate to NaN return -infinity.
class RewardFn {
public:
    using Kind = std::variant<CircleReward, MixtureLogDensityReward, RadialBandReward, ExpressionReward>;

    explicit RewardFn(Kind kind) : kind_(std::move(kind)) {}
    static RewardFn circle(double radius) { return RewardFn(CircleReward{radius}); }
    static RewardFn constant(double c);

    double operator()(std::span<const double> x) const;
    const Kind& kind() const { return kind_; }
    /// Canonical one-line description, used to check that runs are comparable.
    std::string describe() const;

private:
    Kind kind_;
};

/// Elementwise reward; adds batch size to ledger.reward_calls.
std::vector<double> reward(const RewardFn& fn, const Batch& x0, NfeLedger& ledger);

struct FitnessResult {
    std::vector<double> rewards;
    Batch x0;
};

/// Single-rollout estimate of E[r(x0) | x_t]: each particle is denoised once
/// from t (stream key.fork(t') per step) and scored. The x0 are kept as
/// output candidates.
FitnessResult fitness(const Batch& x_t, int t, const Denoiser& denoiser, const RewardFn& fn, const RngKey& key,
                      NfeLedger& ledger, const TrajectoryHook* hook = nullptr);

/// Tilted target p0(x) exp(r(x) / alpha) / Z. Only the unnormalized log is exposed.
struct TargetDistribution {
    GaussianMixture base;
    RewardFn reward;
    double alpha = 1.0;

    TargetDistribution(GaussianMixture b, RewardFn r, double a);
};

std::vector<double> log_target_unnormalized(const TargetDistribution& target, const Batch& x);

}  // namespace evo
