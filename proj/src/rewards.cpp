#include "evo/rewards.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace evo {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

RewardFn RewardFn::constant(double c) {
    std::ostringstream text;
    text.precision(17);
    text << c;
    return RewardFn(ExpressionReward{Expression::parse(text.str())});
}

double RewardFn::operator()(std::span<const double> x) const {
    return std::visit(
        Overloaded{
            [&](const CircleReward& c) {
                double sq = 0.0;
                for (double v : x) sq += v * v;
                return -std::abs(sq - c.radius * c.radius);
            },
            [&](const MixtureLogDensityReward& m) { return log_density_p0(m.mixture, x); },
            [&](const RadialBandReward& b) {
                double sq = 0.0;
                for (std::size_t j = 0; j < x.size(); ++j) {
                    const double d = x[j] - (j < b.center.size() ? b.center[j] : 0.0);
                    sq += d * d;
                }
                return -std::max(0.0, std::abs(std::sqrt(sq) - b.radius) - b.width);
            },
            [&](const ExpressionReward& e) {
                const double v = e.expression.evaluate(x);
                return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
            },
        },
        kind_);
}

std::string RewardFn::describe() const {
    std::ostringstream out;
    out.precision(17);
    std::visit(Overloaded{
                   [&](const CircleReward& c) { out << "circle(radius=" << c.radius << ")"; },
                   [&](const MixtureLogDensityReward& m) {
                       out << "mixture_logdensity(components=" << m.mixture.components() << ")";
                   },
                   [&](const RadialBandReward& b) {
                       out << "radial_band(center=[";
                       for (std::size_t j = 0; j < b.center.size(); ++j) out << (j ? "," : "") << b.center[j];
                       out << "],radius=" << b.radius << ",width=" << b.width << ")";
                   },
                   [&](const ExpressionReward& e) { out << "expression(" << e.expression.source() << ")"; },
               },
               kind_);
    return out.str();
}

std::vector<double> reward(const RewardFn& fn, const Batch& x0, NfeLedger& ledger) {
    std::vector<double> out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = fn(x0.row(i));
    ledger.reward_calls += x0.size();
    return out;
}

FitnessResult fitness(const Batch& x_t, int t, const Denoiser& denoiser, const RewardFn& fn, const RngKey& key,
                      NfeLedger& ledger, const TrajectoryHook* hook) {
    FitnessResult result;
    result.x0 = denoiser.denoise_to_end(x_t, t, key, ledger, hook);
    result.rewards = reward(fn, result.x0, ledger);
    return result;
}

TargetDistribution::TargetDistribution(GaussianMixture b, RewardFn r, double a)
    : base(std::move(b)), reward(std::move(r)), alpha(a) {
    if (!(alpha > 0.0)) throw ConfigError("target.alpha: must be > 0");
}

std::vector<double> log_target_unnormalized(const TargetDistribution& target, const Batch& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = log_density_p0(target.base, x.row(i)) + target.reward(x.row(i)) / target.alpha;
    }
    return out;
}

}  // namespace evo
