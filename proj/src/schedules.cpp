#include "evo/schedules.hpp"

#include "evo/core.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <string>

namespace evo {

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar, double eta)
    : alpha_bar_(std::move(alpha_bar)), eta_(eta) {
    if (alpha_bar_.size() < 2) throw ConfigError("schedule.alpha_bar: need at least one step");
    if (!(eta_ >= 0.0 && eta_ <= 1.0)) throw ConfigError("schedule.eta: must lie in [0, 1]");
    if (alpha_bar_.front() != 1.0) throw ConfigError("schedule.alpha_bar: alpha_bar[0] must be 1");
    for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
        if (!(alpha_bar_[t] < alpha_bar_[t - 1])) {
            throw ConfigError("schedule.alpha_bar: must be strictly decreasing (step " + std::to_string(t) + ")");
        }
    }
    if (!(alpha_bar_.back() > 0.0)) throw ConfigError("schedule.alpha_bar: final value must be positive");
    for (int t = 1; t <= num_steps(); ++t) {
        const double s = sigma(t);
        if (!std::isfinite(s) || s < 0.0) {
            throw ConfigError("schedule: sigma at step " + std::to_string(t) + " is not finite");
        }
    }
}

double NoiseSchedule::sigma(int t) const {
    const double a_t = alpha_bar(t);
    const double a_prev = alpha_bar(t - 1);
    return eta_ * std::sqrt((1.0 - a_prev) / (1.0 - a_t)) * std::sqrt(1.0 - a_t / a_prev);
}

NoiseSchedule make_linear_schedule(int num_steps, double beta_min, double beta_max, double eta) {
    if (num_steps < 1) throw ConfigError("schedule.num_steps: must be >= 1");
    if (!(beta_min > 0.0)) throw ConfigError("schedule.beta_min: must be > 0");
    if (!(beta_max >= beta_min)) throw ConfigError("schedule.beta_max: must be >= beta_min");
    if (!(beta_max < 1.0)) throw ConfigError("schedule.beta_max: must be < 1");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("schedule.eta: must lie in [0, 1]");

    std::vector<double> alpha_bar(static_cast<std::size_t>(num_steps) + 1);
    alpha_bar[0] = 1.0;
    for (int i = 1; i <= num_steps; ++i) {
        const double frac = num_steps == 1 ? 0.0 : static_cast<double>(i - 1) / (num_steps - 1);
        const double beta = beta_min + (beta_max - beta_min) * frac;
        alpha_bar[static_cast<std::size_t>(i)] = alpha_bar[static_cast<std::size_t>(i) - 1] * (1.0 - beta);
    }
    return NoiseSchedule(std::move(alpha_bar), eta);
}

FlowTimeGrid::FlowTimeGrid(std::vector<double> s_values, std::vector<double> sigma)
    : s_values_(std::move(s_values)), sigma_(std::move(sigma)) {
    if (s_values_.size() < 2) throw ConfigError("flow grid: need at least one step");
    if (s_values_.front() != 1.0 || s_values_.back() != 0.0) {
        throw ConfigError("flow grid: must run from s = 1 to s = 0");
    }
    for (std::size_t k = 1; k < s_values_.size(); ++k) {
        if (!(s_values_[k] < s_values_[k - 1])) throw ConfigError("flow grid: s values must be strictly decreasing");
    }
    if (sigma_.size() != s_values_.size() - 1) throw ConfigError("flow grid: need one sigma per step");
    for (double s : sigma_) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("flow grid: sigma must be finite and >= 0");
    }
}

FlowTimeGrid make_uniform_flow_grid(int num_steps, double sigma_scale) {
    if (num_steps < 1) throw ConfigError("schedule.num_steps: must be >= 1");
    if (!(sigma_scale >= 0.0)) throw ConfigError("schedule.sigma_scale: must be >= 0");
    std::vector<double> s(static_cast<std::size_t>(num_steps) + 1);
    std::vector<double> sigma(static_cast<std::size_t>(num_steps));
    for (int k = 0; k <= num_steps; ++k) s[static_cast<std::size_t>(k)] = 1.0 - static_cast<double>(k) / num_steps;
    s.back() = 0.0;
    for (int k = 0; k < num_steps; ++k) sigma[static_cast<std::size_t>(k)] = sigma_scale * s[static_cast<std::size_t>(k)];
    return FlowTimeGrid(std::move(s), std::move(sigma));
}

std::pair<EvolutionSchedule, PopulationSchedule> validate_schedules(EvolutionSchedule schedule,
                                                                    PopulationSchedule sizes,
                                                                    int num_steps) {
    const auto& times = schedule.times;
    if (times.empty()) throw ConfigError("evolution_schedule: must not be empty");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 1 || times[i] > num_steps) {
            throw ConfigError("evolution_schedule[" + std::to_string(i) + "]: step " + std::to_string(times[i]) +
                              " outside [1, " + std::to_string(num_steps) + "]");
        }
        if (i > 0 && times[i] >= times[i - 1]) {
            throw ConfigError("evolution_schedule: steps must be strictly decreasing");
        }
    }
    if (sizes.sizes.size() != times.size() + 1) {
        throw ConfigError("population_schedule: expected " + std::to_string(times.size() + 1) + " sizes, got " +
                          std::to_string(sizes.sizes.size()));
    }
    for (std::size_t i = 0; i < sizes.sizes.size(); ++i) {
        if (sizes.sizes[i] == 0) throw ConfigError("population_schedule[" + std::to_string(i) + "]: must be >= 1");
    }
    if (sizes.sizes[0] < sizes.sizes[1]) {
        spdlog::warn("population_schedule: k_start ({}) is smaller than k_T ({})", sizes.sizes[0], sizes.sizes[1]);
    }
    return {std::move(schedule), std::move(sizes)};
}

EvolutionSchedule make_uniform_evolution_schedule(int start, int generations) {
    if (start < 1) throw ConfigError("evolution_schedule: start step must be >= 1");
    if (generations < 1 || generations > start) throw ConfigError("evolution_schedule: generations must lie in [1, start]");
    EvolutionSchedule out;
    const int interval = start / generations;
    for (int g = 0; g < generations; ++g) out.times.push_back(start - g * interval);
    return out;
}

PopulationSchedule make_population_schedule(std::size_t k, std::size_t generations) {
    PopulationSchedule out;
    out.sizes.push_back(2 * k);
    for (std::size_t g = 0; g < generations; ++g) out.sizes.push_back(k);
    return out;
}

std::size_t evosearch_nfe(const EvolutionSchedule& schedule, const PopulationSchedule& sizes) {
    std::size_t total = sizes.sizes.at(0) * static_cast<std::size_t>(schedule.times.at(0));
    for (std::size_t g = 1; g < schedule.times.size(); ++g) {
        total += sizes.sizes.at(g) * static_cast<std::size_t>(schedule.times[g - 1]);
    }
    return total;
}

}  // namespace evo
