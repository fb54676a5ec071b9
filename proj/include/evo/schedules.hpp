#pragma once

#include "evo/core.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace evo {

/// Discrete variance-preserving diffusion schedule. Step index t runs from
/// 0 (data) to num_steps (noise); alpha_bar[t] is the cumulative signal
/// coefficient, alpha_bar[0] = 1.
class NoiseSchedule {
public:
    NoiseSchedule(std::vector<double> alpha_bar, double eta);

    int num_steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
    const std::vector<double>& alpha_bars() const { return alpha_bar_; }
    double eta() const { return eta_; }

    /// Per-step noise scale of the DDIM-family sampler for the step t -> t-1:
    /// eta * sqrt((1 - a_{t-1}) / (1 - a_t)) * sqrt(1 - a_t / a_{t-1}).
    double sigma(int t) const;

private:
    std::vector<double> alpha_bar_;
    double eta_;
};

/// Linear-beta construction: beta_i evenly spaced on [beta_min, beta_max],
/// alpha_bar_t = prod_{i<=t} (1 - beta_i).
NoiseSchedule make_linear_schedule(int num_steps, double beta_min, double beta_max, double eta);

/// Time grid for the linear flow path x_s = (1-s) x0 + s eps.
/// s_values[0] = 1 (noise) ... s_values[num_steps] = 0 (data). sigma[k] is the
/// SDE diffusion coefficient used on the step s_values[k] -> s_values[k+1].
class FlowTimeGrid {
public:
    FlowTimeGrid(std::vector<double> s_values, std::vector<double> sigma);

    int num_steps() const { return static_cast<int>(s_values_.size()) - 1; }
    const std::vector<double>& s_values() const { return s_values_; }
    const std::vector<double>& sigmas() const { return sigma_; }

    /// Flow time at countdown step index t (t = num_steps is s = 1).
    double s_at(int t) const { return s_values_.at(static_cast<std::size_t>(num_steps() - t)); }
    /// Diffusion coefficient used when leaving countdown step t (t >= 1).
    double sigma_at(int t) const { return sigma_.at(static_cast<std::size_t>(num_steps() - t)); }

private:
    std::vector<double> s_values_;
    std::vector<double> sigma_;
};

/// Uniform grid s_k = 1 - k/num_steps with sigma_s = scale * s.
FlowTimeGrid make_uniform_flow_grid(int num_steps, double sigma_scale);

/// Steps at which evolutionary generations run; strictly decreasing.
struct EvolutionSchedule {
    std::vector<int> times;
    int start() const { return times.front(); }
    std::size_t generations() const { return times.size(); }
};

/// Population sizes {k_start, k_{t_0}, ..., k_{t_n}}; one longer than the
/// evolution schedule.
struct PopulationSchedule {
    std::vector<std::size_t> sizes;
};

/// Throws ConfigError unless the pair is consistent with a sampler of
/// `num_steps` steps. The run starts at T = schedule.times[0] <= num_steps.
std::pair<EvolutionSchedule, PopulationSchedule> validate_schedules(EvolutionSchedule schedule,
                                                                    PopulationSchedule sizes,
                                                                    int num_steps);

/// `generations` evenly spaced steps starting at `start`, e.g. (50, 5) gives
/// {50, 40, 30, 20, 10}.
EvolutionSchedule make_uniform_evolution_schedule(int start, int generations);

/// k_start = 2k followed by k for every generation.
PopulationSchedule make_population_schedule(std::size_t k, std::size_t generations);

/// Model evaluations EvoSearch spends for the given schedules: every
/// generation g >= 1 denoises its k children from t_{g-1} all the way to 0.
std::size_t evosearch_nfe(const EvolutionSchedule& schedule, const PopulationSchedule& sizes);

}  // namespace evo
