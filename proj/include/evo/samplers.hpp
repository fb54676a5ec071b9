#pragma once

#include "evo/core.hpp"
#include "evo/models.hpp"
#include "evo/parallel.hpp"
#include "evo/rng.hpp"
#include "evo/schedules.hpp"

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

namespace evo {

/// Compute accounting. model_calls is the reported NFE.
struct NfeLedger {
    std::uint64_t model_calls = 0;
    std::uint64_t reward_calls = 0;

    friend NfeLedger operator+(NfeLedger a, const NfeLedger& b) {
        a.model_calls += b.model_calls;
        a.reward_calls += b.reward_calls;
        return a;
    }
    friend bool operator==(const NfeLedger&, const NfeLedger&) = default;
};

/// Observer fired on the full particle batch when a trajectory passes one of
/// `times`. The callback receives a const view and cannot alter particles.
struct TrajectoryHook {
    std::vector<int> times;
    std::function<void(int, const Batch&)> callback;
};

/// Coefficients of one DDIM step t -> t-1.
struct DdimCoefficients {
    double alpha_bar_t;
    double alpha_bar_prev;
    double sigma;

    static DdimCoefficients at(const NoiseSchedule& schedule, int t);
    /// sqrt(1 - a_{t-1} - sigma^2); tiny negative radicands clamp to zero,
    /// larger ones throw RuntimeError.
    double direction_scale() const;
};

/// x_{t-1} = sqrt(a_{t-1}) x0_hat + sqrt(1 - a_{t-1} - sigma^2) eps_hat + sigma xi,
/// x0_hat = (x_t - sqrt(1 - a_t) eps_hat) / sqrt(a_t). Counts one model call
/// per particle (the eps_hat evaluation).
void ddim_sde_step(Batch& x, const Batch& eps_hat, const DdimCoefficients& coef, const RngKey& key,
                   NfeLedger& ledger, ExecPolicy policy = ExecPolicy::Serial);

/// Euler step of the flow ODE from s to s_next < s.
void flow_ode_step(Batch& x, double s, double s_next, const Batch& u, NfeLedger& ledger,
                   ExecPolicy policy = ExecPolicy::Serial);

/// Euler-Maruyama step of the marginal-preserving flow SDE:
/// x - [u - sigma^2/2 * score] * ds + sigma sqrt(ds) xi. sigma = 0 is the ODE step.
void flow_sde_step(Batch& x, double s, double s_next, const Batch& u, const Batch& score, double sigma,
                   const RngKey& key, NfeLedger& ledger, ExecPolicy policy = ExecPolicy::Serial);

/// Score of the flow marginal recovered from the velocity:
/// grad log p_s(x) = -((1 - s) u + x) / s.
Batch score_from_velocity(const Batch& u, const Batch& x, double s);

/// The analytic model paired with its time discretization. Step indices count
/// down: t = num_steps is pure noise, t = 0 is data.
class Denoiser {
public:
    Denoiser(GaussianMixture model, NoiseSchedule schedule, ExecPolicy policy = ExecPolicy::Serial);
    Denoiser(GaussianMixture model, FlowTimeGrid grid, ExecPolicy policy = ExecPolicy::Serial);

    ModelKind kind() const;
    int num_steps() const;
    std::size_t dim() const { return model_.dim(); }
    const GaussianMixture& model() const { return model_; }
    ExecPolicy policy() const { return policy_; }
    void set_policy(ExecPolicy policy) { policy_ = policy; }
    const NoiseSchedule* noise_schedule() const { return std::get_if<NoiseSchedule>(&schedule_); }
    const FlowTimeGrid* flow_grid() const { return std::get_if<FlowTimeGrid>(&schedule_); }

    /// Network output at step t: eps_hat (diffusion) or velocity (flow).
    Batch model_output(const Batch& x, int t) const;

    /// Advance every particle from t to t-1. `key` is the per-step key;
    /// particle i draws from key.particle(i). If `x0_estimate` is given it
    /// receives the posterior mean E[x0 | x_t] derived from the same model
    /// evaluation.
    void step(Batch& x, int t, const RngKey& key, NfeLedger& ledger, Batch* x0_estimate = nullptr) const;

    /// Run from t_start to 0; step t draws from key.fork(t). Hooks fire before
    /// the step leaving each listed time (and at 0 after the last step).
    Batch denoise_to_end(Batch x, int t_start, const RngKey& key, NfeLedger& ledger,
                         const TrajectoryHook* hook = nullptr) const;

    /// Posterior mean of x0 given x_t (Tweedie / velocity relation). Counts
    /// one model call per particle when t >= 1 and a ledger is supplied.
    Batch posterior_mean_x0(const Batch& x, int t, NfeLedger* ledger = nullptr) const;

    /// Standard deviation of the noise the sampler injects when leaving t;
    /// used as the intermediate-state mutation strength.
    double mutation_sigma(int t) const;

private:
    GaussianMixture model_;
    std::variant<NoiseSchedule, FlowTimeGrid> schedule_;
    ExecPolicy policy_;
};

}  // namespace evo
