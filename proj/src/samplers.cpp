#include "evo/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace evo {

namespace {

void ddim_update(std::span<double> x, std::span<const double> eps, const DdimCoefficients& coef, double dir,
                 ParticleRng* rng) {
    const double sqrt_a = std::sqrt(coef.alpha_bar_t);
    const double sqrt_1ma = std::sqrt(1.0 - coef.alpha_bar_t);
    const double sqrt_prev = std::sqrt(coef.alpha_bar_prev);
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double x0 = (x[j] - sqrt_1ma * eps[j]) / sqrt_a;
        double next = sqrt_prev * x0 + dir * eps[j];
        if (rng) next += coef.sigma * rng->normal();
        x[j] = next;
    }
}

void flow_update(std::span<double> x, std::span<const double> u, std::span<const double> score, double sigma,
                 double ds, ParticleRng* rng) {
    if (sigma == 0.0 || rng == nullptr) {
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = x[j] - u[j] * ds;
        return;
    }
    const double half_var = 0.5 * sigma * sigma;
    const double noise = sigma * std::sqrt(ds);
    for (std::size_t j = 0; j < x.size(); ++j) {
        x[j] = x[j] - (u[j] - half_var * score[j]) * ds + noise * rng->normal();
    }
}

void check_flow_pair(double s, double s_next) {
    if (!(s <= 1.0 && s > s_next && s_next >= 0.0)) {
        throw ConfigError("flow step: need 1 >= s > s_next >= 0 (got s=" + std::to_string(s) +
                          ", s_next=" + std::to_string(s_next) + ")");
    }
}

void check_shapes(const Batch& x, const Batch& other, const char* what) {
    if (x.size() != other.size() || x.dim() != other.dim()) {
        throw std::invalid_argument(std::string(what) + ": batch shape mismatch");
    }
}

}  // namespace

DdimCoefficients DdimCoefficients::at(const NoiseSchedule& schedule, int t) {
    if (t < 1 || t > schedule.num_steps()) throw ConfigError("ddim step: t out of range");
    return {schedule.alpha_bar(t), schedule.alpha_bar(t - 1), schedule.sigma(t)};
}

double DdimCoefficients::direction_scale() const {
    const double radicand = 1.0 - alpha_bar_prev - sigma * sigma;
    if (radicand < -1e-12) {
        throw RuntimeError("ddim step: negative radicand 1 - alpha_bar_prev - sigma^2 = " + std::to_string(radicand));
    }
    return std::sqrt(std::max(radicand, 0.0));
}

void ddim_sde_step(Batch& x, const Batch& eps_hat, const DdimCoefficients& coef, const RngKey& key,
                   NfeLedger& ledger, ExecPolicy policy) {
    check_shapes(x, eps_hat, "ddim_sde_step");
    const double dir = coef.direction_scale();
    const bool stochastic = coef.sigma > 0.0;
    for_each_particle(policy, x.size(), [&](std::size_t i) {
        auto rng = key.particle(i);
        ddim_update(x.row(i), eps_hat.row(i), coef, dir, stochastic ? &rng : nullptr);
    });
    ledger.model_calls += x.size();
}

void flow_ode_step(Batch& x, double s, double s_next, const Batch& u, NfeLedger& ledger, ExecPolicy policy) {
    check_flow_pair(s, s_next);
    check_shapes(x, u, "flow_ode_step");
    const double ds = s - s_next;
    for_each_particle(policy, x.size(), [&](std::size_t i) { flow_update(x.row(i), u.row(i), {}, 0.0, ds, nullptr); });
    ledger.model_calls += x.size();
}

void flow_sde_step(Batch& x, double s, double s_next, const Batch& u, const Batch& score, double sigma,
                   const RngKey& key, NfeLedger& ledger, ExecPolicy policy) {
    check_flow_pair(s, s_next);
    check_shapes(x, u, "flow_sde_step");
    check_shapes(x, score, "flow_sde_step");
    if (!(sigma >= 0.0)) throw ConfigError("flow_sde_step: sigma must be >= 0");
    const double ds = s - s_next;
    for_each_particle(policy, x.size(), [&](std::size_t i) {
        auto rng = key.particle(i);
        flow_update(x.row(i), u.row(i), score.row(i), sigma, ds, &rng);
    });
    ledger.model_calls += x.size();
}

Batch score_from_velocity(const Batch& u, const Batch& x, double s) {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("score_from_velocity: s must lie in (0, 1]");
    check_shapes(x, u, "score_from_velocity");
    Batch out(x.size(), x.dim());
    auto& o = out.data();
    const auto& uv = u.data();
    const auto& xv = x.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = -((1.0 - s) * uv[k] + xv[k]) / s;
    return out;
}

Denoiser::Denoiser(GaussianMixture model, NoiseSchedule schedule, ExecPolicy policy)
    : model_(std::move(model)), schedule_(std::move(schedule)), policy_(policy) {}

Denoiser::Denoiser(GaussianMixture model, FlowTimeGrid grid, ExecPolicy policy)
    : model_(std::move(model)), schedule_(std::move(grid)), policy_(policy) {}

ModelKind Denoiser::kind() const {
    return std::holds_alternative<NoiseSchedule>(schedule_) ? ModelKind::DiffusionEpsilon : ModelKind::FlowVelocity;
}

int Denoiser::num_steps() const {
    return std::visit([](const auto& s) { return s.num_steps(); }, schedule_);
}

Batch Denoiser::model_output(const Batch& x, int t) const {
    if (t < 1 || t > num_steps()) throw ConfigError("model_output: step out of range");
    Batch out(x.size(), x.dim());
    if (const auto* ns = noise_schedule()) {
        const auto pt = diffused_params(model_, ns->alpha_bar(t));
        for_each_particle(policy_, x.size(), [&](std::size_t i) { epsilon_pred(pt, x.row(i), out.row(i)); });
    } else {
        const double s = flow_grid()->s_at(t);
        const auto ps = flow_params(model_, s);
        for_each_particle(policy_, x.size(), [&](std::size_t i) { velocity(model_, ps, s, x.row(i), out.row(i)); });
    }
    return out;
}

void Denoiser::step(Batch& x, int t, const RngKey& key, NfeLedger& ledger, Batch* x0_estimate) const {
    if (t < 1 || t > num_steps()) throw ConfigError("denoise step: t out of range");
    if (x0_estimate) *x0_estimate = Batch(x.size(), x.dim());
    const std::size_t d = x.dim();

    if (const auto* ns = noise_schedule()) {
        const auto coef = DdimCoefficients::at(*ns, t);
        const double dir = coef.direction_scale();
        const auto pt = diffused_params(model_, coef.alpha_bar_t);
        const double sqrt_a = std::sqrt(coef.alpha_bar_t);
        const double sqrt_1ma = std::sqrt(1.0 - coef.alpha_bar_t);
        const bool stochastic = coef.sigma > 0.0;
        for_each_particle(policy_, x.size(), [&](std::size_t i) {
            thread_local std::vector<double> eps;
            eps.resize(d);
            auto row = x.row(i);
            epsilon_pred(pt, row, eps);
            if (x0_estimate) {
                auto out = x0_estimate->row(i);
                for (std::size_t j = 0; j < d; ++j) out[j] = (row[j] - sqrt_1ma * eps[j]) / sqrt_a;
            }
            auto rng = key.particle(i);
            ddim_update(row, eps, coef, dir, stochastic ? &rng : nullptr);
        });
    } else {
        const auto& grid = *flow_grid();
        const double s = grid.s_at(t);
        const double s_next = grid.s_at(t - 1);
        const double sigma = grid.sigma_at(t);
        const auto ps = flow_params(model_, s);
        for_each_particle(policy_, x.size(), [&](std::size_t i) {
            thread_local std::vector<double> u, sc;
            u.resize(d);
            sc.resize(d);
            auto row = x.row(i);
            velocity(model_, ps, s, row, u);
            for (std::size_t j = 0; j < d; ++j) sc[j] = -((1.0 - s) * u[j] + row[j]) / s;
            if (x0_estimate) {
                auto out = x0_estimate->row(i);
                for (std::size_t j = 0; j < d; ++j) out[j] = row[j] - s * u[j];
            }
            auto rng = key.particle(i);
            flow_update(row, u, sc, sigma, s - s_next, &rng);
        });
    }
    ledger.model_calls += x.size();
}

Batch Denoiser::denoise_to_end(Batch x, int t_start, const RngKey& key, NfeLedger& ledger,
                               const TrajectoryHook* hook) const {
    if (t_start < 0 || t_start > num_steps()) throw ConfigError("denoise_to_end: start step out of range");
    auto fires = [&](int t) {
        return hook && std::find(hook->times.begin(), hook->times.end(), t) != hook->times.end();
    };
    if (hook) {
        for (int t : hook->times) {
            if (t < 0 || t > t_start) {
                throw ConfigError("trajectory hook: time " + std::to_string(t) + " outside [0, " +
                                  std::to_string(t_start) + "]");
            }
        }
    }
    for (int t = t_start; t >= 1; --t) {
        if (fires(t)) hook->callback(t, std::as_const(x));
        step(x, t, key.fork(static_cast<std::uint64_t>(t)), ledger);
    }
    if (fires(0)) hook->callback(0, std::as_const(x));
    return x;
}

Batch Denoiser::posterior_mean_x0(const Batch& x, int t, NfeLedger* ledger) const {
    if (t == 0) return x;
    const auto out = model_output(x, t);
    Batch x0(x.size(), x.dim());
    if (const auto* ns = noise_schedule()) {
        const double a = ns->alpha_bar(t);
        if (!(a > 0.0)) throw RuntimeError("posterior_mean_x0: alpha_bar is zero");
        const double sqrt_a = std::sqrt(a);
        const double sqrt_1ma = std::sqrt(1.0 - a);
        for (std::size_t k = 0; k < x.data().size(); ++k) {
            x0.data()[k] = (x.data()[k] - sqrt_1ma * out.data()[k]) / sqrt_a;
        }
    } else {
        const double s = flow_grid()->s_at(t);
        for (std::size_t k = 0; k < x.data().size(); ++k) x0.data()[k] = x.data()[k] - s * out.data()[k];
    }
    if (ledger) ledger->model_calls += x.size();
    return x0;
}

double Denoiser::mutation_sigma(int t) const {
    if (t < 1 || t > num_steps()) throw ConfigError("mutation sigma: step out of range");
    if (const auto* ns = noise_schedule()) return ns->sigma(t);
    const auto& grid = *flow_grid();
    return grid.sigma_at(t) * std::sqrt(grid.s_at(t) - grid.s_at(t - 1));
}

}  // namespace evo
