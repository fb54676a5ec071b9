#include "evo/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace evo {

namespace {

std::span<double> scratch(std::size_t n) {
    thread_local std::vector<double> buffer;
    if (buffer.size() < n) buffer.resize(n);
    return {buffer.data(), n};
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        acc += d * d;
    }
    return acc;
}

}  // namespace

GaussianMixture::GaussianMixture(std::size_t dim, std::vector<double> weights, std::vector<std::vector<double>> means,
                                 std::vector<double> variances)
    : dim_(dim), weights_(std::move(weights)), variances_(std::move(variances)) {
    if (dim_ == 0) throw ConfigError("model.dim: must be >= 1");
    if (weights_.empty()) throw ConfigError("model.weights: need at least one component");
    if (means.size() != weights_.size() || variances_.size() != weights_.size()) {
        throw ConfigError("model: weights, means and variances must have the same length");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (!(weights_[i] > 0.0)) throw ConfigError("model.weights[" + std::to_string(i) + "]: must be > 0");
        total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("model.weights: must sum to 1");
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (means[i].size() != dim_) throw ConfigError("model.means[" + std::to_string(i) + "]: wrong dimension");
        for (double v : means[i]) {
            if (!std::isfinite(v)) throw ConfigError("model.means[" + std::to_string(i) + "]: must be finite");
        }
        means_.insert(means_.end(), means[i].begin(), means[i].end());
        if (!(variances_[i] > 0.0) || !std::isfinite(variances_[i])) {
            throw ConfigError("model.variances[" + std::to_string(i) + "]: must be finite and > 0");
        }
    }
}

GaussianMixture GaussianMixture::ring(std::size_t count, double radius, double variance) {
    std::vector<double> weights(count, 1.0 / static_cast<double>(count));
    double total = 0.0;
    for (double w : weights) total += w;
    weights.back() += 1.0 - total;
    std::vector<std::vector<double>> means;
    for (std::size_t i = 0; i < count; ++i) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
        means.push_back({radius * std::cos(angle), radius * std::sin(angle)});
    }
    return GaussianMixture(2, std::move(weights), std::move(means), std::vector<double>(count, variance));
}

GaussianMixture GaussianMixture::standard_normal(std::size_t dim) {
    return GaussianMixture(dim, {1.0}, {std::vector<double>(dim, 0.0)}, {1.0});
}

DiffusedMixture::DiffusedMixture(const GaussianMixture& base, double scale, double noise_var)
    : dim_(base.dim()), scale_(scale), noise_var_(noise_var) {
    const std::size_t k = base.components();
    log_weights_.resize(k);
    variances_.resize(k);
    log_norm_.resize(k);
    means_.resize(k * dim_);
    const double half_dim = 0.5 * static_cast<double>(dim_);
    for (std::size_t i = 0; i < k; ++i) {
        log_weights_[i] = std::log(base.weights()[i]);
        variances_[i] = scale * scale * base.variances()[i] + noise_var;
        log_norm_[i] = log_weights_[i] - half_dim * std::log(2.0 * std::numbers::pi * variances_[i]);
        auto mu = base.mean(i);
        for (std::size_t j = 0; j < dim_; ++j) means_[i * dim_ + j] = scale * mu[j];
    }
}

double DiffusedMixture::weight(std::size_t i) const { return std::exp(log_weights_[i]); }

void DiffusedMixture::responsibilities(std::span<const double> x, std::span<double> out) const {
    const std::size_t k = components();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        out[i] = log_norm_[i] - 0.5 * squared_distance(x, mean(i)) / variances_[i];
        peak = std::max(peak, out[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        out[i] = std::exp(out[i] - peak);
        total += out[i];
    }
    for (std::size_t i = 0; i < k; ++i) out[i] /= total;
}

double DiffusedMixture::log_density(std::span<const double> x) const {
    const std::size_t k = components();
    auto terms = scratch(k);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        terms[i] = log_norm_[i] - 0.5 * squared_distance(x, mean(i)) / variances_[i];
        peak = std::max(peak, terms[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += std::exp(terms[i] - peak);
    return peak + std::log(total);
}

void DiffusedMixture::score(std::span<const double> x, std::span<double> out) const {
    auto gamma = scratch(components());
    responsibilities(x, gamma);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < components(); ++i) {
        const double coef = gamma[i] / variances_[i];
        auto m = mean(i);
        for (std::size_t j = 0; j < dim_; ++j) out[j] += coef * (m[j] - x[j]);
    }
}

void DiffusedMixture::posterior(const GaussianMixture& base, std::span<const double> x, std::span<double> x0_mean,
                                std::span<double> eps_mean) const {
    auto gamma = scratch(components());
    responsibilities(x, gamma);
    std::fill(x0_mean.begin(), x0_mean.end(), 0.0);
    std::fill(eps_mean.begin(), eps_mean.end(), 0.0);
    const double noise_sd = std::sqrt(noise_var_);
    for (std::size_t i = 0; i < components(); ++i) {
        auto m = mean(i);
        auto mu = base.mean(i);
        const double gain_x0 = gamma[i] * scale_ * base.variances()[i] / variances_[i];
        const double gain_eps = gamma[i] * noise_sd / variances_[i];
        for (std::size_t j = 0; j < dim_; ++j) {
            const double resid = x[j] - m[j];
            if (!x0_mean.empty()) x0_mean[j] += gamma[i] * mu[j] + gain_x0 * resid;
            if (!eps_mean.empty()) eps_mean[j] += gain_eps * resid;
        }
    }
}

DiffusedMixture diffused_params(const GaussianMixture& model, double alpha_bar) {
    return diffused_params(model, alpha_bar, 1.0 - alpha_bar);
}

DiffusedMixture diffused_params(const GaussianMixture& model, double alpha_bar, double noise_var) {
    if (!(alpha_bar > 0.0 && alpha_bar <= 1.0)) throw ConfigError("diffused_params: alpha_bar must lie in (0, 1]");
    if (!(noise_var >= 0.0)) throw ConfigError("diffused_params: noise variance must be >= 0");
    return DiffusedMixture(model, std::sqrt(alpha_bar), noise_var);
}

DiffusedMixture flow_params(const GaussianMixture& model, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("flow_params: s must lie in [0, 1]");
    return DiffusedMixture(model, 1.0 - s, s * s);
}

Batch sample_prior(const GaussianMixture& model, std::size_t n, const RngKey& key,
                   std::vector<std::size_t>* components) {
    Batch out(n, model.dim());
    if (components) components->assign(n, 0);
    std::vector<double> cdf(model.components());
    double acc = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = (acc += model.weights()[i]);
    for (std::size_t p = 0; p < n; ++p) {
        auto rng = key.particle(p);
        const double u = rng.uniform() * acc;
        std::size_t c = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        c = std::min(c, cdf.size() - 1);
        if (components) (*components)[p] = c;
        const double sd = std::sqrt(model.variances()[c]);
        auto mu = model.mean(c);
        auto row = out.row(p);
        for (std::size_t j = 0; j < model.dim(); ++j) row[j] = mu[j] + sd * rng.normal();
    }
    return out;
}

void score(const DiffusedMixture& pt, std::span<const double> x, std::span<double> out) { pt.score(x, out); }

void epsilon_pred(const DiffusedMixture& pt, std::span<const double> x, std::span<double> out) {
    pt.score(x, out);
    const double sd = -std::sqrt(pt.noise_var());
    for (double& v : out) v *= sd;
}

void velocity(const GaussianMixture& model, const DiffusedMixture& ps, double s, std::span<const double> x,
              std::span<double> out) {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("velocity: s must lie in (0, 1]");
    thread_local std::vector<double> x0;
    x0.resize(x.size());
    ps.posterior(model, x, x0, out);
    for (std::size_t j = 0; j < x.size(); ++j) out[j] -= x0[j];
}

double log_density_p0(const GaussianMixture& model, std::span<const double> x) {
    return DiffusedMixture(model, 1.0, 0.0).log_density(x);
}

}  // namespace evo
