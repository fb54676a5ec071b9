#pragma once

#include "evo/core.hpp"
#include "evo/rng.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace evo {

/// Which network interface the samplers consume.
enum class ModelKind { DiffusionEpsilon, FlowVelocity };

/// Isotropic Gaussian mixture in R^dim. Stands in for the pre-trained data
/// distribution; every quantity the samplers need has a closed form.
class GaussianMixture {
public:
    GaussianMixture(std::size_t dim, std::vector<double> weights, std::vector<std::vector<double>> means,
                    std::vector<double> variances);

    std::size_t dim() const { return dim_; }
    std::size_t components() const { return weights_.size(); }
    const std::vector<double>& weights() const { return weights_; }
    std::span<const double> mean(std::size_t i) const { return {means_.data() + i * dim_, dim_}; }
    const std::vector<double>& variances() const { return variances_; }

    /// `count` components of variance `variance` evenly spaced on a circle.
    static GaussianMixture ring(std::size_t count, double radius, double variance);
    static GaussianMixture standard_normal(std::size_t dim);

private:
    std::size_t dim_;
    std::vector<double> weights_;
    std::vector<double> means_;
    std::vector<double> variances_;
};

/// Mixture marginal after the affine corruption x = scale * x0 + noise,
/// noise ~ N(0, noise_var I): component i becomes N(scale mu_i, scale^2 v_i + noise_var).
class DiffusedMixture {
public:
    DiffusedMixture(const GaussianMixture& base, double scale, double noise_var);

    std::size_t dim() const { return dim_; }
    std::size_t components() const { return log_weights_.size(); }
    double scale() const { return scale_; }
    double noise_var() const { return noise_var_; }
    std::span<const double> mean(std::size_t i) const { return {means_.data() + i * dim_, dim_}; }
    double variance(std::size_t i) const { return variances_[i]; }
    double weight(std::size_t i) const;

    /// Component posteriors gamma_i(x) written into `out` (size components()).
    void responsibilities(std::span<const double> x, std::span<double> out) const;
    double log_density(std::span<const double> x) const;
    /// sum_i gamma_i(x) (m_i - x) / V_i
    void score(std::span<const double> x, std::span<double> out) const;
    /// E[x0 | x] and E[noise | x] / sqrt(noise_var), both exact. Either output may be empty.
    void posterior(const GaussianMixture& base, std::span<const double> x, std::span<double> x0_mean,
                   std::span<double> eps_mean) const;

private:
    std::size_t dim_;
    double scale_;
    double noise_var_;
    std::vector<double> log_weights_;
    std::vector<double> means_;
    std::vector<double> variances_;
    std::vector<double> log_norm_;  // log w_i - dim/2 log(2 pi V_i)
};

/// Variance-preserving marginal: scale sqrt(alpha_bar), noise 1 - alpha_bar.
DiffusedMixture diffused_params(const GaussianMixture& model, double alpha_bar);
/// General form with an explicit total noise variance.
DiffusedMixture diffused_params(const GaussianMixture& model, double alpha_bar, double noise_var);
/// Linear flow path x_s = (1-s) x0 + s eps: scale 1-s, noise s^2.
DiffusedMixture flow_params(const GaussianMixture& model, double s);

Batch sample_prior(const GaussianMixture& model, std::size_t n, const RngKey& key,
                   std::vector<std::size_t>* components = nullptr);

void score(const DiffusedMixture& pt, std::span<const double> x, std::span<double> out);
/// eps_hat = -sqrt(1 - alpha_bar) * score, for a variance-preserving marginal.
void epsilon_pred(const DiffusedMixture& pt, std::span<const double> x, std::span<double> out);
/// u_s(x) = E[eps | x_s] - E[x0 | x_s] for the linear flow path; valid for s in (0, 1].
void velocity(const GaussianMixture& model, const DiffusedMixture& ps, double s, std::span<const double> x,
              std::span<double> out);
double log_density_p0(const GaussianMixture& model, std::span<const double> x);

}  // namespace evo
