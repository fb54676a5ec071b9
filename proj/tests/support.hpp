#pragma once

#include "evo/core.hpp"

#include <cmath>
#include <vector>

namespace evo::test {

struct Moments {
    std::vector<double> mean;
    std::vector<double> cov;  // row-major dim x dim, population normalisation
    std::size_t dim = 0;
    std::size_t n = 0;

    double c(std::size_t i, std::size_t j) const { return cov[i * dim + j]; }
};

inline Moments moments(const Batch& x) {
    Moments m;
    m.dim = x.dim();
    m.n = x.size();
    m.mean.assign(m.dim, 0.0);
    m.cov.assign(m.dim * m.dim, 0.0);
    for (std::size_t k = 0; k < m.n; ++k) {
        for (std::size_t d = 0; d < m.dim; ++d) m.mean[d] += x.row(k)[d];
    }
    for (double& v : m.mean) v /= static_cast<double>(m.n);
    for (std::size_t k = 0; k < m.n; ++k) {
        const auto r = x.row(k);
        for (std::size_t i = 0; i < m.dim; ++i) {
            for (std::size_t j = 0; j < m.dim; ++j) m.cov[i * m.dim + j] += (r[i] - m.mean[i]) * (r[j] - m.mean[j]);
        }
    }
    for (double& v : m.cov) v /= static_cast<double>(m.n);
    return m;
}

/// Standard error of the sample mean of coordinate i.
inline double mean_se(const Moments& m, std::size_t i) { return std::sqrt(m.c(i, i) / static_cast<double>(m.n)); }

/// Gaussian-theory standard error of the sample covariance entry (i, j).
inline double cov_se(const Moments& m, std::size_t i, std::size_t j) {
    return std::sqrt((m.c(i, i) * m.c(j, j) + m.c(i, j) * m.c(i, j)) / static_cast<double>(m.n));
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
    const double mu = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace evo::test
