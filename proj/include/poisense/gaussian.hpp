#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "poisense/rng.hpp"

namespace poisense {

/// Diagonal Gaussian: mean vector and standard deviations (sigma > 0).
struct DiagGaussian {
    std::vector<double> mu;
    std::vector<double> sigma;

    std::size_t dim() const { return mu.size(); }

    void validate() const {
        if (mu.size() != sigma.size())
            throw std::invalid_argument("DiagGaussian: mu/sigma length mismatch");
        for (double s : sigma)
            if (!(s > 0.0) || !std::isfinite(s))
                throw std::invalid_argument("DiagGaussian: sigma must be positive finite");
    }
};

inline DiagGaussian unit_gaussian(std::size_t d) {
    return DiagGaussian{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
}

/// KL(q || p) for diagonal Gaussians, closed form.
inline double kl_diag_gauss(const DiagGaussian& q, const DiagGaussian& p) {
    q.validate();
    p.validate();
    if (q.dim() != p.dim())
        throw std::invalid_argument("kl_diag_gauss: dimension mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < q.dim(); ++i) {
        const double dm = q.mu[i] - p.mu[i];
        kl += std::log(p.sigma[i] / q.sigma[i]) +
              (q.sigma[i] * q.sigma[i] + dm * dm) / (2.0 * p.sigma[i] * p.sigma[i]) - 0.5;
    }
    return kl;
}

/// Partial derivatives of kl_diag_gauss w.r.t. both argument's parameters.
struct KlGrads {
    std::vector<double> dq_mu, dq_sigma, dp_mu, dp_sigma;
};

inline KlGrads kl_diag_gauss_grad(const DiagGaussian& q, const DiagGaussian& p) {
    const std::size_t d = q.dim();
    KlGrads g{std::vector<double>(d), std::vector<double>(d),
              std::vector<double>(d), std::vector<double>(d)};
    for (std::size_t i = 0; i < d; ++i) {
        const double dm = q.mu[i] - p.mu[i];
        const double ps2 = p.sigma[i] * p.sigma[i];
        g.dq_mu[i] = dm / ps2;
        g.dq_sigma[i] = -1.0 / q.sigma[i] + q.sigma[i] / ps2;
        g.dp_mu[i] = -dm / ps2;
        g.dp_sigma[i] = 1.0 / p.sigma[i] -
                        (q.sigma[i] * q.sigma[i] + dm * dm) / (ps2 * p.sigma[i]);
    }
    return g;
}

/// Reparameterized sample: z = mu + sigma * eps with eps ~ N(0, I).
/// Returns both z and eps so gradients can flow through the sample.
inline std::pair<std::vector<double>, std::vector<double>>
sample_diag_gauss(const DiagGaussian& g, RngStream& rng) {
    g.validate();
    std::vector<double> eps(g.dim()), z(g.dim());
    for (std::size_t i = 0; i < g.dim(); ++i) {
        eps[i] = rng.normal();
        z[i] = g.mu[i] + g.sigma[i] * eps[i];
    }
    return {std::move(z), std::move(eps)};
}

// Raw encoder outputs are (mu, log-variance); log-variance is clamped to keep
// exp finite. d sigma / d raw = sigma / 2 away from the clamp.
inline constexpr double kLogVarClamp = 30.0;

inline DiagGaussian gauss_head(std::span<const double> raw) {
    if (raw.size() % 2 != 0)
        throw std::invalid_argument("gauss_head: raw length must be even");
    const std::size_t d = raw.size() / 2;
    DiagGaussian g{std::vector<double>(d), std::vector<double>(d)};
    for (std::size_t i = 0; i < d; ++i) {
        g.mu[i] = raw[i];
        const double lv = std::clamp(raw[d + i], -kLogVarClamp, kLogVarClamp);
        g.sigma[i] = std::exp(0.5 * lv);
    }
    return g;
}

} // namespace poisense
