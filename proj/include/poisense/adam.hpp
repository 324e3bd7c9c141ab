#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "poisense/net.hpp"

namespace poisense {

struct AdamConfig {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction over a flat parameter vector.
class AdamState {
public:
    AdamState(std::size_t n_params, AdamConfig cfg = {})
        : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw std::invalid_argument("AdamState::step: shape mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < m_.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params[i] -= cfg_.alpha * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }

    std::uint64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    std::uint64_t t_ = 0;
};

/// Adam bound to one DenseNet's parameters.
class NetAdam {
public:
    NetAdam(const DenseNet& net, AdamConfig cfg = {})
        : state_(param_count(net), cfg) {}

    void step(DenseNet& net, const NetGrads& grads) {
        flatten_params(net, pbuf_);
        flatten_grads(grads, gbuf_);
        state_.step(pbuf_, gbuf_);
        unflatten_params(net, pbuf_);
    }

private:
    AdamState state_;
    std::vector<double> pbuf_, gbuf_;
};

} // namespace poisense
