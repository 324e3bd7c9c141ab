#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisense/adam.hpp"
#include "poisense/gaussian.hpp"
#include "poisense/net.hpp"
#include "poisense/rng.hpp"

namespace poisense {

enum class Modality { X, W };

inline const char* modality_name(Modality m) { return m == Modality::X ? "x" : "w"; }

struct JmvaeConfig {
    std::size_t d_x = 8;
    std::size_t d_w = 8;
    std::size_t d_z = 2;
    std::size_t hidden = 64;
    double alpha_vi = 0.1;      // weight on the uni-modal closeness terms
    std::size_t epochs = 150;
    std::size_t batch_size = 64;
    double learning_rate = 0.001;
    std::size_t dataset_size = 3000;
};

/// Joint two-modality VAE: joint encoder q(z|x,w), uni-modal encoders
/// q(z|x), q(z|w), and per-modality decoders.
struct JmvaeModel {
    DenseNet enc_joint; // d_x + d_w -> 2 d_z
    DenseNet enc_x;     // d_x -> 2 d_z
    DenseNet enc_w;     // d_w -> 2 d_z
    DenseNet dec_x;     // d_z -> d_x
    DenseNet dec_w;     // d_z -> d_w
    std::size_t d_x = 0, d_w = 0, d_z = 0;

    void validate() const {
        if (d_x != d_w)
            throw std::invalid_argument("JmvaeModel: modality dims must match");
        enc_joint.validate();
        enc_x.validate();
        enc_w.validate();
        dec_x.validate();
        dec_w.validate();
        if (enc_joint.input_dim() != d_x + d_w || enc_joint.output_dim() != 2 * d_z ||
            enc_x.input_dim() != d_x || enc_x.output_dim() != 2 * d_z ||
            enc_w.input_dim() != d_w || enc_w.output_dim() != 2 * d_z ||
            dec_x.input_dim() != d_z || dec_x.output_dim() != d_x ||
            dec_w.input_dim() != d_z || dec_w.output_dim() != d_w)
            throw std::invalid_argument("JmvaeModel: net dims inconsistent");
    }
};

inline JmvaeModel init_jmvae(const JmvaeConfig& cfg, RngStream& rng) {
    if (cfg.d_x != cfg.d_w)
        throw std::invalid_argument("init_jmvae: d_x must equal d_w");
    if (cfg.d_z < 1) throw std::invalid_argument("init_jmvae: d_z must be >= 1");
    JmvaeModel m;
    m.d_x = cfg.d_x;
    m.d_w = cfg.d_w;
    m.d_z = cfg.d_z;
    const auto relu_lin = std::vector<Activation>{Activation::ReLU, Activation::Linear};
    m.enc_joint = make_mlp({cfg.d_x + cfg.d_w, cfg.hidden, 2 * cfg.d_z}, relu_lin, rng);
    m.enc_x = make_mlp({cfg.d_x, cfg.hidden, 2 * cfg.d_z}, relu_lin, rng);
    m.enc_w = make_mlp({cfg.d_w, cfg.hidden, 2 * cfg.d_z}, relu_lin, rng);
    m.dec_x = make_mlp({cfg.d_z, cfg.hidden, cfg.d_x}, relu_lin, rng);
    m.dec_w = make_mlp({cfg.d_z, cfg.hidden, cfg.d_w}, relu_lin, rng);
    return m;
}

inline DiagGaussian encode_uni(const JmvaeModel& m, Modality mod, std::span<const double> feat) {
    const DenseNet& enc = (mod == Modality::X) ? m.enc_x : m.enc_w;
    return gauss_head(net_forward(enc, feat));
}

inline DiagGaussian encode_joint(const JmvaeModel& m, std::span<const double> x,
                                 std::span<const double> w) {
    if (x.size() != m.d_x || w.size() != m.d_w)
        throw std::invalid_argument("encode_joint: feature length mismatch");
    std::vector<double> xw;
    xw.reserve(x.size() + w.size());
    xw.insert(xw.end(), x.begin(), x.end());
    xw.insert(xw.end(), w.begin(), w.end());
    return gauss_head(net_forward(m.enc_joint, xw));
}

/// Decoder output, interpreted as the reconstruction mean.
inline std::vector<double> decode(const JmvaeModel& m, Modality mod, std::span<const double> z) {
    const DenseNet& dec = (mod == Modality::X) ? m.dec_x : m.dec_w;
    return net_forward(dec, z);
}

struct LossBreakdown {
    double recon_x = 0, recon_w = 0, kl_prior = 0;
    double kl_unimodal_x = 0, kl_unimodal_w = 0;
    double total = 0;

    LossBreakdown& operator+=(const LossBreakdown& o) {
        recon_x += o.recon_x;
        recon_w += o.recon_w;
        kl_prior += o.kl_prior;
        kl_unimodal_x += o.kl_unimodal_x;
        kl_unimodal_w += o.kl_unimodal_w;
        total += o.total;
        return *this;
    }
    void scale(double s) {
        recon_x *= s;
        recon_w *= s;
        kl_prior *= s;
        kl_unimodal_x *= s;
        kl_unimodal_w *= s;
        total *= s;
    }
};

struct JmvaeGrads {
    NetGrads enc_joint, enc_x, enc_w, dec_x, dec_w;

    static JmvaeGrads zeros_like(const JmvaeModel& m) {
        return {NetGrads::zeros_like(m.enc_joint), NetGrads::zeros_like(m.enc_x),
                NetGrads::zeros_like(m.enc_w), NetGrads::zeros_like(m.dec_x),
                NetGrads::zeros_like(m.dec_w)};
    }
    void scale(double s) {
        enc_joint.scale(s);
        enc_x.scale(s);
        enc_w.scale(s);
        dec_x.scale(s);
        dec_w.scale(s);
    }
};

namespace detail {

// sigma = exp(0.5 * logvar); maps (d mu, d sigma) back to the raw head.
inline std::vector<double> head_raw_grad(std::span<const double> raw,
                                         std::span<const double> sigma,
                                         std::span<const double> d_mu,
                                         std::span<const double> d_sigma) {
    const std::size_t d = d_mu.size();
    std::vector<double> g(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        g[i] = d_mu[i];
        const bool clamped = raw[d + i] < -kLogVarClamp || raw[d + i] > kLogVarClamp;
        g[d + i] = clamped ? 0.0 : d_sigma[i] * 0.5 * sigma[i];
    }
    return g;
}

} // namespace detail

/// Negative single-sample variational bound with uni-modal closeness terms:
///   0.5|x - x'|^2 + 0.5|w - w'|^2 + KL(q(z|x,w) || N(0,I))
///   + alpha_vi * [KL(q(z|x,w) || q(z|x)) + KL(q(z|x,w) || q(z|w))]
/// with z = mu + sigma * eps. Gradients (exact for this estimator, with the
/// given eps held fixed) are accumulated into *grads when non-null.
inline LossBreakdown jmvae_loss(const JmvaeModel& m, std::span<const double> x,
                                std::span<const double> w, double alpha_vi,
                                std::span<const double> eps, JmvaeGrads* grads = nullptr) {
    if (x.size() != m.d_x || w.size() != m.d_w)
        throw std::invalid_argument("jmvae_loss: feature length mismatch");
    if (eps.size() != m.d_z)
        throw std::invalid_argument("jmvae_loss: eps length must be d_z");
    const std::size_t dz = m.d_z;

    std::vector<double> xw;
    xw.reserve(x.size() + w.size());
    xw.insert(xw.end(), x.begin(), x.end());
    xw.insert(xw.end(), w.begin(), w.end());

    ForwardCache cj, cx, cw, cdx, cdw;
    const std::vector<double> raw_j = net_forward(m.enc_joint, xw, &cj);
    const std::vector<double> raw_x = net_forward(m.enc_x, x, &cx);
    const std::vector<double> raw_w = net_forward(m.enc_w, w, &cw);
    const DiagGaussian qj = gauss_head(raw_j);
    const DiagGaussian qx = gauss_head(raw_x);
    const DiagGaussian qw = gauss_head(raw_w);

    std::vector<double> z(dz);
    for (std::size_t i = 0; i < dz; ++i) z[i] = qj.mu[i] + qj.sigma[i] * eps[i];

    const std::vector<double> xhat = net_forward(m.dec_x, z, &cdx);
    const std::vector<double> what = net_forward(m.dec_w, z, &cdw);

    LossBreakdown lb;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = xhat[i] - x[i];
        lb.recon_x += 0.5 * d * d;
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = what[i] - w[i];
        lb.recon_w += 0.5 * d * d;
    }
    lb.kl_prior = kl_diag_gauss(qj, unit_gaussian(dz));
    lb.kl_unimodal_x = kl_diag_gauss(qj, qx);
    lb.kl_unimodal_w = kl_diag_gauss(qj, qw);
    lb.total = lb.recon_x + lb.recon_w + lb.kl_prior +
               alpha_vi * (lb.kl_unimodal_x + lb.kl_unimodal_w);

    if (!std::isfinite(lb.total)) {
        std::ostringstream oss;
        oss << "jmvae_loss: non-finite total loss (" << lb.total << ")";
        throw std::runtime_error(oss.str());
    }
    if (!grads) return lb;

    // Reconstruction terms through the decoders into z.
    std::vector<double> d_xhat(xhat.size()), d_what(what.size());
    for (std::size_t i = 0; i < xhat.size(); ++i) d_xhat[i] = xhat[i] - x[i];
    for (std::size_t i = 0; i < what.size(); ++i) d_what[i] = what[i] - w[i];
    std::vector<double> dz_x = net_backward(m.dec_x, cdx, d_xhat, grads->dec_x);
    std::vector<double> dz_w = net_backward(m.dec_w, cdw, d_what, grads->dec_w);

    std::vector<double> d_mu_j(dz, 0.0), d_sigma_j(dz, 0.0);
    for (std::size_t i = 0; i < dz; ++i) {
        const double dzi = dz_x[i] + dz_w[i];
        d_mu_j[i] += dzi;
        d_sigma_j[i] += dzi * eps[i];
    }

    // KL terms: q-side always hits the joint head, p-side the uni-modal heads.
    const KlGrads gp = kl_diag_gauss_grad(qj, unit_gaussian(dz));
    const KlGrads gx = kl_diag_gauss_grad(qj, qx);
    const KlGrads gw = kl_diag_gauss_grad(qj, qw);
    std::vector<double> d_mu_x(dz), d_sigma_x(dz), d_mu_w(dz), d_sigma_w(dz);
    for (std::size_t i = 0; i < dz; ++i) {
        d_mu_j[i] += gp.dq_mu[i] + alpha_vi * (gx.dq_mu[i] + gw.dq_mu[i]);
        d_sigma_j[i] += gp.dq_sigma[i] + alpha_vi * (gx.dq_sigma[i] + gw.dq_sigma[i]);
        d_mu_x[i] = alpha_vi * gx.dp_mu[i];
        d_sigma_x[i] = alpha_vi * gx.dp_sigma[i];
        d_mu_w[i] = alpha_vi * gw.dp_mu[i];
        d_sigma_w[i] = alpha_vi * gw.dp_sigma[i];
    }

    net_backward(m.enc_joint, cj,
                 detail::head_raw_grad(raw_j, qj.sigma, d_mu_j, d_sigma_j), grads->enc_joint);
    net_backward(m.enc_x, cx,
                 detail::head_raw_grad(raw_x, qx.sigma, d_mu_x, d_sigma_x), grads->enc_x);
    net_backward(m.enc_w, cw,
                 detail::head_raw_grad(raw_w, qw.sigma, d_mu_w, d_sigma_w), grads->enc_w);
    return lb;
}

struct Sample {
    std::vector<double> x;
    std::vector<double> w;
    int label = 0; // evaluation only, never enters the loss
};

/// Minibatch Adam training. Deterministic given (dataset, cfg, rng state).
/// Returns the model plus per-epoch mean loss breakdowns.
inline std::pair<JmvaeModel, std::vector<LossBreakdown>>
train_jmvae(const std::vector<Sample>& dataset, const JmvaeConfig& cfg, RngStream& rng) {
    if (dataset.empty()) throw std::invalid_argument("train_jmvae: empty dataset");
    for (const auto& s : dataset)
        if (s.x.size() != cfg.d_x || s.w.size() != cfg.d_w)
            throw std::invalid_argument("train_jmvae: dataset row dimension mismatch");

    JmvaeModel model = init_jmvae(cfg, rng);
    std::vector<LossBreakdown> history;
    if (cfg.epochs == 0) return {std::move(model), std::move(history)};

    const AdamConfig opt{cfg.learning_rate, 0.9, 0.999, 1e-8};
    NetAdam adam_j(model.enc_joint, opt), adam_x(model.enc_x, opt), adam_w(model.enc_w, opt),
        adam_dx(model.dec_x, opt), adam_dw(model.dec_w, opt);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> eps(cfg.d_z);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates shuffle.
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_index(i)]);

        LossBreakdown epoch_sum;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            JmvaeGrads grads = JmvaeGrads::zeros_like(model);
            LossBreakdown batch_sum;
            for (std::size_t k = start; k < stop; ++k) {
                const Sample& s = dataset[order[k]];
                for (auto& e : eps) e = rng.normal();
                LossBreakdown lb;
                try {
                    lb = jmvae_loss(model, s.x, s.w, cfg.alpha_vi, eps, &grads);
                } catch (const std::runtime_error& e) {
                    std::ostringstream oss;
                    oss << "train_jmvae: aborted at epoch " << epoch << ", batch "
                        << start / cfg.batch_size << ": " << e.what();
                    throw std::runtime_error(oss.str());
                }
                batch_sum += lb;
            }
            grads.scale(1.0 / static_cast<double>(stop - start));
            adam_j.step(model.enc_joint, grads.enc_joint);
            adam_x.step(model.enc_x, grads.enc_x);
            adam_w.step(model.enc_w, grads.enc_w);
            adam_dx.step(model.dec_x, grads.dec_x);
            adam_dw.step(model.dec_w, grads.dec_w);
            epoch_sum += batch_sum;
        }
        epoch_sum.scale(1.0 / static_cast<double>(dataset.size()));
        history.push_back(epoch_sum);
    }
    return {std::move(model), std::move(history)};
}

/// One row per (sample, input mode); exact encoder outputs, no sampling.
struct LatentRow {
    int label = 0;
    std::string input_mode; // "joint", "x-only", "w-only"
    std::vector<double> mu;
    std::vector<double> sigma;
};

inline std::vector<LatentRow> latent_dump(const JmvaeModel& m, const std::vector<Sample>& data) {
    std::vector<LatentRow> rows;
    rows.reserve(3 * data.size());
    for (const auto& s : data) {
        const DiagGaussian gj = encode_joint(m, s.x, s.w);
        const DiagGaussian gx = encode_uni(m, Modality::X, s.x);
        const DiagGaussian gw = encode_uni(m, Modality::W, s.w);
        rows.push_back({s.label, "joint", gj.mu, gj.sigma});
        rows.push_back({s.label, "x-only", gx.mu, gx.sigma});
        rows.push_back({s.label, "w-only", gw.mu, gw.sigma});
    }
    return rows;
}

} // namespace poisense
