#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "poisense/rng.hpp"

namespace poisense {

enum class Activation { ReLU, Linear };

/// One dense layer: y = act(W x + b), W stored row-major (out x in).
struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights; // out * in, row-major
    std::vector<double> bias;    // out
    Activation act = Activation::Linear;

    double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
    double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
};

/// A fixed-topology feed-forward net. Adjacent layer dims must chain.
struct DenseNet {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().in; }
    std::size_t output_dim() const { return layers.back().out; }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("DenseNet: no layers");
        for (std::size_t k = 0; k + 1 < layers.size(); ++k)
            if (layers[k].out != layers[k + 1].in)
                throw std::invalid_argument("DenseNet: layer dims do not chain");
        for (const auto& l : layers) {
            if (l.weights.size() != l.in * l.out || l.bias.size() != l.out)
                throw std::invalid_argument("DenseNet: parameter shape mismatch");
        }
    }
};

/// Per-layer pre-activations and activations from a forward pass; enough for
/// an exact backward pass on the same net.
struct ForwardCache {
    std::vector<double> input;
    std::vector<std::vector<double>> pre; // per layer, before activation
    std::vector<std::vector<double>> act; // per layer, after activation
};

inline std::vector<double> net_forward(const DenseNet& net, std::span<const double> input,
                                       ForwardCache* cache = nullptr) {
    if (input.size() != net.input_dim())
        throw std::invalid_argument("net_forward: input length mismatch");
    if (cache) {
        cache->input.assign(input.begin(), input.end());
        cache->pre.clear();
        cache->act.clear();
    }
    std::vector<double> cur(input.begin(), input.end());
    for (const auto& layer : net.layers) {
        std::vector<double> pre(layer.out);
        for (std::size_t r = 0; r < layer.out; ++r) {
            double acc = layer.bias[r];
            const double* wrow = layer.weights.data() + r * layer.in;
            for (std::size_t c = 0; c < layer.in; ++c) acc += wrow[c] * cur[c];
            pre[r] = acc;
        }
        std::vector<double> post(pre);
        if (layer.act == Activation::ReLU)
            for (auto& v : post)
                if (v < 0.0) v = 0.0;
        if (cache) {
            cache->pre.push_back(pre);
            cache->act.push_back(post);
        }
        cur = std::move(post);
    }
    return cur;
}

/// Gradient container mirroring a net's parameter shapes.
struct NetGrads {
    struct LayerGrads {
        std::vector<double> dweights;
        std::vector<double> dbias;
    };
    std::vector<LayerGrads> layers;

    static NetGrads zeros_like(const DenseNet& net) {
        NetGrads g;
        g.layers.reserve(net.layers.size());
        for (const auto& l : net.layers)
            g.layers.push_back({std::vector<double>(l.weights.size(), 0.0),
                                std::vector<double>(l.bias.size(), 0.0)});
        return g;
    }

    void scale(double s) {
        for (auto& l : layers) {
            for (auto& v : l.dweights) v *= s;
            for (auto& v : l.dbias) v *= s;
        }
    }
};

/// Exact gradients of (output_grad . output) w.r.t. every parameter and the
/// input. Gradients are accumulated into `grads` (zero it first if needed).
inline std::vector<double> net_backward(const DenseNet& net, const ForwardCache& cache,
                                        std::span<const double> output_grad, NetGrads& grads) {
    if (cache.pre.size() != net.layers.size() || cache.input.size() != net.input_dim())
        throw std::invalid_argument("net_backward: cache does not match net");
    if (output_grad.size() != net.output_dim())
        throw std::invalid_argument("net_backward: output_grad length mismatch");
    if (grads.layers.size() != net.layers.size())
        throw std::invalid_argument("net_backward: grads shape mismatch");

    std::vector<double> delta(output_grad.begin(), output_grad.end());
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const Layer& layer = net.layers[k];
        if (layer.act == Activation::ReLU)
            for (std::size_t r = 0; r < layer.out; ++r)
                if (cache.pre[k][r] <= 0.0) delta[r] = 0.0;

        const std::vector<double>& below =
            (k == 0) ? cache.input : cache.act[k - 1];
        auto& lg = grads.layers[k];
        for (std::size_t r = 0; r < layer.out; ++r) {
            lg.dbias[r] += delta[r];
            double* gw = lg.dweights.data() + r * layer.in;
            for (std::size_t c = 0; c < layer.in; ++c) gw[c] += delta[r] * below[c];
        }
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r) {
            const double* wrow = layer.weights.data() + r * layer.in;
            for (std::size_t c = 0; c < layer.in; ++c) prev[c] += wrow[c] * delta[r];
        }
        delta = std::move(prev);
    }
    return delta; // input gradient
}

/// Glorot-uniform initialized MLP. dims = {in, h1, ..., out};
/// acts.size() == dims.size() - 1.
inline DenseNet make_mlp(const std::vector<std::size_t>& dims,
                         const std::vector<Activation>& acts, RngStream& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw std::invalid_argument("make_mlp: bad topology");
    DenseNet net;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        Layer l;
        l.in = dims[k];
        l.out = dims[k + 1];
        l.act = acts[k];
        l.bias.assign(l.out, 0.0);
        l.weights.resize(l.in * l.out);
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        for (auto& w : l.weights) w = (2.0 * rng.uniform() - 1.0) * bound;
        net.layers.push_back(std::move(l));
    }
    return net;
}

// Flat views used by the optimizer.

inline std::size_t param_count(const DenseNet& net) {
    std::size_t n = 0;
    for (const auto& l : net.layers) n += l.weights.size() + l.bias.size();
    return n;
}

inline void flatten_params(const DenseNet& net, std::vector<double>& out) {
    out.clear();
    out.reserve(param_count(net));
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
}

inline void unflatten_params(DenseNet& net, std::span<const double> flat) {
    std::size_t i = 0;
    for (auto& l : net.layers) {
        for (auto& w : l.weights) w = flat[i++];
        for (auto& b : l.bias) b = flat[i++];
    }
    if (i != flat.size()) throw std::invalid_argument("unflatten_params: size mismatch");
}

inline void flatten_grads(const NetGrads& grads, std::vector<double>& out) {
    out.clear();
    for (const auto& l : grads.layers) {
        out.insert(out.end(), l.dweights.begin(), l.dweights.end());
        out.insert(out.end(), l.dbias.begin(), l.dbias.end());
    }
}

} // namespace poisense
