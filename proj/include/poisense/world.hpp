#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "poisense/jmvae.hpp"

namespace poisense {

// Three PoI classes: 1 = green cylinder, 2 = red cylinder, 3 = red cube.
// Modality X sees only color, modality W only shape, so {2,3} are ambiguous
// under X and {1,2} under W.

enum class Color { Green, Red };
enum class Shape { Round, Edgy };

inline Color class_color(int cls) {
    switch (cls) {
        case 1: return Color::Green;
        case 2:
        case 3: return Color::Red;
        default: throw std::invalid_argument("class_color: class must be 1..3");
    }
}

inline Shape class_shape(int cls) {
    switch (cls) {
        case 1:
        case 2: return Shape::Round;
        case 3: return Shape::Edgy;
        default: throw std::invalid_argument("class_shape: class must be 1..3");
    }
}

struct Environment {
    std::vector<int> classes; // one PoI class per entry
    std::size_t n_poi() const { return classes.size(); }
};

struct WorldConfig {
    std::size_t n_poi = 3;
    std::size_t d_feat = 8;
    double noise_std = 0.05;
    double delta_threshold = 0.01; // tau: minimum information gain counted as gain
    double p_other = 0.5; // chance a PoI starts pre-observed by the other modality
    std::size_t max_steps = 6; // default 2 * n_poi
};

inline Environment sample_environment(std::size_t n_poi, RngStream& rng) {
    if (n_poi < 1) throw std::invalid_argument("sample_environment: n_poi must be >= 1");
    Environment env;
    env.classes.reserve(n_poi);
    for (std::size_t i = 0; i < n_poi; ++i)
        env.classes.push_back(1 + static_cast<int>(rng.uniform_index(3)));
    return env;
}

/// Noiseless feature prototype. Modality X encodes color in halves,
/// modality W encodes shape in quarters; d_feat must be divisible by 4.
inline std::vector<double> class_prototype(int cls, Modality mod, std::size_t d_feat = 8) {
    if (d_feat % 4 != 0)
        throw std::invalid_argument("class_prototype: d_feat must be divisible by 4");
    std::vector<double> v(d_feat, 0.0);
    if (mod == Modality::X) {
        const bool green = class_color(cls) == Color::Green;
        for (std::size_t i = 0; i < d_feat; ++i)
            v[i] = (i < d_feat / 2) == green ? 1.0 : 0.0;
    } else {
        const bool round = class_shape(cls) == Shape::Round;
        const std::size_t quarter = d_feat / 4;
        for (std::size_t i = 0; i < d_feat; ++i)
            v[i] = (((i / quarter) % 2 == 0) == round) ? 1.0 : 0.0;
    }
    return v;
}

/// Prototype plus iid Gaussian noise, clipped to [0, 1].
inline std::vector<double> gen_features(int cls, Modality mod, double noise_std, RngStream& rng,
                                        std::size_t d_feat = 8) {
    std::vector<double> v = class_prototype(cls, mod, d_feat);
    if (noise_std > 0.0)
        for (auto& e : v)
            e = std::clamp(e + noise_std * rng.normal(), 0.0, 1.0);
    return v;
}

/// Per-PoI belief: latent posterior plus which modalities have observed it.
/// A fresh belief is the model prior; the flags are monotone in an episode.
struct Belief {
    DiagGaussian posterior;
    bool observed_x = false;
    bool observed_w = false;

    bool observed_by(Modality m) const { return m == Modality::X ? observed_x : observed_w; }
};

inline Belief fresh_belief(std::size_t d_z) { return Belief{unit_gaussian(d_z), false, false}; }

struct WorldMap {
    std::vector<Belief> beliefs;

    std::size_t n_poi() const { return beliefs.size(); }
};

inline WorldMap fresh_map(std::size_t n_poi, std::size_t d_z) {
    WorldMap m;
    m.beliefs.assign(n_poi, fresh_belief(d_z));
    return m;
}

/// Information of a belief: I = 1 / |sigma|_2.
inline double information(const Belief& b) {
    double s2 = 0.0;
    for (double s : b.posterior.sigma) s2 += s * s;
    return 1.0 / std::sqrt(s2);
}

inline double total_information(const WorldMap& m) {
    double t = 0.0;
    for (const auto& b : m.beliefs) t += information(b);
    return t;
}

/// In-place fusion: take the former belief's mean as z~, generate the missing
/// modality's feature from it, and re-encode jointly with the real incoming
/// feature. Requires a former observation by the other modality.
inline DiagGaussian fuse(const JmvaeModel& model, const Belief& former,
                         std::span<const double> feat, Modality incoming) {
    const Modality other = incoming == Modality::X ? Modality::W : Modality::X;
    if (!former.observed_by(other))
        throw std::invalid_argument("fuse: former belief lacks an other-modality observation");
    const std::vector<double> generated = decode(model, other, former.posterior.mu);
    if (incoming == Modality::X) return encode_joint(model, feat, generated);
    return encode_joint(model, generated, feat);
}

/// Observe PoI n with one modality: draw a feature, update the belief (fusing
/// when the other modality has already seen this PoI), and return the change
/// in information.
inline double observe(const Environment& env, WorldMap& map, std::size_t n, Modality mod,
                      const JmvaeModel& model, const WorldConfig& cfg, RngStream& rng) {
    if (n >= map.n_poi() || n >= env.n_poi())
        throw std::out_of_range("observe: PoI index out of range");
    Belief& b = map.beliefs[n];
    const std::vector<double> feat = gen_features(env.classes[n], mod, cfg.noise_std, rng, cfg.d_feat);
    const double old_info = information(b);
    const Modality other = mod == Modality::X ? Modality::W : Modality::X;
    if (b.observed_by(other))
        b.posterior = fuse(model, b, feat, mod);
    else
        b.posterior = encode_uni(model, mod, feat);
    if (mod == Modality::X)
        b.observed_x = true;
    else
        b.observed_w = true;
    return information(b) - old_info;
}

/// DQN state: per PoI, interleaved (mu_1, sigma_1, mu_2, sigma_2, ...).
inline std::vector<double> state_vector(const WorldMap& map) {
    std::vector<double> s;
    if (map.beliefs.empty()) return s;
    s.reserve(2 * map.beliefs.front().posterior.dim() * map.n_poi());
    for (const auto& b : map.beliefs)
        for (std::size_t i = 0; i < b.posterior.dim(); ++i) {
            s.push_back(b.posterior.mu[i]);
            s.push_back(b.posterior.sigma[i]);
        }
    return s;
}

/// n_poi! * n_enc^(n_poi * n_mod), overflow-checked.
inline std::uint64_t state_space_size(std::uint64_t n_poi, std::uint64_t n_mod,
                                      std::uint64_t n_enc) {
    if (n_poi < 1 || n_mod < 1 || n_enc < 1)
        throw std::invalid_argument("state_space_size: all arguments must be >= 1");
    const std::uint64_t maxv = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t result = 1;
    auto mul = [&](std::uint64_t f) {
        if (f != 0 && result > maxv / f)
            throw std::overflow_error("state_space_size: result overflows 64 bits");
        result *= f;
    };
    for (std::uint64_t k = 2; k <= n_poi; ++k) mul(k);
    if (n_enc > 1) {
        if (n_poi > maxv / n_mod || n_poi * n_mod >= 64)
            throw std::overflow_error("state_space_size: result overflows 64 bits");
        for (std::uint64_t k = 0; k < n_poi * n_mod; ++k) mul(n_enc);
    }
    return result;
}

} // namespace poisense
