#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "poisense/dqn.hpp"
#include "poisense/io.hpp"
#include "poisense/jmvae.hpp"
#include "poisense/world.hpp"

namespace poisense {

/// Output artifact names, resolved relative to out_dir.
struct Paths {
    std::string dataset = "dataset.csv";
    std::string vae_weights = "jmvae.json";
    std::string vae_history = "vae_history.csv";
    std::string qnet_x = "qnet_x.json";
    std::string qnet_w = "qnet_w.json";
    std::string dqn_history_x = "dqn_history_x.csv";
    std::string dqn_history_w = "dqn_history_w.csv";
    std::string latent = "latent.csv";
    std::string trace = "trace.csv";
    std::string eval_report = "eval_report.csv";
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    WorldConfig world;
    JmvaeConfig vae;
    DqnConfig dqn;
    Paths paths;
    bool max_steps_given = false;

    std::string path(const std::string& name) const {
        return (std::filesystem::path(out_dir) / name).string();
    }
};

namespace detail {

template <typename T>
void take(nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        out = it->get<T>();
        j.erase(it);
    }
}

inline void reject_unknown(const nlohmann::json& j, const std::string& section) {
    if (!j.empty())
        throw std::runtime_error("config: unknown key \"" + j.begin().key() + "\" in " +
                                 section);
}

} // namespace detail

inline RunConfig parse_run_config(nlohmann::json j) {
    RunConfig cfg;
    detail::take(j, "seed", cfg.seed);
    detail::take(j, "out_dir", cfg.out_dir);
    if (auto it = j.find("world"); it != j.end()) {
        nlohmann::json w = *it;
        j.erase(it);
        detail::take(w, "n_poi", cfg.world.n_poi);
        detail::take(w, "d_feat", cfg.world.d_feat);
        detail::take(w, "noise_std", cfg.world.noise_std);
        detail::take(w, "delta_threshold", cfg.world.delta_threshold);
        detail::take(w, "p_other", cfg.world.p_other);
        if (w.contains("max_steps")) {
            cfg.max_steps_given = true;
            detail::take(w, "max_steps", cfg.world.max_steps);
        }
        detail::reject_unknown(w, "world");
    }
    if (auto it = j.find("vae"); it != j.end()) {
        nlohmann::json v = *it;
        j.erase(it);
        detail::take(v, "d_x", cfg.vae.d_x);
        detail::take(v, "d_w", cfg.vae.d_w);
        detail::take(v, "d_z", cfg.vae.d_z);
        detail::take(v, "hidden", cfg.vae.hidden);
        detail::take(v, "alpha_vi", cfg.vae.alpha_vi);
        detail::take(v, "epochs", cfg.vae.epochs);
        detail::take(v, "batch_size", cfg.vae.batch_size);
        detail::take(v, "learning_rate", cfg.vae.learning_rate);
        detail::take(v, "dataset_size", cfg.vae.dataset_size);
        detail::reject_unknown(v, "vae");
    }
    if (auto it = j.find("dqn"); it != j.end()) {
        nlohmann::json d = *it;
        j.erase(it);
        detail::take(d, "gamma", cfg.dqn.gamma);
        detail::take(d, "eps_start", cfg.dqn.eps_start);
        detail::take(d, "eps_min", cfg.dqn.eps_min);
        detail::take(d, "eps_decay", cfg.dqn.eps_decay);
        detail::take(d, "learning_rate", cfg.dqn.learning_rate);
        detail::take(d, "episodes", cfg.dqn.episodes);
        detail::take(d, "replay_capacity", cfg.dqn.replay_capacity);
        detail::take(d, "batch_size", cfg.dqn.batch_size);
        detail::take(d, "target_sync_every", cfg.dqn.target_sync_every);
        detail::take(d, "updates_per_step", cfg.dqn.updates_per_step);
        detail::take(d, "eval_envs", cfg.dqn.eval_envs);
        detail::reject_unknown(d, "dqn");
    }
    if (auto it = j.find("paths"); it != j.end()) {
        nlohmann::json p = *it;
        j.erase(it);
        detail::take(p, "dataset", cfg.paths.dataset);
        detail::take(p, "vae_weights", cfg.paths.vae_weights);
        detail::take(p, "vae_history", cfg.paths.vae_history);
        detail::take(p, "qnet_x", cfg.paths.qnet_x);
        detail::take(p, "qnet_w", cfg.paths.qnet_w);
        detail::take(p, "dqn_history_x", cfg.paths.dqn_history_x);
        detail::take(p, "dqn_history_w", cfg.paths.dqn_history_w);
        detail::take(p, "latent", cfg.paths.latent);
        detail::take(p, "trace", cfg.paths.trace);
        detail::take(p, "eval_report", cfg.paths.eval_report);
        detail::reject_unknown(p, "paths");
    }
    detail::reject_unknown(j, "top level");

    if (!cfg.max_steps_given) cfg.world.max_steps = 2 * cfg.world.n_poi;
    if (cfg.world.d_feat != cfg.vae.d_x)
        throw std::runtime_error("config: world.d_feat must equal vae.d_x");
    cfg.dqn.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    return parse_run_config(read_json_file(path));
}

} // namespace poisense
