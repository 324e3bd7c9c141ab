#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "poisense/config.hpp"
#include "poisense/dqn.hpp"
#include "poisense/io.hpp"
#include "poisense/jmvae.hpp"
#include "poisense/world.hpp"

namespace poisense {

// All commands draw from labeled children of the single run seed, so each
// command is reproducible on its own: data, vae, dqn-x, dqn-w, eval, sim,
// latent-data.

inline std::vector<Sample> generate_dataset(const WorldConfig& wcfg, std::size_t size,
                                            RngStream& rng) {
    std::vector<Sample> data;
    data.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        const int cls = 1 + static_cast<int>(rng.uniform_index(3));
        Sample s;
        s.label = cls;
        s.x = gen_features(cls, Modality::X, wcfg.noise_std, rng, wcfg.d_feat);
        s.w = gen_features(cls, Modality::W, wcfg.noise_std, rng, wcfg.d_feat);
        data.push_back(std::move(s));
    }
    return data;
}

inline void write_dataset_csv(const std::string& path, const std::vector<Sample>& data,
                              std::size_t d_feat) {
    std::vector<std::string> header{"class"};
    for (std::size_t i = 1; i <= d_feat; ++i) header.push_back("x_" + std::to_string(i));
    for (std::size_t i = 1; i <= d_feat; ++i) header.push_back("w_" + std::to_string(i));
    CsvWriter csv(path, header);
    for (const auto& s : data) {
        std::vector<std::string> row{std::to_string(s.label)};
        for (double v : s.x) row.push_back(format_double(v));
        for (double v : s.w) row.push_back(format_double(v));
        csv.row(row);
    }
}

inline std::vector<Sample> read_dataset_csv(const std::string& path, std::size_t d_feat) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
    std::vector<Sample> data;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        Sample s;
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("bad dataset row");
        s.label = std::stoi(cell);
        for (std::size_t i = 0; i < 2 * d_feat; ++i) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("dataset row has too few columns: " + path);
            (i < d_feat ? s.x : s.w).push_back(std::stod(cell));
        }
        data.push_back(std::move(s));
    }
    return data;
}

inline void ensure_out_dir(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
}

inline void cmd_gen_data(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    RngStream rng = RngStream(cfg.seed).child("data");
    const auto data = generate_dataset(cfg.world, cfg.vae.dataset_size, rng);
    write_dataset_csv(cfg.path(cfg.paths.dataset), data, cfg.world.d_feat);
}

/// Uses the dataset file when present, otherwise regenerates it in-process
/// from the same "data" stream (identical contents either way).
inline std::vector<Sample> load_or_generate_dataset(const RunConfig& cfg) {
    const std::string path = cfg.path(cfg.paths.dataset);
    if (std::filesystem::exists(path)) return read_dataset_csv(path, cfg.world.d_feat);
    RngStream rng = RngStream(cfg.seed).child("data");
    return generate_dataset(cfg.world, cfg.vae.dataset_size, rng);
}

inline void cmd_train_vae(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    const auto data = load_or_generate_dataset(cfg);
    RngStream rng = RngStream(cfg.seed).child("vae");
    auto [model, history] = train_jmvae(data, cfg.vae, rng);
    save_jmvae(cfg.path(cfg.paths.vae_weights), model);
    CsvWriter csv(cfg.path(cfg.paths.vae_history),
                  {"epoch", "recon_x", "recon_w", "kl_prior", "kl_x", "kl_w", "total"});
    for (std::size_t e = 0; e < history.size(); ++e) {
        const auto& lb = history[e];
        csv.row({std::to_string(e), format_double(lb.recon_x), format_double(lb.recon_w),
                 format_double(lb.kl_prior), format_double(lb.kl_unimodal_x),
                 format_double(lb.kl_unimodal_w), format_double(lb.total)});
    }
}

inline JmvaeModel load_vae_or_fail(const RunConfig& cfg) {
    const std::string path = cfg.path(cfg.paths.vae_weights);
    if (!std::filesystem::exists(path))
        throw std::runtime_error("missing VAE weights: " + path + " (run train-vae first)");
    return load_jmvae(path);
}

inline void cmd_train_dqn(const RunConfig& cfg, Modality mod) {
    ensure_out_dir(cfg);
    const JmvaeModel model = load_vae_or_fail(cfg);
    RngStream rng =
        RngStream(cfg.seed).child(mod == Modality::X ? "dqn-x" : "dqn-w");
    auto [qnet, history] = train_dqn(model, mod, cfg.world, cfg.dqn, rng);
    const bool is_x = mod == Modality::X;
    save_qnet(cfg.path(is_x ? cfg.paths.qnet_x : cfg.paths.qnet_w), qnet, cfg.world.n_poi,
              model.d_z);
    CsvWriter csv(cfg.path(is_x ? cfg.paths.dqn_history_x : cfg.paths.dqn_history_w),
                  {"episode", "total_reward", "epsilon", "loss_mean"});
    for (std::size_t e = 0; e < history.size(); ++e)
        csv.row({std::to_string(e), format_double(history[e].total_reward),
                 format_double(history[e].epsilon), format_double(history[e].loss_mean)});
}

inline DenseNet load_qnet_or_fail(const RunConfig& cfg, Modality mod) {
    const std::string path =
        cfg.path(mod == Modality::X ? cfg.paths.qnet_x : cfg.paths.qnet_w);
    if (!std::filesystem::exists(path))
        throw std::runtime_error("missing Q-network weights: " + path +
                                 " (run train-dqn first)");
    return load_qnet(path, cfg.world.n_poi, cfg.vae.d_z);
}

inline std::pair<EvalReport, EvalReport> cmd_eval(const RunConfig& cfg, std::ostream& out) {
    ensure_out_dir(cfg);
    const JmvaeModel model = load_vae_or_fail(cfg);
    const DenseNet qx = load_qnet_or_fail(cfg, Modality::X);
    const DenseNet qw = load_qnet_or_fail(cfg, Modality::W);
    RngStream eval_rng = RngStream(cfg.seed).child("eval");
    RngStream rng_x = eval_rng.child("x");
    RngStream rng_w = eval_rng.child("w");
    const EvalReport rx =
        evaluate_with_oracle(qx, model, Modality::X, cfg.world, cfg.dqn.eval_envs, rng_x);
    const EvalReport rw =
        evaluate_with_oracle(qw, model, Modality::W, cfg.world, cfg.dqn.eval_envs, rng_w);
    CsvWriter csv(cfg.path(cfg.paths.eval_report),
                  {"modality", "policy_avg_reward", "oracle_avg_reward", "ratio",
                   "dominance_violations", "n_envs"});
    for (const auto& [name, r] : {std::pair<const char*, const EvalReport&>{"x", rx},
                                  {"w", rw}}) {
        csv.row({name, format_double(r.policy_avg), format_double(r.oracle_avg),
                 format_double(r.ratio), std::to_string(r.dominance_violations),
                 std::to_string(r.n_envs)});
        out << "modality " << name << ": policy avg " << format_double(r.policy_avg)
            << ", oracle avg " << format_double(r.oracle_avg) << ", ratio "
            << format_double(r.ratio) << " (" << r.dominance_violations
            << " dominance violations over " << r.n_envs << " environments)\n";
    }
    return {rx, rw};
}

inline constexpr std::size_t kHeldOutSamples = 300;

inline std::vector<Sample> held_out_dataset(const RunConfig& cfg) {
    RngStream rng = RngStream(cfg.seed).child("latent-data");
    return generate_dataset(cfg.world, kHeldOutSamples, rng);
}

inline void cmd_dump_latent(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    const JmvaeModel model = load_vae_or_fail(cfg);
    const auto data = held_out_dataset(cfg);
    const auto rows = latent_dump(model, data);
    std::vector<std::string> header{"class", "input_mode"};
    for (std::size_t i = 1; i <= model.d_z; ++i) header.push_back("mu" + std::to_string(i));
    for (std::size_t i = 1; i <= model.d_z; ++i)
        header.push_back("sigma" + std::to_string(i));
    CsvWriter csv(cfg.path(cfg.paths.latent), header);
    for (const auto& r : rows) {
        std::vector<std::string> row{std::to_string(r.label), r.input_mode};
        for (double v : r.mu) row.push_back(format_double(v));
        for (double v : r.sigma) row.push_back(format_double(v));
        csv.row(row);
    }
}

inline void cmd_simulate(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    const JmvaeModel model = load_vae_or_fail(cfg);
    const DenseNet qx = load_qnet_or_fail(cfg, Modality::X);
    const DenseNet qw = load_qnet_or_fail(cfg, Modality::W);
    RngStream rng = RngStream(cfg.seed).child("sim");
    const Environment env = sample_environment(cfg.world.n_poi, rng);
    const auto trace = simulate_joint(qx, qw, model, env, cfg.world, rng);
    CsvWriter csv(cfg.path(cfg.paths.trace),
                  {"step", "agent", "action", "reward", "total_information"});
    for (std::size_t i = 0; i < trace.size(); ++i)
        csv.row({std::to_string(i), trace[i].agent == 0 ? "x" : "w",
                 std::to_string(trace[i].action), format_double(trace[i].reward),
                 format_double(trace[i].total_information)});
}

} // namespace poisense
