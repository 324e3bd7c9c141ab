#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "poisense/config.hpp"
#include "poisense/pipeline.hpp"
#include "poisense/world.hpp"

using namespace poisense;

int main(int argc, char** argv) {
    CLI::App app{"Active-sensing pipeline: joint two-modality VAE, belief map, "
                 "per-modality DQN agents"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "JSON config file");
    auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out-dir", out_dir, "override the output directory");

    auto* gen_data = app.add_subcommand("gen-data", "write the synthetic feature dataset");
    auto* train_vae = app.add_subcommand("train-vae", "train the joint VAE");
    auto* train_dqn_cmd = app.add_subcommand("train-dqn", "train one modality's DQN");
    std::string modality;
    train_dqn_cmd->add_option("--modality", modality, "x or w")->required();
    auto* eval = app.add_subcommand("eval", "greedy policy vs. brute-force oracle");
    auto* dump_latent = app.add_subcommand("dump-latent", "latent statistics per input mode");
    auto* simulate = app.add_subcommand("simulate", "two-agent shared-map simulation");
    auto* state_space =
        app.add_subcommand("state-space", "count of discrete map states");
    std::uint64_t ss_poi = 0, ss_mod = 0, ss_enc = 0;
    state_space->add_option("n_poi", ss_poi)->required();
    state_space->add_option("n_mod", ss_mod)->required();
    state_space->add_option("n_enc", ss_enc)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (state_space->parsed()) {
            std::cout << state_space_size(ss_poi, ss_mod, ss_enc) << '\n';
            return 0;
        }

        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;

        if (gen_data->parsed()) {
            cmd_gen_data(cfg);
        } else if (train_vae->parsed()) {
            cmd_train_vae(cfg);
        } else if (train_dqn_cmd->parsed()) {
            if (modality != "x" && modality != "w") {
                std::cerr << "error: --modality must be x or w, got \"" << modality << "\"\n";
                return 2;
            }
            cmd_train_dqn(cfg, modality == "x" ? Modality::X : Modality::W);
        } else if (eval->parsed()) {
            cmd_eval(cfg, std::cout);
        } else if (dump_latent->parsed()) {
            cmd_dump_latent(cfg);
        } else if (simulate->parsed()) {
            cmd_simulate(cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
