#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "poisense/dqn.hpp"

using namespace poisense;

namespace {

// Constant-head model from the world tests: uni sigma 0.5, joint sigma 0.2.
JmvaeModel constant_model(double s_uni = 0.5, double s_joint = 0.2) {
    JmvaeConfig cfg;
    RngStream rng(1);
    JmvaeModel m = init_jmvae(cfg, rng);
    auto set_head = [&](DenseNet& net, double sigma) {
        auto& l = net.layers.back();
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
        l.bias[2] = l.bias[3] = 2.0 * std::log(sigma);
    };
    set_head(m.enc_x, s_uni);
    set_head(m.enc_w, s_uni);
    set_head(m.enc_joint, s_joint);
    for (DenseNet* d : {&m.dec_x, &m.dec_w})
        for (auto& l : d->layers) {
            std::fill(l.weights.begin(), l.weights.end(), 0.0);
            std::fill(l.bias.begin(), l.bias.end(), 0.0);
        }
    return m;
}

// A Q-net whose output is a constant vector, independent of the state.
DenseNet constant_qnet(const std::vector<double>& qvals, std::size_t state_dim) {
    Layer l;
    l.in = state_dim;
    l.out = qvals.size();
    l.act = Activation::Linear;
    l.weights.assign(l.in * l.out, 0.0);
    l.bias = qvals;
    DenseNet net;
    net.layers.push_back(std::move(l));
    return net;
}

} // namespace

TEST_CASE("shape_reward implements the three-case rule") {
    const double tau = 0.01;
    CHECK(shape_reward(0.5, tau) == 0.5);
    CHECK(shape_reward(0.010001, tau) == 0.010001);
    CHECK(shape_reward(0.01, tau) == -1.0);  // gain must exceed tau
    CHECK(shape_reward(0.0, tau) == -1.0);
    CHECK(shape_reward(-0.3, tau) == -1.0);
}

TEST_CASE("select_action: argmax, ties, exploration") {
    RngStream rng(3);
    CHECK(select_action(std::vector<double>{0.1, 0.9, 0.2, 0.0}, 0.0, rng) == 1);
    CHECK(select_action(std::vector<double>{0.5, 0.5, 0.1, 0.1}, 0.0, rng) == 0);
    CHECK_THROWS_AS(select_action(std::vector<double>{0.0}, 1.5, rng), std::invalid_argument);

    const std::size_t n = 10000;
    std::vector<std::size_t> counts(4, 0);
    for (std::size_t i = 0; i < n; ++i)
        ++counts[select_action(std::vector<double>{0.0, 0.0, 0.0, 9.0}, 1.0, rng)];
    const double p = 0.25;
    const double se = std::sqrt(p * (1 - p) / n);
    for (std::size_t a = 0; a < 4; ++a)
        CHECK_THAT(static_cast<double>(counts[a]) / n,
                   Catch::Matchers::WithinAbs(p, 3.0 * se));
}

TEST_CASE("td_targets: terminal, bootstrap, gamma = 0") {
    const DenseNet target = constant_qnet({2.0, -1.0, 0.5}, 4);
    Transition done{{0, 0, 0, 0}, 0, -1.0, {0, 0, 0, 0}, true};
    Transition live{{0, 0, 0, 0}, 1, 0.0, {0, 0, 0, 0}, false};
    const std::vector<const Transition*> batch{&done, &live};
    const auto y = td_targets(batch, target, 0.95);
    CHECK(y[0] == -1.0);
    CHECK_THAT(y[1], Catch::Matchers::WithinAbs(0.95 * 2.0, 1e-12));

    const auto y0 = td_targets(batch, target, 0.0);
    CHECK(y0[0] == -1.0);
    CHECK(y0[1] == 0.0);

    Transition t2{{0, 0, 0, 0}, 2, 0.25, {0, 0, 0, 0}, true};
    const std::vector<const Transition*> terminals{&done, &t2};
    const auto yt = td_targets(terminals, target, 0.95);
    CHECK(yt[0] == done.reward);
    CHECK(yt[1] == t2.reward);
}

TEST_CASE("replay buffer is FIFO and capacity-bounded") {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) buf.push(Transition{{}, static_cast<std::size_t>(i), 0, {}, false});
    CHECK(buf.size() == 3);
    CHECK(buf.at(0).action == 2);
    CHECK(buf.at(2).action == 4);
}

TEST_CASE("reset_episode honors p_other") {
    const JmvaeModel m = constant_model();
    WorldConfig cfg;

    cfg.p_other = 0.0;
    RngStream r0(5);
    auto [e0, m0] = reset_episode(m, cfg, Modality::X, r0);
    for (const auto& b : m0.beliefs) {
        CHECK_FALSE(b.observed_x);
        CHECK_FALSE(b.observed_w);
        CHECK(b.posterior.mu == std::vector<double>{0.0, 0.0});
    }

    cfg.p_other = 1.0;
    RngStream r1(5);
    auto [e1, m1] = reset_episode(m, cfg, Modality::X, r1);
    for (const auto& b : m1.beliefs) {
        CHECK(b.observed_w); // pre-observed by the other modality
        CHECK_FALSE(b.observed_x);
    }

    cfg.p_other = 0.5;
    RngStream r2(99);
    std::size_t pre = 0, total = 0;
    for (int i = 0; i < 3000; ++i) {
        auto [env, map] = reset_episode(m, cfg, Modality::W, r2);
        for (const auto& b : map.beliefs) {
            pre += b.observed_x ? 1 : 0;
            ++total;
        }
    }
    const double se = std::sqrt(0.25 / static_cast<double>(total));
    CHECK_THAT(static_cast<double>(pre) / static_cast<double>(total),
               Catch::Matchers::WithinAbs(0.5, 3.0 * se));
}

TEST_CASE("env_step: NOP terminates with zero reward, cap terminates") {
    const JmvaeModel m = constant_model();
    const WorldConfig cfg;
    const Environment env{std::vector<int>{1, 2, 3}};
    WorldMap map = fresh_map(3, 2);
    RngStream rng(8);

    const auto before = state_vector(map);
    const StepOutcome nop = env_step(env, map, nop_action(3), Modality::X, m, cfg, rng, 0);
    CHECK(nop.reward == 0.0);
    CHECK(nop.done);
    CHECK(state_vector(map) == before);

    const StepOutcome last = env_step(env, map, 0, Modality::X, m, cfg, rng,
                                      cfg.max_steps - 1);
    CHECK(last.done);
    CHECK_THROWS_AS(env_step(env, map, 7, Modality::X, m, cfg, rng, 0),
                    std::invalid_argument);
}

TEST_CASE("epsilon schedule is non-increasing and floored") {
    const JmvaeModel m = constant_model();
    DqnConfig cfg;
    cfg.episodes = 0;
    double eps = cfg.eps_start;
    for (int i = 0; i < 2000; ++i) eps = std::max(cfg.eps_min, eps * cfg.eps_decay);
    CHECK(eps == cfg.eps_min); // 0.99^2000 < 0.01

    DqnTrainer trainer(m, Modality::X, WorldConfig{}, cfg, RngStream(4));
    double prev = trainer.epsilon();
    for (int i = 0; i < 50; ++i) {
        trainer.run_episode();
        CHECK(trainer.epsilon() <= prev);
        CHECK(trainer.epsilon() >= cfg.eps_min);
        prev = trainer.epsilon();
    }
}

TEST_CASE("target network syncs to the online network and is frozen between") {
    const JmvaeModel m = constant_model();
    DqnConfig cfg;
    cfg.target_sync_every = 5;
    cfg.batch_size = 4;
    DqnTrainer trainer(m, Modality::X, WorldConfig{}, cfg, RngStream(6));
    // initial target equals initial online
    CHECK(trainer.target_net().layers[0].weights == trainer.online_net().layers[0].weights);

    // fill the buffer without reaching a sync boundary
    while (trainer.buffer().size() < cfg.batch_size) trainer.run_episode();

    std::vector<double> frozen, now, online;
    flatten_params(trainer.target_net(), frozen);
    for (int i = 0; i < 12; ++i) {
        trainer.gradient_step();
        flatten_params(trainer.target_net(), now);
        flatten_params(trainer.online_net(), online);
        if (trainer.grad_steps() % cfg.target_sync_every == 0) {
            CHECK(now == online); // synced this step
            frozen = now;
        } else {
            CHECK(now == frozen); // frozen between syncs
            CHECK(now != online);
        }
    }
}

TEST_CASE("train_dqn with zero episodes returns an initialized net") {
    const JmvaeModel m = constant_model();
    DqnConfig cfg;
    cfg.episodes = 0;
    RngStream rng(10);
    const auto [qnet, history] = train_dqn(m, Modality::X, WorldConfig{}, cfg, rng);
    CHECK(history.empty());
    CHECK(qnet.input_dim() == 12);
    CHECK(qnet.output_dim() == 4);
}

TEST_CASE("evaluate_policy: NOP-first policy scores zero") {
    const JmvaeModel m = constant_model();
    const WorldConfig cfg;
    const DenseNet nop_net = constant_qnet({0.0, 0.0, 0.0, 10.0}, 12);
    RngStream rng(11);
    CHECK(evaluate_policy(nop_net, m, Modality::X, cfg, 20, rng) == 0.0);
    RngStream r1(12), r2(12);
    CHECK(evaluate_policy(nop_net, m, Modality::X, cfg, 1, r1) ==
          evaluate_policy(nop_net, m, Modality::X, cfg, 1, r2));
    CHECK_THROWS_AS(evaluate_policy(nop_net, m, Modality::X, cfg, 0, rng),
                    std::invalid_argument);
}

TEST_CASE("oracle: all-punished environment has optimum zero") {
    // Zero-head model: every posterior equals the prior, so delta-I is always
    // 0 and every observation is punished; the best plan is immediate NOP.
    JmvaeConfig vcfg;
    RngStream mrng(2);
    JmvaeModel m = init_jmvae(vcfg, mrng);
    for (DenseNet* net : {&m.enc_joint, &m.enc_x, &m.enc_w}) {
        auto& l = net->layers.back();
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    WorldConfig cfg;
    cfg.p_other = 0.0;
    const Environment env{std::vector<int>{1, 2, 3}};
    const WorldMap map = fresh_map(3, 2);
    OraclePlanner planner(env, map, m, Modality::X, cfg, RngStream(3));
    const auto v = planner.optimal();
    CHECK(v.value == 0.0);
}

TEST_CASE("oracle: single PoI with positive gain is observed exactly once") {
    const JmvaeModel m = constant_model(0.5, 0.2);
    WorldConfig cfg;
    cfg.n_poi = 1;
    cfg.max_steps = 2;
    cfg.noise_std = 0.0; // constant-head model: gains are exact
    const Environment env{std::vector<int>{2}};
    const WorldMap map = fresh_map(1, 2);
    OraclePlanner planner(env, map, m, Modality::X, cfg, RngStream(4));
    const double d = 1.0 / std::sqrt(0.5) - 1.0 / std::sqrt(2.0);
    const auto v = planner.optimal();
    CHECK_THAT(v.value, Catch::Matchers::WithinAbs(d, 1e-9));

    // a fixed sequence scored with the same estimates can never beat optimal
    const std::vector<std::size_t> twice{0, 0};
    CHECK(planner.sequence_value(twice).value <= v.value);
    CHECK_THAT(planner.sequence_value(twice).value,
               Catch::Matchers::WithinAbs(d - 1.0, 1e-9));
}

TEST_CASE("oracle rejects oversized problems") {
    const JmvaeModel m = constant_model();
    WorldConfig cfg;
    cfg.n_poi = 7;
    const Environment env{std::vector<int>{1, 1, 1, 1, 1, 1, 1}};
    const WorldMap map = fresh_map(7, 2);
    CHECK_THROWS_AS(OraclePlanner(env, map, m, Modality::X, cfg, RngStream(5)),
                    std::invalid_argument);
}

TEST_CASE("simulate_joint: NOP policies leave the map untouched, cap holds") {
    const JmvaeModel m = constant_model();
    const WorldConfig cfg;
    const Environment env{std::vector<int>{1, 2, 3}};
    const DenseNet nop_net = constant_qnet({0.0, 0.0, 0.0, 10.0}, 12);
    RngStream rng(13);
    const auto trace = simulate_joint(nop_net, nop_net, m, env, cfg, rng);
    CHECK(trace.empty());

    const DenseNet greedy0 = constant_qnet({10.0, 0.0, 0.0, 0.0}, 12);
    RngStream rng2(14);
    const auto trace2 = simulate_joint(greedy0, greedy0, m, env, cfg, rng2);
    CHECK(trace2.size() <= 2 * cfg.max_steps);
    CHECK_FALSE(trace2.empty());
}
