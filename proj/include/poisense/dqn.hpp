#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisense/adam.hpp"
#include "poisense/world.hpp"

namespace poisense {

struct DqnConfig {
    double gamma = 0.95;
    double eps_start = 1.0;
    double eps_min = 0.01;
    double eps_decay = 0.99; // per-episode multiplicative
    double learning_rate = 0.001;
    std::size_t episodes = 2000;
    std::size_t replay_capacity = 10000;
    std::size_t batch_size = 32;
    std::size_t target_sync_every = 100; // gradient steps
    std::size_t updates_per_step = 4;    // minibatch updates per environment step
    std::size_t eval_envs = 512;

    void validate() const {
        if (eps_min > eps_start || eps_decay <= 0.0 || eps_decay > 1.0)
            throw std::invalid_argument("DqnConfig: bad epsilon schedule");
        if (updates_per_step == 0)
            throw std::invalid_argument("DqnConfig: updates_per_step must be positive");
        if (gamma < 0.0 || gamma >= 1.0)
            throw std::invalid_argument("DqnConfig: gamma must be in [0,1)");
    }
};

struct Transition {
    std::vector<double> state;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
};

/// FIFO replay memory with a hard capacity.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Transition t) {
        if (buf_.size() == capacity_) buf_.pop_front();
        buf_.push_back(std::move(t));
    }

    std::vector<const Transition*> sample(std::size_t n, RngStream& rng) const {
        std::vector<const Transition*> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(&buf_[rng.uniform_index(buf_.size())]);
        return out;
    }

    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return buf_.at(i); }

private:
    std::size_t capacity_;
    std::deque<Transition> buf_;
};

/// Q-network over belief-map states: 2*d_z*N inputs, 24-24 ReLU body, linear
/// head with N+1 outputs. Action i < N is Observe(i); action N is NOP.
inline DenseNet make_qnet(std::size_t n_poi, std::size_t d_z, RngStream& rng) {
    return make_mlp({2 * d_z * n_poi, 24, 24, n_poi + 1},
                    {Activation::ReLU, Activation::ReLU, Activation::Linear}, rng);
}

inline std::size_t nop_action(std::size_t n_poi) { return n_poi; }

/// The paper's reward rule for an observation outcome.
inline double shape_reward(double delta_info, double tau) {
    return delta_info > tau ? delta_info : -1.0;
}

/// Fresh environment plus a map where each PoI independently starts
/// pre-observed by the *other* modality with probability p_other, so the
/// fusion branch occurs during training.
inline std::pair<Environment, WorldMap> reset_episode(const JmvaeModel& model,
                                                      const WorldConfig& cfg, Modality mod,
                                                      RngStream& rng) {
    Environment env = sample_environment(cfg.n_poi, rng);
    WorldMap map = fresh_map(cfg.n_poi, model.d_z);
    const Modality other = mod == Modality::X ? Modality::W : Modality::X;
    for (std::size_t n = 0; n < cfg.n_poi; ++n) {
        if (rng.uniform() < cfg.p_other) {
            const auto feat = gen_features(env.classes[n], other, cfg.noise_std, rng, cfg.d_feat);
            map.beliefs[n].posterior = encode_uni(model, other, feat);
            if (other == Modality::X)
                map.beliefs[n].observed_x = true;
            else
                map.beliefs[n].observed_w = true;
        }
    }
    return {std::move(env), std::move(map)};
}

struct StepOutcome {
    double reward = 0.0;
    bool done = false;
};

/// NOP ends the episode with reward 0; Observe(n) pays delta-I when the
/// information gain clears tau and -1 otherwise.
inline StepOutcome env_step(const Environment& env, WorldMap& map, std::size_t action,
                            Modality mod, const JmvaeModel& model, const WorldConfig& cfg,
                            RngStream& rng, std::size_t steps_so_far) {
    const std::size_t n_poi = map.n_poi();
    if (action > nop_action(n_poi))
        throw std::invalid_argument("env_step: invalid action index");
    if (action == nop_action(n_poi)) return {0.0, true};
    const double delta = observe(env, map, action, mod, model, cfg, rng);
    return {shape_reward(delta, cfg.delta_threshold), steps_so_far + 1 >= cfg.max_steps};
}

/// Epsilon-greedy: uniform with probability eps, else argmax with ties broken
/// toward the lowest index.
inline std::size_t select_action(std::span<const double> qvals, double epsilon, RngStream& rng) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("select_action: epsilon out of range");
    if (epsilon > 0.0 && rng.uniform() < epsilon) return rng.uniform_index(qvals.size());
    std::size_t best = 0;
    for (std::size_t i = 1; i < qvals.size(); ++i)
        if (qvals[i] > qvals[best]) best = i;
    return best;
}

/// One-step Q-learning targets against a frozen target network.
inline std::vector<double> td_targets(std::span<const Transition* const> batch,
                                      const DenseNet& target_net, double gamma) {
    if (batch.empty()) throw std::invalid_argument("td_targets: empty batch");
    std::vector<double> y;
    y.reserve(batch.size());
    for (const Transition* t : batch) {
        if (t->done) {
            y.push_back(t->reward);
            continue;
        }
        const std::vector<double> q = net_forward(target_net, t->next_state);
        y.push_back(t->reward + gamma * *std::max_element(q.begin(), q.end()));
    }
    return y;
}

struct EpisodeStats {
    double total_reward = 0.0;
    double epsilon = 0.0;
    double loss_mean = 0.0;
    std::size_t steps = 0;
};

/// Stepwise DQN trainer; train_dqn drives it, tests can poke the pieces.
class DqnTrainer {
public:
    DqnTrainer(const JmvaeModel& model, Modality mod, WorldConfig world_cfg, DqnConfig cfg,
               RngStream rng)
        : model_(model),
          mod_(mod),
          world_cfg_(world_cfg),
          cfg_(cfg),
          rng_(rng),
          online_(make_qnet(world_cfg.n_poi, model.d_z, rng_)),
          target_(online_),
          adam_(online_, AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8}),
          buffer_(cfg.replay_capacity),
          epsilon_(cfg.eps_start) {
        cfg_.validate();
    }

    EpisodeStats run_episode() {
        auto [env, map] = reset_episode(model_, world_cfg_, mod_, rng_);
        EpisodeStats stats;
        stats.epsilon = epsilon_;
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t step = 0;; ++step) {
            std::vector<double> s = state_vector(map);
            const std::vector<double> q = net_forward(online_, s);
            const std::size_t a = select_action(q, epsilon_, rng_);
            const StepOutcome out = env_step(env, map, a, mod_, model_, world_cfg_, rng_, step);
            std::vector<double> s2 = state_vector(map);
            buffer_.push({std::move(s), a, out.reward, std::move(s2), out.done});
            stats.total_reward += out.reward;
            ++stats.steps;
            if (buffer_.size() >= cfg_.batch_size) {
                for (std::size_t u = 0; u < cfg_.updates_per_step; ++u) {
                    loss_sum += gradient_step();
                    ++loss_count;
                }
            }
            if (out.done) break;
        }
        if (loss_count > 0) stats.loss_mean = loss_sum / static_cast<double>(loss_count);
        epsilon_ = std::max(cfg_.eps_min, epsilon_ * cfg_.eps_decay);
        return stats;
    }

    /// One minibatch update (squared error on the taken action only).
    double gradient_step() {
        const auto batch = buffer_.sample(cfg_.batch_size, rng_);
        const std::vector<double> targets = td_targets(batch, target_, cfg_.gamma);
        NetGrads grads = NetGrads::zeros_like(online_);
        double loss = 0.0;
        std::vector<double> out_grad(online_.output_dim());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            ForwardCache cache;
            const std::vector<double> q = net_forward(online_, batch[i]->state, &cache);
            const double err = q[batch[i]->action] - targets[i];
            loss += 0.5 * err * err;
            std::fill(out_grad.begin(), out_grad.end(), 0.0);
            out_grad[batch[i]->action] = err;
            net_backward(online_, cache, out_grad, grads);
        }
        const double inv_b = 1.0 / static_cast<double>(batch.size());
        loss *= inv_b;
        if (!std::isfinite(loss)) throw std::runtime_error("DqnTrainer: non-finite Q loss");
        grads.scale(inv_b);
        adam_.step(online_, grads);
        ++grad_steps_;
        if (grad_steps_ % cfg_.target_sync_every == 0) target_ = online_;
        return loss;
    }

    const DenseNet& online_net() const { return online_; }
    const DenseNet& target_net() const { return target_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    double epsilon() const { return epsilon_; }
    std::size_t grad_steps() const { return grad_steps_; }

private:
    const JmvaeModel& model_;
    Modality mod_;
    WorldConfig world_cfg_;
    DqnConfig cfg_;
    RngStream rng_;
    DenseNet online_;
    DenseNet target_;
    NetAdam adam_;
    ReplayBuffer buffer_;
    double epsilon_;
    std::size_t grad_steps_ = 0;
};

inline std::pair<DenseNet, std::vector<EpisodeStats>>
train_dqn(const JmvaeModel& model, Modality mod, const WorldConfig& world_cfg,
          const DqnConfig& cfg, RngStream& rng) {
    DqnTrainer trainer(model, mod, world_cfg, cfg, rng);
    std::vector<EpisodeStats> history;
    history.reserve(cfg.episodes);
    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
        try {
            history.push_back(trainer.run_episode());
        } catch (const std::runtime_error& e) {
            std::ostringstream oss;
            oss << "train_dqn(" << modality_name(mod) << "): aborted at episode " << ep << ": "
                << e.what();
            throw std::runtime_error(oss.str());
        }
    }
    return {trainer.online_net(), std::move(history)};
}

struct EpisodeResult {
    double total_reward = 0.0;
    std::size_t steps = 0;
    bool ended_by_nop = false;
    std::vector<std::size_t> actions;
};

/// Greedy (epsilon = 0) rollout on a given environment/map.
inline EpisodeResult run_greedy_episode(const DenseNet& qnet, const JmvaeModel& model,
                                        Modality mod, const Environment& env, WorldMap map,
                                        const WorldConfig& cfg, RngStream& rng) {
    EpisodeResult res;
    for (std::size_t step = 0;; ++step) {
        const std::vector<double> q = net_forward(qnet, state_vector(map));
        const std::size_t a = select_action(q, 0.0, rng);
        res.actions.push_back(a);
        const StepOutcome out = env_step(env, map, a, mod, model, cfg, rng, step);
        res.total_reward += out.reward;
        ++res.steps;
        if (out.done) {
            res.ended_by_nop = (a == nop_action(map.n_poi()));
            break;
        }
    }
    return res;
}

/// Mean greedy episode reward over freshly sampled environments (each with
/// p_other pre-observations, as in training).
inline double evaluate_policy(const DenseNet& qnet, const JmvaeModel& model, Modality mod,
                              const WorldConfig& cfg, std::size_t n_envs, RngStream& rng) {
    if (n_envs < 1) throw std::invalid_argument("evaluate_policy: n_envs must be >= 1");
    double sum = 0.0;
    for (std::size_t i = 0; i < n_envs; ++i) {
        auto [env, map] = reset_episode(model, cfg, mod, rng);
        sum += run_greedy_episode(qnet, model, mod, env, std::move(map), cfg, rng).total_reward;
    }
    return sum / static_cast<double>(n_envs);
}

/// Brute-force planner for one environment and initial map. Expected
/// information gains are Monte-Carlo estimates over fresh noise resamples;
/// between observations a belief advances along its noiseless (prototype)
/// feature, so the per-PoI belief chain is deterministic and cacheable.
/// optimal() maximizes the expected undiscounted total reward over every
/// action sequence ending in NOP or at the step cap; sequence_value() scores
/// a fixed sequence with the *same* cached estimates, so it can never exceed
/// optimal().
class OraclePlanner {
public:
    struct Value {
        double value = 0.0;
        double std_error = 0.0;
    };

    OraclePlanner(const Environment& env, const WorldMap& initial, const JmvaeModel& model,
                  Modality mod, const WorldConfig& cfg, const RngStream& rng,
                  std::size_t k_resamples = 32)
        : env_(env), model_(model), mod_(mod), cfg_(cfg), rng_(rng), k_(k_resamples) {
        if (cfg.n_poi > 6)
            throw std::invalid_argument("OraclePlanner: more than 6 PoIs is intractable");
        if (initial.n_poi() != env.n_poi())
            throw std::invalid_argument("OraclePlanner: map/environment size mismatch");
        chains_.resize(env.n_poi());
        for (std::size_t n = 0; n < env.n_poi(); ++n)
            chains_[n].push_back({initial.beliefs[n], 0.0, 0.0, false});
    }

    Value optimal() {
        std::vector<std::size_t> counts(env_.n_poi(), 0);
        return best(counts, 0);
    }

    /// Expected value of a fixed action sequence (stops at NOP or the cap).
    Value sequence_value(std::span<const std::size_t> actions) {
        std::vector<std::size_t> counts(env_.n_poi(), 0);
        Value v;
        std::size_t steps = 0;
        for (std::size_t a : actions) {
            if (steps >= cfg_.max_steps) break;
            if (a == nop_action(env_.n_poi())) break;
            const StepEstimate& est = estimate(a, counts[a]);
            if (est.mean_delta > cfg_.delta_threshold) {
                v.value += est.mean_delta;
                v.std_error = std::sqrt(v.std_error * v.std_error + est.var_of_mean);
            } else {
                v.value -= 1.0;
            }
            ++counts[a];
            ++steps;
        }
        return v;
    }

private:
    // Belief after `count` observations of this PoI by our modality, plus the
    // MC estimate of the information gain of the *next* observation.
    struct StepEstimate {
        Belief belief;      // belief before the observation at this count
        double mean_delta = 0.0;
        double var_of_mean = 0.0;
        bool evaluated = false;
    };

    const StepEstimate& estimate(std::size_t poi, std::size_t count) {
        auto& chain = chains_[poi];
        // Invariant: every entry but the last is evaluated.
        while (chain.size() <= count + 1) {
            const std::size_t c = chain.size() - 1;
            StepEstimate& cur = chain[c];
            // Monte-Carlo gain estimate from fresh noise resamples.
            RngStream noise = rng_.child("oracle-poi" + std::to_string(poi) + "-obs" +
                                         std::to_string(c));
            const double old_info = information(cur.belief);
            double sum = 0.0, sum2 = 0.0;
            for (std::size_t k = 0; k < k_; ++k) {
                const auto feat =
                    gen_features(env_.classes[poi], mod_, cfg_.noise_std, noise, cfg_.d_feat);
                const DiagGaussian post = updated_posterior(cur.belief, feat);
                const double d = 1.0 / norm2(post.sigma) - old_info;
                sum += d;
                sum2 += d * d;
            }
            const double mean = sum / static_cast<double>(k_);
            const double var =
                std::max(0.0, sum2 / static_cast<double>(k_) - mean * mean);
            cur.mean_delta = mean;
            cur.var_of_mean = var / static_cast<double>(k_);
            cur.evaluated = true;
            // Advance deterministically along the noiseless feature.
            const auto proto = class_prototype(env_.classes[poi], mod_, cfg_.d_feat);
            Belief next = cur.belief;
            next.posterior = updated_posterior(cur.belief, proto);
            if (mod_ == Modality::X)
                next.observed_x = true;
            else
                next.observed_w = true;
            chain.push_back({std::move(next), 0.0, 0.0, false});
        }
        return chain[count];
    }

    DiagGaussian updated_posterior(const Belief& b, std::span<const double> feat) const {
        const Modality other = mod_ == Modality::X ? Modality::W : Modality::X;
        if (b.observed_by(other)) return fuse(model_, b, feat, mod_);
        return encode_uni(model_, mod_, feat);
    }

    static double norm2(const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    }

    Value best(std::vector<std::size_t>& counts, std::size_t steps) {
        if (steps >= cfg_.max_steps) return {};
        const std::uint64_t key = encode(counts);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        Value bestv; // NOP: terminate now, value 0
        for (std::size_t n = 0; n < env_.n_poi(); ++n) {
            const StepEstimate& est = estimate(n, counts[n]);
            double r;
            double var = 0.0;
            if (est.mean_delta > cfg_.delta_threshold) {
                r = est.mean_delta;
                var = est.var_of_mean;
            } else {
                r = -1.0;
            }
            ++counts[n];
            const Value sub = best(counts, steps + 1);
            --counts[n];
            const double cand = r + sub.value;
            if (cand > bestv.value) {
                bestv.value = cand;
                bestv.std_error = std::sqrt(var + sub.std_error * sub.std_error);
            }
        }
        memo_.emplace(key, bestv);
        return bestv;
    }

    std::uint64_t encode(const std::vector<std::size_t>& counts) const {
        std::uint64_t key = 0;
        for (std::size_t c : counts) key = key * (cfg_.max_steps + 1) + c;
        return key;
    }

    const Environment& env_;
    const JmvaeModel& model_;
    Modality mod_;
    WorldConfig cfg_;
    RngStream rng_;
    std::size_t k_;
    std::vector<std::vector<StepEstimate>> chains_;
    std::map<std::uint64_t, Value> memo_;
};

struct EvalReport {
    double policy_avg = 0.0;
    double oracle_avg = 0.0;
    double ratio = 0.0;
    std::size_t dominance_violations = 0; // envs where the policy's expected
                                          // value beat the oracle beyond 3 SE
    std::size_t n_envs = 0;
};

/// Greedy-policy evaluation against the brute-force oracle on the same
/// sampled environments and initial maps.
inline EvalReport evaluate_with_oracle(const DenseNet& qnet, const JmvaeModel& model,
                                       Modality mod, const WorldConfig& cfg,
                                       std::size_t n_envs, RngStream& rng) {
    EvalReport rep;
    rep.n_envs = n_envs;
    double policy_sum = 0.0, oracle_sum = 0.0;
    for (std::size_t i = 0; i < n_envs; ++i) {
        RngStream env_rng = rng.child("env" + std::to_string(i));
        auto [env, map] = reset_episode(model, cfg, mod, env_rng);
        OraclePlanner planner(env, map, model, mod, cfg, env_rng.child("oracle"));
        RngStream ep_rng = env_rng.child("episode");
        const EpisodeResult ep =
            run_greedy_episode(qnet, model, mod, env, map, cfg, ep_rng);
        const OraclePlanner::Value opt = planner.optimal();
        const OraclePlanner::Value seq = planner.sequence_value(ep.actions);
        policy_sum += ep.total_reward;
        oracle_sum += opt.value;
        const double tol = 3.0 * std::sqrt(seq.std_error * seq.std_error +
                                           opt.std_error * opt.std_error);
        if (seq.value > opt.value + tol) ++rep.dominance_violations;
    }
    rep.policy_avg = policy_sum / static_cast<double>(n_envs);
    rep.oracle_avg = oracle_sum / static_cast<double>(n_envs);
    rep.ratio = rep.oracle_avg != 0.0 ? rep.policy_avg / rep.oracle_avg : 0.0;
    return rep;
}

struct JointStep {
    int agent = 0; // 0 = X, 1 = W
    std::size_t action = 0;
    double reward = 0.0;
    double total_information = 0.0;
};

/// Two greedy agents alternate (X first) on one shared map; an agent that
/// plays NOP retires. Ends when both retire or after 2 * max_steps total
/// observation turns.
inline std::vector<JointStep> simulate_joint(const DenseNet& qnet_x, const DenseNet& qnet_w,
                                             const JmvaeModel& model, const Environment& env,
                                             const WorldConfig& cfg, RngStream& rng) {
    WorldMap map = fresh_map(cfg.n_poi, model.d_z);
    std::vector<JointStep> trace;
    bool retired[2] = {false, false};
    std::size_t steps_taken[2] = {0, 0};
    std::size_t total_steps = 0;
    int turn = 0; // X first
    while ((!retired[0] || !retired[1]) && total_steps < 2 * cfg.max_steps) {
        if (retired[turn]) {
            turn = 1 - turn;
            continue;
        }
        const Modality mod = turn == 0 ? Modality::X : Modality::W;
        const DenseNet& qnet = turn == 0 ? qnet_x : qnet_w;
        const std::vector<double> q = net_forward(qnet, state_vector(map));
        const std::size_t a = select_action(q, 0.0, rng);
        if (a == nop_action(cfg.n_poi)) {
            retired[turn] = true;
            turn = 1 - turn;
            continue;
        }
        const StepOutcome out =
            env_step(env, map, a, mod, model, cfg, rng, steps_taken[turn]);
        trace.push_back({turn, a, out.reward, total_information(map)});
        ++steps_taken[turn];
        ++total_steps;
        if (steps_taken[turn] >= cfg.max_steps) retired[turn] = true;
        turn = 1 - turn;
    }
    return trace;
}

} // namespace poisense
