#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsa/environment.hpp"
#include "dsa/error.hpp"
#include "dsa/neural.hpp"
#include "dsa/policies.hpp"
#include "dsa/random.hpp"
#include "dsa/schedule.hpp"

namespace dsa {

struct Hyperparams {
    std::int64_t memory_size = 50000;  ///< M
    std::int64_t batch_size = 32;      ///< B
    double gamma = 0.9;
    double learning_rate = 3e-4;
    double epsilon_start = 0.9;
    std::int64_t epsilon_decay_steps = 10000;
    std::int64_t target_sync_freq = 200;   ///< F, in updates
    std::int64_t max_train_iters = 50000;  ///< I_max, in updates
    std::int64_t warmup_size = 1000;       ///< W, transitions stored before the first update
    int hidden_width = 50;
    int hidden_layers = 3;

    /// Full-size replay memory and the original learning rate; the warm-up
    /// stays at W instead of a full memory.
    static Hyperparams reference() {
        Hyperparams h;
        h.memory_size = 300000;
        h.learning_rate = 1e-3;
        return h;
    }

    static Hyperparams desk() { return {}; }

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
        if (warmup_size < batch_size) throw ConfigError("warmup_size", "must be at least batch_size");
        if (memory_size < warmup_size) throw ConfigError("memory_size", "must be at least warmup_size");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma", "must lie in (0, 1)");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
        if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) throw ConfigError("epsilon_start", "must lie in [0, 1]");
        if (epsilon_decay_steps < 0) throw ConfigError("epsilon_decay_steps", "must be non-negative");
        if (target_sync_freq < 1) throw ConfigError("target_sync_freq", "must be at least 1");
        if (max_train_iters < 0) throw ConfigError("max_train_iters", "must be non-negative");
        if (hidden_width < 1) throw ConfigError("hidden_width", "must be at least 1");
        if (hidden_layers < 0) throw ConfigError("hidden_layers", "must be non-negative");
    }

    bool operator==(const Hyperparams&) const = default;
};

inline double epsilon_at(std::int64_t iter, const Hyperparams& h) {
    return linear_epsilon(iter, h.epsilon_start, h.epsilon_decay_steps);
}

/// Network input length for a scenario: one-hot action plus observation bits.
inline int encoded_size(int action_count, int segment_len) { return action_count + segment_len; }

/// Writes [one-hot(action), observation] into `out`.
inline void encode_state_into(const AgentState& x, int action_count, Eigen::Ref<Eigen::VectorXd> out) {
    if (x.last_action < 0 || x.last_action >= action_count) throw std::invalid_argument("encode_state: invalid action");
    if (out.size() != action_count + static_cast<Eigen::Index>(x.observation.size())) {
        throw std::invalid_argument("encode_state: observation length mismatch");
    }
    out.setZero();
    out(x.last_action) = 1.0;
    for (std::size_t i = 0; i < x.observation.size(); ++i) {
        out(action_count + static_cast<Eigen::Index>(i)) = x.observation[i];
    }
}

inline Eigen::VectorXd encode_state(const AgentState& x, int action_count, int segment_len) {
    if (static_cast<int>(x.observation.size()) != segment_len) {
        throw std::invalid_argument("encode_state: observation length mismatch");
    }
    Eigen::VectorXd v(encoded_size(action_count, segment_len));
    encode_state_into(x, action_count, v);
    return v;
}

inline AgentState decode_state(std::span<const double> v, int action_count, int segment_len) {
    if (static_cast<int>(v.size()) != encoded_size(action_count, segment_len)) {
        throw std::invalid_argument("decode_state: length mismatch");
    }
    AgentState x;
    int ones = 0;
    for (int a = 0; a < action_count; ++a) {
        if (v[static_cast<std::size_t>(a)] == 1.0) {
            x.last_action = a;
            ++ones;
        }
    }
    if (ones != 1) throw std::invalid_argument("decode_state: action part is not one-hot");
    for (int i = 0; i < segment_len; ++i) {
        x.observation.push_back(v[static_cast<std::size_t>(action_count + i)] != 0.0 ? 1 : 0);
    }
    return x;
}

struct Transition {
    AgentState state;
    int action = 0;
    double reward = 0.0;
    AgentState next;
};

/// Bounded FIFO of transitions; the oldest entry is evicted first.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("ReplayMemory: capacity must be positive");
    }

    void push(Transition t) {
        if (buffer_.size() < capacity_) {
            buffer_.push_back(std::move(t));
        } else {
            buffer_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    /// i-th stored transition, 0 = oldest.
    const Transition& at(std::size_t i) const {
        if (i >= buffer_.size()) throw std::out_of_range("ReplayMemory::at");
        return buffer_[(head_ + i) % buffer_.size()];
    }

    /// `count` positions drawn uniformly with replacement (0 = oldest).
    std::vector<std::size_t> sample(std::size_t count, Rng& rng) const {
        if (buffer_.empty()) throw std::logic_error("ReplayMemory::sample: empty memory");
        std::vector<std::size_t> idx(count);
        for (auto& i : idx) i = rng.below(buffer_.size());
        return idx;
    }

    void clear() {
        buffer_.clear();
        head_ = 0;
    }

    std::size_t size() const { return buffer_.size(); }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::vector<Transition> buffer_;
    std::size_t head_ = 0;
};

/// Greedy action of `net` at `x`; smallest index on ties.
inline int greedy_action(const NetworkParams& net, const AgentState& x, double* max_q = nullptr) {
    const int actions = static_cast<int>(net.output_dim());
    const Eigen::VectorXd q = forward(net, encode_state(x, actions, static_cast<int>(x.observation.size())));
    int best = 0;
    for (int a = 1; a < actions; ++a) {
        if (q(a) > q(best)) best = a;
    }
    if (max_q != nullptr) *max_q = q(best);
    return best;
}

/// Epsilon-greedy: uniform over all actions with probability epsilon.
inline int select_action(const NetworkParams& net, const AgentState& x, double epsilon, Rng& rng,
                         double* max_q = nullptr) {
    const int greedy = greedy_action(net, x, max_q);
    if (rng.uniform() < epsilon) return static_cast<int>(rng.below(static_cast<std::size_t>(net.output_dim())));
    return greedy;
}

/// y_j = r_j + gamma * max_a Qhat(x'_j, a), from the target parameters only.
inline std::vector<double> compute_targets(const NetworkParams& target_net, std::span<const Transition* const> batch,
                                           double gamma) {
    if (batch.empty()) throw std::invalid_argument("compute_targets: empty batch");
    const int actions = static_cast<int>(target_net.output_dim());
    Eigen::MatrixXd next(target_net.input_dim(), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        encode_state_into(batch[j]->next, actions, next.col(static_cast<Eigen::Index>(j)));
    }
    const Eigen::MatrixXd q = forward_batch(target_net, next);
    std::vector<double> y(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
        y[j] = batch[j]->reward + gamma * q.col(static_cast<Eigen::Index>(j)).maxCoeff();
    }
    return y;
}

inline void sync_target(const NetworkParams& online, NetworkParams& target) { target = online; }

struct TrainingTelemetry {
    std::vector<double> loss;   ///< per update
    std::vector<double> max_q;  ///< per update, max_a Q(x_t, a) at the acting state
    std::int64_t updates = 0;
    std::int64_t syncs = 0;
    std::int64_t slots = 0;  ///< environment slots consumed while training
};

/// Q-network, target network, optimizer and replay memory of one learner.
class DqnAgent {
public:
    DqnAgent(const ScenarioConfig& cfg, Hyperparams hyper, Rng& init_rng)
        : hyper_(hyper),
          action_count_(cfg.action_count()),
          segment_len_(cfg.segment_len),
          memory_(static_cast<std::size_t>(hyper.memory_size)) {
        hyper_.validate();
        online_ = init_network(encoded_size(action_count_, segment_len_), hyper_.hidden_width, action_count_, init_rng,
                               hyper_.hidden_layers);
        target_ = online_;
        opt_ = AdamState::for_params(online_);
    }

    /// Wraps trained parameters (e.g. loaded from a checkpoint) for evaluation.
    DqnAgent(NetworkParams online, Hyperparams hyper, int segment_len)
        : hyper_(hyper),
          action_count_(static_cast<int>(online.output_dim())),
          segment_len_(segment_len),
          memory_(static_cast<std::size_t>(std::max<std::int64_t>(hyper.memory_size, 1))),
          online_(std::move(online)),
          target_(online_),
          opt_(AdamState::for_params(online_)) {
        if (online_.input_dim() != encoded_size(action_count_, segment_len_)) {
            throw std::invalid_argument("DqnAgent: network input does not match the scenario");
        }
    }

    /// Epsilon-greedy interaction with `env` until `max_train_iters` updates
    /// have been applied. Starts from `start`, or from an idle first slot.
    /// Returns the agent state reached at the end.
    AgentState train(Environment& env, Rng& rng, std::optional<AgentState> start = std::nullopt) {
        if (env.config().action_count() != action_count_ || env.config().segment_len != segment_len_) {
            throw std::invalid_argument("DqnAgent::train: scenario shape mismatch");
        }
        AgentState x;
        if (start) {
            x = std::move(*start);
        } else {
            auto first = env.step(0);
            x = AgentState{0, std::move(first.observation)};
        }
        telemetry_ = {};
        const auto batch = static_cast<std::size_t>(hyper_.batch_size);
        const auto warmup = static_cast<std::size_t>(hyper_.warmup_size);
        Eigen::MatrixXd inputs(online_.input_dim(), static_cast<Eigen::Index>(batch));
        std::vector<const Transition*> picked(batch);
        std::vector<int> actions(batch);

        while (telemetry_.updates < hyper_.max_train_iters) {
            double max_q = 0.0;
            const int a = select_action(online_, x, epsilon_at(telemetry_.updates, hyper_), rng, &max_q);
            auto out = env.step(a);
            ++telemetry_.slots;
            AgentState next{a, std::move(out.observation)};
            memory_.push(Transition{x, a, out.reward, next});
            x = std::move(next);
            if (memory_.size() < warmup) continue;

            const auto idx = memory_.sample(batch, rng);
            for (std::size_t j = 0; j < batch; ++j) {
                picked[j] = &memory_.at(idx[j]);
                actions[j] = picked[j]->action;
                encode_state_into(picked[j]->state, action_count_, inputs.col(static_cast<Eigen::Index>(j)));
            }
            const auto targets = compute_targets(target_, picked, hyper_.gamma);
            auto lg = loss_and_gradients(online_, inputs, actions, targets);
            if (!std::isfinite(lg.loss) || !lg.grads.all_finite()) {
                throw DivergenceError("DQN diverged at update " + std::to_string(telemetry_.updates) +
                                      ": non-finite loss");
            }
            adam_step(online_, lg.grads, opt_, hyper_.learning_rate);
            ++telemetry_.updates;
            telemetry_.loss.push_back(lg.loss);
            telemetry_.max_q.push_back(max_q);
            if (telemetry_.updates % hyper_.target_sync_freq == 0) {
                sync_target(online_, target_);
                ++telemetry_.syncs;
            }
        }
        ++sessions_;
        return x;
    }

    /// Starts a fresh training session on new dynamics: memory emptied,
    /// exploration schedule restarted, current weights kept.
    AgentState retrain(Environment& env, Rng& rng, AgentState from) {
        memory_.clear();
        return train(env, rng, std::move(from));
    }

    int act(const AgentState& x) const { return greedy_action(online_, x); }

    std::vector<double> q_values(const AgentState& x) const {
        const Eigen::VectorXd q = forward(online_, encode_state(x, action_count_, segment_len_));
        return {q.data(), q.data() + q.size()};
    }

    const NetworkParams& online() const { return online_; }
    const NetworkParams& target() const { return target_; }
    NetworkParams& online_mutable() { return online_; }
    const ReplayMemory& memory() const { return memory_; }
    const TrainingTelemetry& telemetry() const { return telemetry_; }
    const Hyperparams& hyper() const { return hyper_; }
    int training_sessions() const { return sessions_; }

private:
    Hyperparams hyper_;
    int action_count_;
    int segment_len_;
    ReplayMemory memory_;
    NetworkParams online_;
    NetworkParams target_;
    AdamState opt_;
    TrainingTelemetry telemetry_;
    int sessions_ = 0;
};

struct MonitorParams {
    std::int64_t window = 500;
    double threshold = 0.0;  ///< retrain when the windowed reward sum falls below this
};

struct MonitorReport {
    std::vector<double> rewards;               ///< per monitored slot
    std::vector<std::int64_t> retrain_slots;   ///< slot index at which each retrain fired
    std::int64_t retrains() const { return static_cast<std::int64_t>(retrain_slots.size()); }
};

/// Runs the trained agent greedily for `slots` slots and retrains it whenever
/// the reward summed over the last `window` slots drops below the threshold.
/// `before_slot`, when set, is called before each slot (scripted dynamics).
inline MonitorReport monitor_retrain(DqnAgent& agent, Environment& env, std::int64_t slots, const MonitorParams& mp,
                                     Rng& rng,
                                     const std::function<void(std::int64_t, Environment&)>& before_slot = {}) {
    if (mp.window < 1) throw std::invalid_argument("monitor_retrain: window must be at least 1");
    MonitorReport report;
    auto first = env.step(0);
    AgentState x{0, std::move(first.observation)};
    std::deque<double> window;
    double sum = 0.0;
    for (std::int64_t s = 0; s < slots; ++s) {
        if (before_slot) before_slot(s, env);
        const int a = agent.act(x);
        auto out = env.step(a);
        report.rewards.push_back(out.reward);
        window.push_back(out.reward);
        sum += out.reward;
        if (static_cast<std::int64_t>(window.size()) > mp.window) {
            sum -= window.front();
            window.pop_front();
        }
        x = AgentState{a, std::move(out.observation)};
        if (static_cast<std::int64_t>(window.size()) == mp.window && sum < mp.threshold) {
            report.retrain_slots.push_back(s);
            x = agent.retrain(env, rng, std::move(x));
            window.clear();
            sum = 0.0;
        }
    }
    return report;
}

}  // namespace dsa
