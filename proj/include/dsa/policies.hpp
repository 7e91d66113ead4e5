#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsa/environment.hpp"
#include "dsa/oracles.hpp"
#include "dsa/random.hpp"
#include "dsa/schedule.hpp"

namespace dsa {

/// What the user knows after a slot: the action it took and the bits it
/// sensed. Learners treat this pair as their (surrogate) state.
struct AgentState {
    int last_action = 0;
    Bits observation;

    std::string key() const {
        std::string s = std::to_string(last_action) + ':';
        for (auto b : observation) s += b ? '1' : '0';
        return s;
    }

    bool operator==(const AgentState&) const = default;
};

/// Values closer than this are treated as tied; ties go to the smallest action.
inline constexpr double kTieTolerance = 1e-12;

inline int argmax_low(const std::vector<double>& values) {
    int best = 0;
    for (int a = 1; a < static_cast<int>(values.size()); ++a) {
        if (values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(best)] + kTieTolerance) best = a;
    }
    return best;
}

/// Uniform over the segments; never idles.
inline int random_policy(Rng& rng, const ScenarioConfig& cfg) {
    return 1 + static_cast<int>(rng.below(static_cast<std::size_t>(cfg.segment_count())));
}

/// Expected one-slot reward of every action from `state`.
///
/// Each independent channel moves on its own, and a segment's vacancy count
/// is a sum of per-parent contributions (the parent and its children that
/// fall inside the segment). The count distribution is therefore a
/// convolution over parents, O(i * C) per segment instead of 2^i successors.
inline std::vector<double> improvident_action_values(const ScenarioConfig& cfg, const SystemState& state) {
    const auto& indep = cfg.topology.independents;
    const std::size_t parents = indep.size();
    std::vector<double> vacant_next(parents);
    std::map<int, std::size_t> parent_slot;
    for (std::size_t i = 0; i < parents; ++i) {
        vacant_next[i] = cfg.transition.prob(state.bits[static_cast<std::size_t>(indep[i])], 0);
        parent_slot[indep[i]] = i;
    }

    std::vector<double> values(static_cast<std::size_t>(cfg.action_count()), 0.0);
    std::vector<int> if_vacant(parents), if_occupied(parents);
    std::vector<double> dist;
    for (int k = 1; k <= cfg.segment_count(); ++k) {
        std::fill(if_vacant.begin(), if_vacant.end(), 0);
        std::fill(if_occupied.begin(), if_occupied.end(), 0);
        for (int c = k - 1; c < k - 1 + cfg.segment_len; ++c) {
            if (const auto p = parent_slot.find(c); p != parent_slot.end()) {
                ++if_vacant[p->second];
            } else {
                const auto& dep = cfg.topology.dependents.at(c);
                const auto slot = parent_slot.at(dep.parent);
                ++(dep.rho > 0 ? if_vacant : if_occupied)[slot];
            }
        }
        dist.assign(static_cast<std::size_t>(cfg.segment_len) + 1, 0.0);
        dist[0] = 1.0;
        for (std::size_t i = 0; i < parents; ++i) {
            if (if_vacant[i] == 0 && if_occupied[i] == 0) continue;
            std::vector<double> next(dist.size(), 0.0);
            for (std::size_t v = 0; v < dist.size(); ++v) {
                if (dist[v] == 0.0) continue;
                next[v + static_cast<std::size_t>(if_vacant[i])] += dist[v] * vacant_next[i];
                next[v + static_cast<std::size_t>(if_occupied[i])] += dist[v] * (1.0 - vacant_next[i]);
            }
            dist.swap(next);
        }
        double success = 0.0;
        for (int v = cfg.demand; v <= cfg.segment_len; ++v) success += dist[static_cast<std::size_t>(v)];
        values[static_cast<std::size_t>(k)] = 4.0 * success - 2.0;
    }
    return values;
}

/// One-step lookahead with the true current state and the true dynamics.
inline int improvident_policy(const ScenarioConfig& cfg, const SystemState& state) {
    return argmax_low(improvident_action_values(cfg, state));
}

/// Greedy lookup; unseen states pick idle.
inline int ql_select(const QTable& table, const std::string& key) { return table.argmax(key); }

/// q(x, a) += alpha * (r + gamma * max_a' q(x', a') - q(x, a)). Returns the new value.
inline double ql_update(QTable& table, const std::string& key, int action, double reward, const std::string& next_key,
                        double alpha, double gamma) {
    const double target = reward + gamma * table.max(next_key);
    auto& row = table.row(key);
    auto& q = row[static_cast<std::size_t>(action)];
    q += alpha * (target - q);
    return q;
}

struct QLearningParams {
    double alpha = 0.1;
    double gamma = 0.9;
    std::int64_t train_steps = 100000;
    double epsilon_start = 0.9;
    std::int64_t epsilon_decay_steps = 10000;
    /// Use alpha = 1 / (1 + visits(x, a)) instead of the fixed rate.
    bool visit_decay = false;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "must lie in (0, 1]");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma", "must lie in (0, 1)");
        if (train_steps < 0) throw ConfigError("train_steps", "must be non-negative");
        if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) throw ConfigError("epsilon_start", "must lie in [0, 1]");
        if (epsilon_decay_steps < 0) throw ConfigError("epsilon_decay_steps", "must be non-negative");
    }

    bool operator==(const QLearningParams&) const = default;
};

/// Tabular learner keyed on (last action, observation).
class QLearningAgent {
public:
    explicit QLearningAgent(const ScenarioConfig& cfg, QLearningParams params = {})
        : params_(params), table_(cfg.action_count()) {
        params_.validate();
    }

    QLearningAgent(QLearningParams params, QTable table) : params_(params), table_(std::move(table)) {}

    /// Online epsilon-greedy interaction with `env` for `train_steps` slots.
    void train(Environment& env, Rng& rng) {
        const int actions = env.config().action_count();
        auto first = env.step(0);
        AgentState x{0, std::move(first.observation)};
        for (std::int64_t t = 0; t < params_.train_steps; ++t) {
            const double eps = linear_epsilon(t, params_.epsilon_start, params_.epsilon_decay_steps);
            const std::string key = x.key();
            int action;
            if (rng.uniform() < eps) {
                action = static_cast<int>(rng.below(static_cast<std::size_t>(actions)));
            } else {
                action = ql_select(table_, key);
            }
            auto out = env.step(action);
            AgentState next{action, std::move(out.observation)};
            double alpha = params_.alpha;
            if (params_.visit_decay) {
                auto& n = visits_[key + '#' + std::to_string(action)];
                alpha = 1.0 / (1.0 + static_cast<double>(n));
                ++n;
            }
            ql_update(table_, key, action, out.reward, next.key(), alpha, params_.gamma);
            x = std::move(next);
        }
    }

    int act(const AgentState& x) const { return ql_select(table_, x.key()); }

    const QTable& table() const { return table_; }
    const QLearningParams& params() const { return params_; }

private:
    QLearningParams params_;
    QTable table_;
    std::map<std::string, std::int64_t> visits_;
};

}  // namespace dsa
