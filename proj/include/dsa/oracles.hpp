#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsa/environment.hpp"

namespace dsa {

/// Lookup table of action values keyed by a state string. Absent entries read
/// as zero. Keys are kept ordered so dumps are stable.
class QTable {
public:
    explicit QTable(int action_count = 0) : action_count_(action_count) {}

    int action_count() const { return action_count_; }
    std::size_t size() const { return rows_.size(); }
    bool contains(const std::string& key) const { return rows_.contains(key); }

    double get(const std::string& key, int action) const {
        const auto it = rows_.find(key);
        return it == rows_.end() ? 0.0 : it->second[static_cast<std::size_t>(action)];
    }

    void set(const std::string& key, int action, double value) { row(key)[static_cast<std::size_t>(action)] = value; }

    std::vector<double>& row(const std::string& key) {
        auto [it, inserted] = rows_.try_emplace(key);
        if (inserted) it->second.assign(static_cast<std::size_t>(action_count_), 0.0);
        return it->second;
    }

    /// Greedy action; smallest index on ties.
    int argmax(const std::string& key) const {
        const auto it = rows_.find(key);
        if (it == rows_.end()) return 0;
        const auto& r = it->second;
        return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }

    double max(const std::string& key) const {
        const auto it = rows_.find(key);
        if (it == rows_.end()) return 0.0;
        return *std::max_element(it->second.begin(), it->second.end());
    }

    const std::map<std::string, std::vector<double>>& rows() const { return rows_; }

    /// One line per entry: "<state-bits> <action> <value>".
    void save(std::ostream& out) const {
        const auto old = out.precision(17);
        for (const auto& [key, r] : rows_) {
            for (std::size_t a = 0; a < r.size(); ++a) out << key << ' ' << a << ' ' << r[a] << '\n';
        }
        out.precision(old);
    }

    static QTable load(std::istream& in, int action_count) {
        QTable t(action_count);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string key;
            int action = -1;
            double value = 0.0;
            if (!(ls >> key >> action >> value) || action < 0 || action >= action_count) {
                throw std::runtime_error("QTable::load: malformed line " + std::to_string(lineno));
            }
            t.set(key, action, value);
        }
        return t;
    }

    bool operator==(const QTable&) const = default;

private:
    int action_count_;
    std::map<std::string, std::vector<double>> rows_;
};

/// Largest independent-channel count the enumeration oracles accept.
inline constexpr std::size_t kMaxEnumeratedParents = 20;

struct WeightedState {
    SystemState state;
    double probability;
};

/// Every successor of `state` with its probability: all 2^i configurations of
/// the independent channels, each mapped through the topology.
inline std::vector<WeightedState> successor_distribution(const ScenarioConfig& cfg, const SystemState& state) {
    const auto& indep = cfg.topology.independents;
    if (indep.size() > kMaxEnumeratedParents) {
        throw std::length_error("successor_distribution: more than 20 independent channels");
    }
    const std::size_t count = std::size_t{1} << indep.size();
    std::vector<WeightedState> out;
    out.reserve(count);
    Bits parents(indep.size());
    for (std::size_t mask = 0; mask < count; ++mask) {
        double prob = 1.0;
        for (std::size_t i = 0; i < indep.size(); ++i) {
            parents[i] = static_cast<std::uint8_t>((mask >> i) & 1U);
            prob *= cfg.transition.prob(state.bits[static_cast<std::size_t>(indep[i])], parents[i]);
        }
        out.push_back({state_from_parents(cfg, parents), prob});
    }
    return out;
}

/// Every reachable state (one per independent-channel configuration).
inline std::vector<SystemState> enumerate_states(const ScenarioConfig& cfg) {
    const auto& indep = cfg.topology.independents;
    if (indep.size() > kMaxEnumeratedParents) {
        throw std::length_error("enumerate_states: more than 20 independent channels");
    }
    std::vector<SystemState> out;
    Bits parents(indep.size());
    for (std::size_t mask = 0; mask < (std::size_t{1} << indep.size()); ++mask) {
        for (std::size_t i = 0; i < indep.size(); ++i) parents[i] = static_cast<std::uint8_t>((mask >> i) & 1U);
        out.push_back(state_from_parents(cfg, parents));
    }
    return out;
}

/// Expected one-slot reward of `action` from `state`, by brute-force
/// enumeration of the successor distribution. The reward is judged from the
/// realized segment vacancy, not from an ACK.
inline double expected_action_reward(const ScenarioConfig& cfg, const SystemState& state, int action) {
    if (action < 0 || action >= cfg.action_count()) throw std::out_of_range("expected_action_reward: invalid action");
    if (action == 0) return 0.0;
    double total = 0.0;
    for (const auto& [next, p] : successor_distribution(cfg, state)) total += p * action_reward(cfg, next, action);
    return total;
}

/// Clairvoyant baseline: the lowest segment that satisfies the demand in the
/// realized next state, or idle when none does.
inline int genie_action(const ScenarioConfig& cfg, const SystemState& state_next) {
    for (int k = 1; k <= cfg.segment_count(); ++k) {
        if (vacancy_count(state_next, k, cfg.segment_len) >= cfg.demand) return k;
    }
    return 0;
}

/// Exact per-action decision accuracy when the next state is drawn from the
/// stationary distribution independently of the decision: entry 0 is the
/// probability that no segment is feasible, entry k the probability that
/// segment k meets the demand.
inline std::vector<double> stationary_action_accuracy(const ScenarioConfig& cfg) {
    const double vacant = cfg.transition.stationary_vacant();
    std::vector<double> acc(static_cast<std::size_t>(cfg.action_count()), 0.0);
    const auto states = enumerate_states(cfg);
    for (std::size_t mask = 0; mask < states.size(); ++mask) {
        double prob = 1.0;
        for (std::size_t i = 0; i < cfg.topology.independents.size(); ++i) {
            prob *= ((mask >> i) & 1U) ? 1.0 - vacant : vacant;
        }
        const auto& s = states[mask];
        if (!feasible(s, cfg.demand, cfg.segment_len)) acc[0] += prob;
        for (int k = 1; k <= cfg.segment_count(); ++k) {
            if (vacancy_count(s, k, cfg.segment_len) >= cfg.demand) acc[static_cast<std::size_t>(k)] += prob;
        }
    }
    return acc;
}

struct ValueIterationResult {
    QTable q;
    double residual = 0.0;
    int iterations = 0;
};

/// Optimal action values of the fully observed chain (the agent sees the
/// whole state) by synchronous value iteration. Stops once the sup-norm
/// Bellman residual is at most `tol`.
inline ValueIterationResult value_iteration(const ScenarioConfig& cfg, double gamma, double tol,
                                            int max_iterations = 100000) {
    if (cfg.topology.independent_count() > 12) throw std::length_error("value_iteration: more than 12 independent channels");
    const auto states = enumerate_states(cfg);
    const std::size_t n = states.size();
    const auto actions = static_cast<std::size_t>(cfg.action_count());

    // Transition matrix over the enumerated states; successor order matches
    // the enumeration order, so index = mask.
    std::vector<std::vector<double>> trans(n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto succ = successor_distribution(cfg, states[s]);
        trans[s].resize(n);
        for (std::size_t t = 0; t < n; ++t) trans[s][t] = succ[t].probability;
    }
    std::vector<std::vector<double>> reward(n, std::vector<double>(actions));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t a = 0; a < actions; ++a) reward[t][a] = action_reward(cfg, states[t], static_cast<int>(a));
    }

    std::vector<std::vector<double>> q(n, std::vector<double>(actions, 0.0));
    std::vector<double> v(n, 0.0);
    ValueIterationResult result;
    for (int it = 1; it <= max_iterations; ++it) {
        double residual = 0.0;
        auto next = q;
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t a = 0; a < actions; ++a) {
                double acc = 0.0;
                for (std::size_t t = 0; t < n; ++t) acc += trans[s][t] * (reward[t][a] + gamma * v[t]);
                residual = std::max(residual, std::abs(acc - q[s][a]));
                next[s][a] = acc;
            }
        }
        q.swap(next);
        for (std::size_t s = 0; s < n; ++s) v[s] = *std::max_element(q[s].begin(), q[s].end());
        result.iterations = it;
        result.residual = residual;
        if (!std::isfinite(residual)) break;
        if (residual <= tol) {
            result.q = QTable(cfg.action_count());
            for (std::size_t s = 0; s < n; ++s) result.q.row(states[s].key()) = q[s];
            return result;
        }
    }
    throw std::runtime_error("value_iteration: no convergence within iteration cap (is gamma < 1?)");
}

}  // namespace dsa
