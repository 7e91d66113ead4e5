#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsa/random.hpp"
#include "dsa/scenario.hpp"

namespace dsa {

using Bits = std::vector<std::uint8_t>;

/// Joint channel occupancy, one entry per channel: 0 vacant, 1 occupied.
struct SystemState {
    Bits bits;

    std::size_t size() const { return bits.size(); }

    /// "0110..." in channel order; used as a table key and in dumps.
    std::string key() const {
        std::string s(bits.size(), '0');
        for (std::size_t i = 0; i < bits.size(); ++i) s[i] = bits[i] ? '1' : '0';
        return s;
    }

    bool operator==(const SystemState&) const = default;
};

/// Result of acting for one slot.
struct StepOutcome {
    int action = 0;
    Bits observation;
    std::optional<bool> feedback;  ///< ACK; unset when idle
    double reward = 0.0;
};

/// Fills every dependent channel from its parent.
inline void apply_topology(const Topology& topo, SystemState& state) {
    for (const auto& [child, dep] : topo.dependents) {
        const auto parent = state.bits[static_cast<std::size_t>(dep.parent)];
        state.bits[static_cast<std::size_t>(child)] = dep.rho > 0 ? parent : static_cast<std::uint8_t>(1 - parent);
    }
}

inline bool satisfies_topology(const Topology& topo, const SystemState& state) {
    for (const auto& [child, dep] : topo.dependents) {
        const auto parent = state.bits[static_cast<std::size_t>(dep.parent)];
        const auto expect = dep.rho > 0 ? parent : static_cast<std::uint8_t>(1 - parent);
        if (state.bits[static_cast<std::size_t>(child)] != expect) return false;
    }
    return true;
}

/// Builds the full state from the values of the independent channels, given in
/// the order of `topo.independents`.
inline SystemState state_from_parents(const ScenarioConfig& cfg, const Bits& parents) {
    SystemState s{Bits(static_cast<std::size_t>(cfg.n_channels), 0)};
    for (std::size_t i = 0; i < parents.size(); ++i) {
        s.bits[static_cast<std::size_t>(cfg.topology.independents[i])] = parents[i];
    }
    apply_topology(cfg.topology, s);
    return s;
}

/// One slot of the joint chain: independents move per P, dependents follow.
inline SystemState advance(const ScenarioConfig& cfg, const SystemState& state, Rng& rng) {
    SystemState next = state;
    const auto& p = cfg.transition;
    for (int k : cfg.topology.independents) {
        auto& bit = next.bits[static_cast<std::size_t>(k)];
        if (bit == 0) {
            bit = rng.uniform() < p.p00 ? 0 : 1;
        } else {
            bit = rng.uniform() < p.p11 ? 1 : 0;
        }
    }
    apply_topology(cfg.topology, next);
    return next;
}

/// Number of vacant channels in the 1-based segment `segment`, which covers
/// channels segment..segment+C-1.
inline int vacancy_count(const SystemState& state, int segment, int segment_len) {
    const int n = static_cast<int>(state.size());
    if (segment < 1 || segment > n - segment_len + 1) {
        throw std::out_of_range("vacancy_count: segment " + std::to_string(segment) + " out of range");
    }
    int vacant = 0;
    for (int c = segment - 1; c < segment - 1 + segment_len; ++c) vacant += state.bits[static_cast<std::size_t>(c)] == 0;
    return vacant;
}

/// Sub-state of the sensed segment (segment 1 when idle).
inline Bits observe(const SystemState& state, int action, int segment_len) {
    const int segment = action == 0 ? 1 : action;
    const auto first = state.bits.begin() + (segment - 1);
    return Bits(first, first + segment_len);
}

inline bool feasible(const SystemState& state, int demand, int segment_len) {
    const int segments = static_cast<int>(state.size()) - segment_len + 1;
    for (int k = 1; k <= segments; ++k) {
        if (vacancy_count(state, k, segment_len) >= demand) return true;
    }
    return false;
}

/// Reward of transmitting (or idling) in `action` given the realized state.
/// Idle earns 0; a transmission earns +2 on success and -2 on failure.
inline double action_reward(const ScenarioConfig& cfg, const SystemState& next, int action) {
    if (action == 0) return 0.0;
    return vacancy_count(next, action, cfg.segment_len) >= cfg.demand ? 2.0 : -2.0;
}

/// Applies `action` in the slot whose state is `state_next`.
inline StepOutcome execute(const ScenarioConfig& cfg, const SystemState& state_next, int action) {
    if (action < 0 || action >= cfg.action_count()) {
        throw std::out_of_range("execute: invalid action " + std::to_string(action));
    }
    StepOutcome out;
    out.action = action;
    out.observation = observe(state_next, action, cfg.segment_len);
    if (action > 0) {
        const bool ok = vacancy_count(state_next, action, cfg.segment_len) >= cfg.demand;
        out.feedback = ok;
        out.reward = ok ? 2.0 : -2.0;
    }
    return out;
}

/// A running instance of a scenario. Owns the chain state and its random
/// stream; not thread-safe, one simulation loop per instance.
class Environment {
public:
    explicit Environment(ScenarioConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.env_seed) {
        cfg_.validate();
        const double vacant = cfg_.transition.stationary_vacant();
        Bits parents(cfg_.topology.independent_count());
        for (auto& b : parents) b = rng_.uniform() < vacant ? 0 : 1;
        state_ = state_from_parents(cfg_, parents);
    }

    const ScenarioConfig& config() const { return cfg_; }
    const SystemState& state() const { return state_; }

    /// Moves the chain one slot forward and returns the new state.
    const SystemState& advance() {
        state_ = dsa::advance(cfg_, state_, rng_);
        ++slot_;
        return state_;
    }

    /// Advances one slot, then applies `action` in that slot.
    StepOutcome step(int action) {
        if (action < 0 || action >= cfg_.action_count()) {
            throw std::out_of_range("step: invalid action " + std::to_string(action));
        }
        advance();
        return execute(cfg_, state_, action);
    }

    /// Swaps the channel dynamics in place (scripted non-stationary runs).
    void set_transition(const TransitionMatrix& p) {
        p.validate();
        cfg_.transition = p;
    }

    std::uint64_t slot() const { return slot_; }

private:
    ScenarioConfig cfg_;
    Rng rng_;
    SystemState state_;
    std::uint64_t slot_ = 0;
};

}  // namespace dsa
