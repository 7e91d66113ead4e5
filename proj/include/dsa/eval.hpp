#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsa/dqn.hpp"
#include "dsa/environment.hpp"
#include "dsa/oracles.hpp"
#include "dsa/policies.hpp"

namespace dsa {

enum class Situation {
    RightIdle = 0,     ///< idle, and no segment could have succeeded
    Conservative = 1,  ///< idle, although some segment would have succeeded
    Success = 2,
    Failure = 3,
};

inline const char* situation_name(Situation s) {
    switch (s) {
        case Situation::RightIdle: return "right_idle";
        case Situation::Conservative: return "conservative";
        case Situation::Success: return "success";
        case Situation::Failure: return "failure";
    }
    return "?";
}

inline Situation classify_step(int action, std::optional<bool> feedback, bool feasible_next) {
    if (action == 0) return feasible_next ? Situation::Conservative : Situation::RightIdle;
    if (!feedback) throw std::invalid_argument("classify_step: transmission without feedback");
    return *feedback ? Situation::Success : Situation::Failure;
}

struct MetricsReport {
    std::string scenario_id;
    std::string policy;
    int repetition = 0;
    std::int64_t slots = 0;
    std::array<std::int64_t, 4> counts{};  ///< indexed by Situation
    double beta = 0.5;
    double gamma = 0.9;
    double discounted_return = 0.0;
    std::vector<double> return_series;     ///< running discounted return after each slot
    std::vector<double> avg_max_q_series;  ///< training telemetry, learners only
    double seconds_per_decision = 0.0;
    std::string error;  ///< non-empty when the run aborted

    std::int64_t count(Situation s) const { return counts[static_cast<std::size_t>(s)]; }
    bool ok() const { return error.empty(); }

    double rate(Situation s) const {
        return slots > 0 ? static_cast<double>(count(s)) / static_cast<double>(slots) : 0.0;
    }

    /// Right idles and successes over all slots.
    double decision_accuracy() const {
        if (slots == 0) return 0.0;
        return static_cast<double>(count(Situation::RightIdle) + count(Situation::Success)) / static_cast<double>(slots);
    }

    /// Decision accuracy with conservative idles credited at weight beta.
    double modified_decision_accuracy() const {
        if (slots == 0) return 0.0;
        return (static_cast<double>(count(Situation::RightIdle) + count(Situation::Success)) +
                beta * static_cast<double>(count(Situation::Conservative))) /
               static_cast<double>(slots);
    }

    /// Failed transmissions over all slots.
    double interference() const { return rate(Situation::Failure); }
};

/// Everything a policy may look at when choosing the next action. Learners
/// use only `agent`; the model-based and clairvoyant baselines also read the
/// true states.
struct DecisionContext {
    const ScenarioConfig& config;
    const AgentState& agent;
    const SystemState& current;
    const SystemState& next;
    Rng& rng;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual int act(const DecisionContext& ctx) = 0;
};

class RandomPolicy final : public Policy {
public:
    std::string name() const override { return "random"; }
    int act(const DecisionContext& ctx) override { return random_policy(ctx.rng, ctx.config); }
};

class ImprovidentPolicy final : public Policy {
public:
    std::string name() const override { return "improvident"; }
    int act(const DecisionContext& ctx) override { return improvident_policy(ctx.config, ctx.current); }
};

class GeniePolicy final : public Policy {
public:
    std::string name() const override { return "genie"; }
    int act(const DecisionContext& ctx) override { return genie_action(ctx.config, ctx.next); }
};

class IdlePolicy final : public Policy {
public:
    std::string name() const override { return "idle"; }
    int act(const DecisionContext&) override { return 0; }
};

class QTablePolicy final : public Policy {
public:
    explicit QTablePolicy(const QTable& table) : table_(table) {}
    std::string name() const override { return "qlearning"; }
    int act(const DecisionContext& ctx) override { return ql_select(table_, ctx.agent.key()); }

private:
    const QTable& table_;
};

class DqnPolicy final : public Policy {
public:
    explicit DqnPolicy(const DqnAgent& agent) : agent_(agent) {}
    std::string name() const override { return "dqn"; }
    int act(const DecisionContext& ctx) override { return agent_.act(ctx.agent); }

private:
    const DqnAgent& agent_;
};

/// Adapter for ad-hoc policies in tests and tools.
class FunctionPolicy final : public Policy {
public:
    FunctionPolicy(std::string name, std::function<int(const DecisionContext&)> fn)
        : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string name() const override { return name_; }
    int act(const DecisionContext& ctx) override { return fn_(ctx); }

private:
    std::string name_;
    std::function<int(const DecisionContext&)> fn_;
};

/// Runs `policy` for `slots` slots on `env` and tallies the four situations.
/// The first slot is an idle probe that yields the initial observation and is
/// not counted.
inline MetricsReport run_evaluation(Policy& policy, Environment& env, std::int64_t slots, double gamma, double beta,
                                    Rng& policy_rng) {
    if (slots < 1) throw std::invalid_argument("run_evaluation: slots must be at least 1");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("run_evaluation: beta must lie in [0, 1]");
    const auto& cfg = env.config();
    MetricsReport report;
    report.policy = policy.name();
    report.slots = slots;
    report.beta = beta;
    report.gamma = gamma;
    report.return_series.reserve(static_cast<std::size_t>(slots));

    auto first = env.step(0);
    AgentState x{0, std::move(first.observation)};
    double discount = 1.0;
    std::chrono::steady_clock::duration decide{};
    for (std::int64_t t = 0; t < slots; ++t) {
        const SystemState current = env.state();
        const SystemState& next = env.advance();
        const auto t0 = std::chrono::steady_clock::now();
        const int a = policy.act(DecisionContext{cfg, x, current, next, policy_rng});
        decide += std::chrono::steady_clock::now() - t0;
        auto out = execute(cfg, next, a);
        const auto situation = classify_step(a, out.feedback, feasible(next, cfg.demand, cfg.segment_len));
        ++report.counts[static_cast<std::size_t>(situation)];
        report.discounted_return += discount * out.reward;
        report.return_series.push_back(report.discounted_return);
        discount *= gamma;
        x = AgentState{a, std::move(out.observation)};
    }
    report.seconds_per_decision = std::chrono::duration<double>(decide).count() / static_cast<double>(slots);
    return report;
}

/// Pointwise mean of per-iteration max-Q traces from independent runs.
inline std::vector<double> avg_max_q(const std::vector<std::vector<double>>& runs) {
    if (runs.empty()) throw std::invalid_argument("avg_max_q: no runs");
    const std::size_t len = runs.front().size();
    std::vector<double> mean(len, 0.0);
    for (const auto& r : runs) {
        if (r.size() != len) throw std::invalid_argument("avg_max_q: runs differ in length");
        for (std::size_t i = 0; i < len; ++i) mean[i] += r[i];
    }
    for (auto& m : mean) m /= static_cast<double>(runs.size());
    return mean;
}

/// Trailing moving average; the first window-1 entries average what is available.
inline std::vector<double> moving_average(const std::vector<double>& series, std::size_t window) {
    if (window == 0) throw std::invalid_argument("moving_average: window must be positive");
    std::vector<double> out(series.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        sum += series[i];
        if (i >= window) sum -= series[i - window];
        out[i] = sum / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

}  // namespace dsa
