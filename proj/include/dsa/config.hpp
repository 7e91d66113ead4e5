#pragma once

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsa/dqn.hpp"
#include "dsa/error.hpp"
#include "dsa/policies.hpp"
#include "dsa/scenario.hpp"

namespace dsa {

inline const std::vector<std::string>& known_policies() {
    static const std::vector<std::string> names{"random", "improvident", "qlearning", "dqn", "genie", "idle"};
    return names;
}

inline bool is_learner(const std::string& policy) { return policy == "qlearning" || policy == "dqn"; }

inline Hyperparams hyper_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
                                {"profile", "memory_size", "batch_size", "gamma", "learning_rate", "epsilon_start",
                                 "epsilon_decay_steps", "target_sync_freq", "max_train_iters", "warmup_size",
                                 "hidden_width", "hidden_layers"},
                                "hyperparameters");
    Hyperparams h;
    if (j.contains("profile")) {
        const auto profile = detail::require<std::string>(j, "profile");
        if (profile == "reference") {
            h = Hyperparams::reference();
        } else if (profile != "desk") {
            throw ConfigError("profile", "expected \"reference\" or \"desk\"");
        }
    }
    h.memory_size = detail::optional(j, "memory_size", h.memory_size);
    h.batch_size = detail::optional(j, "batch_size", h.batch_size);
    h.gamma = detail::optional(j, "gamma", h.gamma);
    h.learning_rate = detail::optional(j, "learning_rate", h.learning_rate);
    h.epsilon_start = detail::optional(j, "epsilon_start", h.epsilon_start);
    h.epsilon_decay_steps = detail::optional(j, "epsilon_decay_steps", h.epsilon_decay_steps);
    h.target_sync_freq = detail::optional(j, "target_sync_freq", h.target_sync_freq);
    h.max_train_iters = detail::optional(j, "max_train_iters", h.max_train_iters);
    h.warmup_size = detail::optional(j, "warmup_size", h.warmup_size);
    h.hidden_width = detail::optional(j, "hidden_width", h.hidden_width);
    h.hidden_layers = detail::optional(j, "hidden_layers", h.hidden_layers);
    h.validate();
    return h;
}

inline nlohmann::json hyper_to_json(const Hyperparams& h) {
    return {{"memory_size", h.memory_size},
            {"batch_size", h.batch_size},
            {"gamma", h.gamma},
            {"learning_rate", h.learning_rate},
            {"epsilon_start", h.epsilon_start},
            {"epsilon_decay_steps", h.epsilon_decay_steps},
            {"target_sync_freq", h.target_sync_freq},
            {"max_train_iters", h.max_train_iters},
            {"warmup_size", h.warmup_size},
            {"hidden_width", h.hidden_width},
            {"hidden_layers", h.hidden_layers}};
}

inline QLearningParams qlearning_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, {"alpha", "gamma", "train_steps", "epsilon_start", "epsilon_decay_steps", "visit_decay"}, "qlearning");
    QLearningParams q;
    q.alpha = detail::optional(j, "alpha", q.alpha);
    q.gamma = detail::optional(j, "gamma", q.gamma);
    q.train_steps = detail::optional(j, "train_steps", q.train_steps);
    q.epsilon_start = detail::optional(j, "epsilon_start", q.epsilon_start);
    q.epsilon_decay_steps = detail::optional(j, "epsilon_decay_steps", q.epsilon_decay_steps);
    q.visit_decay = detail::optional(j, "visit_decay", q.visit_decay);
    q.validate();
    return q;
}

inline nlohmann::json qlearning_to_json(const QLearningParams& q) {
    return {{"alpha", q.alpha},
            {"gamma", q.gamma},
            {"train_steps", q.train_steps},
            {"epsilon_start", q.epsilon_start},
            {"epsilon_decay_steps", q.epsilon_decay_steps},
            {"visit_decay", q.visit_decay}};
}

struct ScenarioEntry {
    std::string id;
    ScenarioConfig config;
    bool operator==(const ScenarioEntry&) const = default;
};

struct ExperimentPlan {
    std::vector<ScenarioEntry> scenarios;
    std::vector<std::string> policies;
    Hyperparams hyper;
    QLearningParams qlearning;
    std::int64_t eval_slots = 10000;
    int repetitions = 1;
    std::string output_dir = "out";
    double gamma = 0.9;  ///< discount of the reported return
    double beta = 0.5;
    int max_q_runs = 1;  ///< DQN training runs averaged into the max-Q series

    void validate() const {
        if (scenarios.empty()) throw ConfigError("scenarios", "at least one scenario required");
        std::set<std::string> ids;
        for (const auto& s : scenarios) {
            if (s.id.empty()) throw ConfigError("scenarios", "scenario id must be non-empty");
            if (!ids.insert(s.id).second) throw ConfigError("scenarios", "duplicate scenario id '" + s.id + "'");
            s.config.validate();
        }
        if (policies.empty()) throw ConfigError("policies", "at least one policy required");
        std::set<std::string> seen;
        for (const auto& p : policies) {
            const auto& known = known_policies();
            if (std::find(known.begin(), known.end(), p) == known.end()) {
                throw ConfigError("policies", "unknown policy '" + p + "'");
            }
            if (!seen.insert(p).second) throw ConfigError("policies", "duplicate policy '" + p + "'");
        }
        hyper.validate();
        qlearning.validate();
        if (eval_slots < 1) throw ConfigError("eval_slots", "must be at least 1");
        if (repetitions < 1) throw ConfigError("repetitions", "must be at least 1");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma", "must lie in (0, 1)");
        if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta", "must lie in [0, 1]");
        if (max_q_runs < 1) throw ConfigError("max_q_runs", "must be at least 1");
    }

    bool operator==(const ExperimentPlan&) const = default;
};

/// Parses a plan document. Scenario `file` paths are resolved against
/// `base_dir`.
inline ExperimentPlan plan_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    detail::reject_unknown_keys(j,
                                {"scenarios", "policies", "hyper", "hyper_file", "qlearning", "eval_slots",
                                 "repetitions", "output_dir", "gamma", "beta", "max_q_runs"},
                                "plan");
    ExperimentPlan plan;
    const auto scenarios = detail::require<nlohmann::json>(j, "scenarios");
    if (!scenarios.is_array()) throw ConfigError("scenarios", "expected a list");
    for (const auto& s : scenarios) {
        detail::reject_unknown_keys(s, {"id", "file", "scenario"}, "scenario entry");
        ScenarioEntry entry;
        entry.id = detail::require<std::string>(s, "id");
        try {
            if (s.contains("file") == s.contains("scenario")) {
                throw ConfigError("scenarios", "give exactly one of \"file\" or \"scenario\"");
            }
            if (s.contains("file")) {
                auto path = std::filesystem::path(detail::require<std::string>(s, "file"));
                if (path.is_relative()) path = base_dir / path;
                entry.config = load_scenario(path.string());
            } else {
                entry.config = scenario_from_json(s.at("scenario"));
            }
        } catch (const ConfigError& e) {
            throw ConfigError(e.field(), std::string("in scenario '") + entry.id + "': " + e.what());
        }
        plan.scenarios.push_back(std::move(entry));
    }
    const auto policies = detail::require<nlohmann::json>(j, "policies");
    if (!policies.is_array()) throw ConfigError("policies", "expected a list");
    for (const auto& p : policies) {
        if (!p.is_string()) throw ConfigError("policies", "expected policy names");
        plan.policies.push_back(p.get<std::string>());
    }
    if (j.contains("hyper") && j.contains("hyper_file")) throw ConfigError("hyper", "give either hyper or hyper_file");
    if (j.contains("hyper")) plan.hyper = hyper_from_json(j.at("hyper"));
    if (j.contains("hyper_file")) {
        auto path = std::filesystem::path(detail::require<std::string>(j, "hyper_file"));
        if (path.is_relative()) path = base_dir / path;
        plan.hyper = hyper_from_json(read_json_file(path.string()));
    }
    if (j.contains("qlearning")) plan.qlearning = qlearning_from_json(j.at("qlearning"));
    plan.eval_slots = detail::optional(j, "eval_slots", plan.eval_slots);
    plan.repetitions = detail::optional(j, "repetitions", plan.repetitions);
    plan.output_dir = detail::optional(j, "output_dir", plan.output_dir);
    plan.gamma = detail::optional(j, "gamma", plan.hyper.gamma);
    plan.beta = detail::optional(j, "beta", plan.beta);
    plan.max_q_runs = detail::optional(j, "max_q_runs", plan.max_q_runs);
    plan.validate();
    return plan;
}

inline ExperimentPlan load_plan(const std::string& path) {
    return plan_from_json(read_json_file(path), std::filesystem::path(path).parent_path());
}

/// Self-contained form (scenarios inline, every field explicit).
inline nlohmann::json plan_to_json(const ExperimentPlan& plan) {
    nlohmann::json j;
    auto scenarios = nlohmann::json::array();
    for (const auto& s : plan.scenarios) scenarios.push_back({{"id", s.id}, {"scenario", scenario_to_json(s.config)}});
    j["scenarios"] = scenarios;
    j["policies"] = plan.policies;
    j["hyper"] = hyper_to_json(plan.hyper);
    j["qlearning"] = qlearning_to_json(plan.qlearning);
    j["eval_slots"] = plan.eval_slots;
    j["repetitions"] = plan.repetitions;
    j["output_dir"] = plan.output_dir;
    j["gamma"] = plan.gamma;
    j["beta"] = plan.beta;
    j["max_q_runs"] = plan.max_q_runs;
    return j;
}

}  // namespace dsa
