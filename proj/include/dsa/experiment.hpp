#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dsa/config.hpp"
#include "dsa/dqn.hpp"
#include "dsa/eval.hpp"
#include "dsa/report.hpp"

namespace dsa {

/// Seeds of one (scenario, repetition). Every policy evaluated on the pair
/// sees the same evaluation trajectory.
struct RunSeeds {
    std::uint64_t eval_env;
    std::uint64_t train_env;
    std::uint64_t init;
    std::uint64_t train;

    static RunSeeds derive(std::uint64_t env_seed, int repetition) {
        const auto base = mix_seed(env_seed, static_cast<std::uint64_t>(repetition));
        return {mix_seed(base, 0), mix_seed(base, 1), mix_seed(base, 2), mix_seed(base, 3)};
    }

    /// Decision randomness of a policy (the random baseline).
    std::uint64_t policy(const std::string& name) const { return mix_seed(eval_env, fnv1a(name)); }
};

inline ScenarioConfig with_seed(ScenarioConfig cfg, std::uint64_t env_seed) {
    cfg.env_seed = env_seed;
    return cfg;
}

inline nlohmann::json run_manifest(const std::string& scenario_id, const ScenarioConfig& cfg, const Hyperparams& h,
                                   const RunSeeds& seeds, int repetition) {
    return {{"scenario_id", scenario_id},
            {"scenario", scenario_to_json(cfg)},
            {"scenario_hash", scenario_hash(cfg)},
            {"repetition", repetition},
            {"hyper", hyper_to_json(h)},
            {"seeds",
             {{"eval_env", seeds.eval_env}, {"train_env", seeds.train_env}, {"init", seeds.init}, {"train", seeds.train}}}};
}

/// Trains a DQN for one (scenario, repetition). Run k of `runs` starts from
/// its own environment stream (a distinct initial state); run 0 is returned,
/// the max-Q traces of all runs are averaged.
struct DqnTrainingResult {
    std::unique_ptr<DqnAgent> agent;
    std::vector<double> avg_max_q;
};

inline DqnTrainingResult train_dqn(const ScenarioConfig& cfg, const Hyperparams& hyper, const RunSeeds& seeds,
                                   int runs = 1) {
    DqnTrainingResult result;
    std::vector<std::vector<double>> traces;
    for (int k = 0; k < runs; ++k) {
        Rng init_rng(mix_seed(seeds.init, static_cast<std::uint64_t>(k)));
        Rng train_rng(mix_seed(seeds.train, static_cast<std::uint64_t>(k)));
        Environment env(with_seed(cfg, mix_seed(seeds.train_env, static_cast<std::uint64_t>(k))));
        auto agent = std::make_unique<DqnAgent>(cfg, hyper, init_rng);
        agent->train(env, train_rng);
        traces.push_back(agent->telemetry().max_q);
        if (k == 0) result.agent = std::move(agent);
    }
    result.avg_max_q = avg_max_q(traces);
    return result;
}

inline QLearningAgent train_qlearning(const ScenarioConfig& cfg, const QLearningParams& params, const RunSeeds& seeds) {
    QLearningAgent agent(cfg, params);
    Environment env(with_seed(cfg, seeds.train_env));
    Rng rng(seeds.train);
    agent.train(env, rng);
    return agent;
}

/// One evaluation row: trains the policy if it learns, then evaluates it.
/// Learner artifacts go to `checkpoint_dir` when it is non-empty.
inline MetricsReport run_single(const ExperimentPlan& plan, const ScenarioEntry& scenario, const std::string& policy,
                                int repetition, const std::filesystem::path& checkpoint_dir) {
    MetricsReport report;
    report.scenario_id = scenario.id;
    report.policy = policy;
    report.repetition = repetition;
    try {
        const auto seeds = RunSeeds::derive(scenario.config.env_seed, repetition);
        const std::string stem = scenario.id + "_rep" + std::to_string(repetition) + "_" + policy;
        std::unique_ptr<Policy> pol;
        std::unique_ptr<DqnAgent> dqn;
        std::unique_ptr<QLearningAgent> ql;
        std::vector<double> max_q;
        if (policy == "random") {
            pol = std::make_unique<RandomPolicy>();
        } else if (policy == "improvident") {
            pol = std::make_unique<ImprovidentPolicy>();
        } else if (policy == "genie") {
            pol = std::make_unique<GeniePolicy>();
        } else if (policy == "idle") {
            pol = std::make_unique<IdlePolicy>();
        } else if (policy == "qlearning") {
            ql = std::make_unique<QLearningAgent>(train_qlearning(scenario.config, plan.qlearning, seeds));
            pol = std::make_unique<QTablePolicy>(ql->table());
            if (!checkpoint_dir.empty()) {
                std::ofstream out(checkpoint_dir / (stem + ".qtable"));
                ql->table().save(out);
                if (!out) throw std::runtime_error("cannot write q-table for " + stem);
            }
        } else if (policy == "dqn") {
            auto trained = train_dqn(scenario.config, plan.hyper, seeds, plan.max_q_runs);
            dqn = std::move(trained.agent);
            max_q = std::move(trained.avg_max_q);
            pol = std::make_unique<DqnPolicy>(*dqn);
            if (!checkpoint_dir.empty()) {
                std::ofstream ck(checkpoint_dir / (stem + ".ckpt"), std::ios::binary);
                save_checkpoint(ck, dqn->online());
                std::ofstream mf(checkpoint_dir / (stem + ".manifest.json"));
                mf << run_manifest(scenario.id, scenario.config, plan.hyper, seeds, repetition).dump(2) << '\n';
                if (!ck || !mf) throw std::runtime_error("cannot write checkpoint for " + stem);
            }
        } else {
            throw std::invalid_argument("unknown policy '" + policy + "'");
        }
        Environment env(with_seed(scenario.config, seeds.eval_env));
        Rng policy_rng(seeds.policy(policy));
        report = run_evaluation(*pol, env, plan.eval_slots, plan.gamma, plan.beta, policy_rng);
        report.scenario_id = scenario.id;
        report.policy = policy;
        report.repetition = repetition;
        report.avg_max_q_series = std::move(max_q);
    } catch (const std::exception& e) {
        report.error = e.what();
    }
    return report;
}

struct ExperimentResult {
    std::vector<MetricsReport> reports;  ///< scenario-major, then repetition, then policy (plan order)
    int exit_code = 0;
};

/// Runs every scenario x repetition x policy of the plan, `jobs` at a time.
/// Rows come back in plan order regardless of scheduling.
inline ExperimentResult run_experiment(const ExperimentPlan& plan, int jobs = 1, std::ostream* log = nullptr) {
    plan.validate();
    struct Task {
        const ScenarioEntry* scenario;
        int repetition;
        std::string policy;
    };
    std::vector<Task> tasks;
    for (const auto& s : plan.scenarios) {
        for (int r = 0; r < plan.repetitions; ++r) {
            for (const auto& p : plan.policies) tasks.push_back({&s, r, p});
        }
    }
    const std::filesystem::path out_dir(plan.output_dir);
    const auto checkpoint_dir = out_dir / "checkpoints";
    std::filesystem::create_directories(checkpoint_dir);

    ExperimentResult result;
    result.reports.resize(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& t = tasks[i];
            result.reports[i] = run_single(plan, *t.scenario, t.policy, t.repetition, checkpoint_dir);
            if (log != nullptr) {
                std::lock_guard lock(log_mutex);
                const auto& r = result.reports[i];
                *log << r.scenario_id << " rep " << r.repetition << " " << r.policy << ": "
                     << (r.ok() ? "accuracy " + format_real(r.decision_accuracy()) : "FAILED: " + r.error) << '\n';
            }
        }
    };
    const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    std::vector<std::jthread> pool;
    for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    pool.clear();

    for (const auto& r : result.reports) {
        if (!r.ok()) result.exit_code = 1;
    }
    return result;
}

}  // namespace dsa
