// Experiment driver: train, evaluate and sweep spectrum-access policies.
//
//   dsa train --scenario s.json [--hyper h.json] [--policy dqn|qlearning] [--seed n] [--out dir]
//   dsa eval  --scenario s.json --policy name [--checkpoint file] [--slots n] [--seed n] [--out dir] [--format f]
//   dsa sweep --plan plan.json [--jobs n] [--slots n] [--out dir] [--format f]
//
// Exit codes: 0 all runs ok, 1 a run failed, 2 configuration error.
// DSA_OUT_DIR overrides the output directory unless --out is given.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsa/config.hpp"
#include "dsa/experiment.hpp"
#include "dsa/report.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailed = 1;
constexpr int kExitConfig = 2;

std::string resolve_out(const std::string& flag, const std::string& fallback) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("DSA_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return fallback;
}

struct CommonOptions {
    std::string scenario;
    std::string hyper;
    std::string qlearning;
    std::string policy;
    std::string checkpoint;
    std::string out;
    std::string format = "csv";
    std::optional<std::uint64_t> seed;
    std::int64_t slots = 10000;
    double beta = 0.5;
    std::optional<double> gamma;
};

dsa::Hyperparams load_hyper(const std::string& path) {
    return path.empty() ? dsa::Hyperparams{} : dsa::hyper_from_json(dsa::read_json_file(path));
}

dsa::QLearningParams load_qlearning(const std::string& path) {
    return path.empty() ? dsa::QLearningParams{} : dsa::qlearning_from_json(dsa::read_json_file(path));
}

dsa::ScenarioConfig load_scenario_with_seed(const CommonOptions& o) {
    auto cfg = dsa::load_scenario(o.scenario);
    if (o.seed) cfg.env_seed = *o.seed;
    return cfg;
}

int cmd_train(const CommonOptions& o) {
    const auto cfg = load_scenario_with_seed(o);
    const auto out = fs::path(resolve_out(o.out, "out"));
    fs::create_directories(out);
    const auto seeds = dsa::RunSeeds::derive(cfg.env_seed, 0);
    if (o.policy == "qlearning") {
        const auto agent = dsa::train_qlearning(cfg, load_qlearning(o.qlearning), seeds);
        std::ofstream table(out / "qlearning.qtable");
        agent.table().save(table);
        std::cout << "q-table with " << agent.table().size() << " states written to " << (out / "qlearning.qtable")
                  << '\n';
        return table ? kExitOk : kExitRunFailed;
    }
    if (o.policy != "dqn") throw dsa::ConfigError("policy", "train supports dqn and qlearning");
    const auto hyper = load_hyper(o.hyper);
    try {
        auto trained = dsa::train_dqn(cfg, hyper, seeds);
        std::ofstream ck(out / "dqn.ckpt", std::ios::binary);
        dsa::save_checkpoint(ck, trained.agent->online());
        std::ofstream mf(out / "dqn.manifest.json");
        mf << dsa::run_manifest("cli", cfg, hyper, seeds, 0).dump(2) << '\n';
        const auto& tel = trained.agent->telemetry();
        nlohmann::json telemetry{{"updates", tel.updates}, {"syncs", tel.syncs}, {"slots", tel.slots},
                                 {"loss", tel.loss},       {"max_q", tel.max_q}};
        std::ofstream tf(out / "dqn.telemetry.json");
        tf << telemetry.dump() << '\n';
        std::cout << "trained " << tel.updates << " updates (" << tel.syncs << " target syncs); checkpoint "
                  << (out / "dqn.ckpt") << '\n';
        return ck && mf && tf ? kExitOk : kExitRunFailed;
    } catch (const dsa::DivergenceError& e) {
        std::cerr << "training aborted: " << e.what() << '\n';
        return kExitRunFailed;
    }
}

int cmd_eval(const CommonOptions& o) {
    const auto cfg = load_scenario_with_seed(o);
    const auto seeds = dsa::RunSeeds::derive(cfg.env_seed, 0);
    dsa::MetricsReport report;
    const double gamma = o.gamma.value_or(0.9);
    try {
        std::unique_ptr<dsa::Policy> policy;
        std::unique_ptr<dsa::DqnAgent> dqn;
        std::optional<dsa::QTable> table;
        const auto hyper = load_hyper(o.hyper);
        if (o.policy == "random") {
            policy = std::make_unique<dsa::RandomPolicy>();
        } else if (o.policy == "improvident") {
            policy = std::make_unique<dsa::ImprovidentPolicy>();
        } else if (o.policy == "genie") {
            policy = std::make_unique<dsa::GeniePolicy>();
        } else if (o.policy == "idle") {
            policy = std::make_unique<dsa::IdlePolicy>();
        } else if (o.policy == "dqn") {
            if (!o.checkpoint.empty()) {
                std::ifstream in(o.checkpoint, std::ios::binary);
                if (!in) throw dsa::ConfigError("checkpoint", "cannot open " + o.checkpoint);
                dqn = std::make_unique<dsa::DqnAgent>(dsa::load_checkpoint(in), hyper, cfg.segment_len);
            } else {
                dqn = std::move(dsa::train_dqn(cfg, hyper, seeds).agent);
            }
            policy = std::make_unique<dsa::DqnPolicy>(*dqn);
        } else if (o.policy == "qlearning") {
            if (!o.checkpoint.empty()) {
                std::ifstream in(o.checkpoint);
                if (!in) throw dsa::ConfigError("checkpoint", "cannot open " + o.checkpoint);
                table = dsa::QTable::load(in, cfg.action_count());
            } else {
                table = dsa::train_qlearning(cfg, load_qlearning(o.qlearning), seeds).table();
            }
            policy = std::make_unique<dsa::QTablePolicy>(*table);
        } else {
            throw dsa::ConfigError("policy", "unknown policy '" + o.policy + "'");
        }
        dsa::Environment env(dsa::with_seed(cfg, seeds.eval_env));
        dsa::Rng rng(seeds.policy(o.policy));
        report = dsa::run_evaluation(*policy, env, o.slots, gamma, o.beta, rng);
    } catch (const dsa::ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        report.error = e.what();
    }
    report.scenario_id = fs::path(o.scenario).stem().string();
    report.policy = o.policy;
    const auto out = fs::path(resolve_out(o.out, "out"));
    for (const auto& p : dsa::emit_report({report}, dsa::parse_format(o.format), out)) std::cout << p.string() << '\n';
    if (!report.ok()) {
        std::cerr << "run failed: " << report.error << '\n';
        return kExitRunFailed;
    }
    std::cout << "decision accuracy " << report.decision_accuracy() << ", modified "
              << report.modified_decision_accuracy() << ", interference " << report.interference() << '\n';
    return kExitOk;
}

int cmd_sweep(const std::string& plan_path, int jobs, std::optional<std::int64_t> slots, const std::string& out_flag,
              const std::string& format) {
    auto plan = dsa::load_plan(plan_path);
    if (slots) plan.eval_slots = *slots;
    plan.output_dir = resolve_out(out_flag, plan.output_dir);
    plan.validate();
    const auto fmt = dsa::parse_format(format);
    auto result = dsa::run_experiment(plan, jobs, &std::cout);
    for (const auto& p : dsa::emit_report(result.reports, fmt, plan.output_dir)) std::cout << p.string() << '\n';
    return result.exit_code == 0 ? kExitOk : kExitRunFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic spectrum sensing and aggregation: simulator, agents and evaluation"};
    app.require_subcommand(1);

    CommonOptions train_opts;
    auto* train = app.add_subcommand("train", "Train a learner and write its checkpoint");
    train->add_option("--scenario", train_opts.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    train->add_option("--hyper", train_opts.hyper, "DQN hyperparameter file")->check(CLI::ExistingFile);
    train->add_option("--qlearning", train_opts.qlearning, "Q-learning parameter file")->check(CLI::ExistingFile);
    train_opts.policy = "dqn";
    train->add_option("--policy", train_opts.policy, "dqn or qlearning")->capture_default_str();
    train->add_option("--seed", train_opts.seed, "Override the scenario's env_seed");
    train->add_option("--out", train_opts.out, "Output directory");

    CommonOptions eval_opts;
    auto* eval = app.add_subcommand("eval", "Evaluate one policy on one scenario");
    eval->add_option("--scenario", eval_opts.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    eval->add_option("--policy", eval_opts.policy, "random|improvident|qlearning|dqn|genie|idle")->required();
    eval->add_option("--checkpoint", eval_opts.checkpoint, "Trained DQN checkpoint or Q-table");
    eval->add_option("--hyper", eval_opts.hyper, "DQN hyperparameter file")->check(CLI::ExistingFile);
    eval->add_option("--qlearning", eval_opts.qlearning, "Q-learning parameter file")->check(CLI::ExistingFile);
    eval->add_option("--slots", eval_opts.slots, "Evaluation slots")->capture_default_str();
    eval->add_option("--seed", eval_opts.seed, "Override the scenario's env_seed");
    eval->add_option("--beta", eval_opts.beta, "Weight of conservative idles")->capture_default_str();
    eval->add_option("--gamma", eval_opts.gamma, "Discount of the reported return");
    eval->add_option("--out", eval_opts.out, "Output directory");
    eval->add_option("--format", eval_opts.format, "csv|json|both")->capture_default_str();

    std::string plan_path, sweep_out, sweep_format = "csv";
    int jobs = 1;
    std::optional<std::int64_t> sweep_slots;
    auto* sweep = app.add_subcommand("sweep", "Run every scenario x policy x repetition of a plan");
    sweep->add_option("--plan", plan_path, "Experiment plan file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--jobs", jobs, "Parallel runs")->capture_default_str()->check(CLI::PositiveNumber);
    sweep->add_option("--slots", sweep_slots, "Override eval_slots");
    sweep->add_option("--out", sweep_out, "Output directory");
    sweep->add_option("--format", sweep_format, "csv|json|both")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*train) return cmd_train(train_opts);
        if (*eval) return cmd_eval(eval_opts);
        return cmd_sweep(plan_path, jobs, sweep_slots, sweep_out, sweep_format);
    } catch (const dsa::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRunFailed;
    }
}
