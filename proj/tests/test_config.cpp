#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dsa/config.hpp"

#ifndef DSA_SCENARIO_DIR
#error "DSA_SCENARIO_DIR must point at the shipped scenarios"
#endif

using namespace dsa;
using nlohmann::json;

namespace {

const std::filesystem::path kScenarios{DSA_SCENARIO_DIR};

json inline_plan() {
    return json::parse(R"({
        "scenarios": [
            {"id": "tiny", "scenario": {"n_channels": 6, "segment_len": 3, "demand": 2, "p00": 0.9, "p11": 0.8,
                                         "independents": 3, "rho": -1, "topology_seed": 2, "env_seed": 7}},
            {"id": "pair", "scenario": {"n_channels": 4, "segment_len": 2, "demand": 1, "p00": 0.5, "p11": 0.5,
                                         "independents": [1, 2], "dependents": [[3, 1, 1], [4, 2, -1]],
                                         "env_seed": 3}}
        ],
        "policies": ["random", "genie"],
        "hyper": {"max_train_iters": 100, "warmup_size": 50, "memory_size": 500},
        "qlearning": {"train_steps": 500, "visit_decay": true},
        "eval_slots": 300,
        "repetitions": 2,
        "beta": 0.25,
        "output_dir": "somewhere"
    })");
}

std::string plan_error_field(const json& j) {
    try {
        plan_from_json(j);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "";
}

}  // namespace

TEST(Config, ReferencePlanParses) {
    const auto plan = load_plan((kScenarios / "reference_plan.json").string());
    ASSERT_EQ(plan.scenarios.size(), 1u);
    const auto& cfg = plan.scenarios[0].config;
    EXPECT_EQ(cfg.n_channels, 24);
    EXPECT_EQ(cfg.segment_len, 8);
    EXPECT_EQ(cfg.demand, 4);
    EXPECT_EQ(plan.hyper.memory_size, 300000);
    EXPECT_EQ(plan.hyper.warmup_size, 1000);
    EXPECT_EQ(plan.hyper.batch_size, 32);
    EXPECT_EQ(plan.hyper.target_sync_freq, 200);
    EXPECT_DOUBLE_EQ(plan.hyper.gamma, 0.9);
    EXPECT_DOUBLE_EQ(plan.hyper.learning_rate, 0.001);
    EXPECT_EQ(plan.eval_slots, 10000);
}

TEST(Config, ShippedFilesParse) {
    for (const char* name : {"scenario1.json", "scenario2.json", "scenario3.json", "scenario4.json",
                             "high_randomness.json"}) {
        const auto cfg = load_scenario((kScenarios / name).string());
        EXPECT_EQ(cfg.n_channels, 24) << name;
        EXPECT_EQ(cfg.segment_len, 8) << name;
        EXPECT_EQ(cfg.demand, 4) << name;
    }
    const auto suite = load_plan((kScenarios / "suite_plan.json").string());
    EXPECT_EQ(suite.scenarios.size(), 5u);
}

TEST(Config, ProfileKeyPicksBaseValues) {
    EXPECT_EQ(hyper_from_json(json::parse(R"({"profile": "reference"})")), Hyperparams::reference());
    EXPECT_EQ(hyper_from_json(json::parse(R"({"profile": "desk"})")), Hyperparams::desk());
    EXPECT_EQ(hyper_from_json(json::object()), Hyperparams{});
    const auto h = hyper_from_json(json::parse(R"({"profile": "reference", "memory_size": 5000})"));
    EXPECT_EQ(h.memory_size, 5000);
    EXPECT_THROW(hyper_from_json(json::parse(R"({"profile": "huge"})")), ConfigError);
}

TEST(Config, DemandAboveCapacityNamesDemand) {
    auto j = inline_plan();
    j["scenarios"][0]["scenario"]["demand"] = 4;
    EXPECT_EQ(plan_error_field(j), "demand");
}

TEST(Config, ErrorsNameTheField) {
    auto j = inline_plan();
    j["policies"] = json::array({"random", "oracle"});
    EXPECT_EQ(plan_error_field(j), "policies");

    j = inline_plan();
    j["policies"] = json::array({"random", "random"});
    EXPECT_EQ(plan_error_field(j), "policies");

    j = inline_plan();
    j["scenarios"][1]["id"] = "tiny";
    EXPECT_EQ(plan_error_field(j), "scenarios");

    j = inline_plan();
    j["repetitions"] = 0;
    EXPECT_EQ(plan_error_field(j), "repetitions");

    j = inline_plan();
    j["hyper"]["batch_size"] = 64;
    EXPECT_EQ(plan_error_field(j), "warmup_size");

    j = inline_plan();
    j["hyper"]["learning_rat"] = 0.1;
    EXPECT_EQ(plan_error_field(j), "learning_rat");

    j = inline_plan();
    j["qlearning"]["alpha"] = 2.0;
    EXPECT_EQ(plan_error_field(j), "alpha");

    j = inline_plan();
    j.erase("policies");
    EXPECT_EQ(plan_error_field(j), "policies");

    j = inline_plan();
    j["scenarios"][0]["file"] = "x.json";
    EXPECT_EQ(plan_error_field(j), "scenarios");

    j = inline_plan();
    j["beta"] = 1.5;
    EXPECT_EQ(plan_error_field(j), "beta");
}

TEST(Config, PlanRoundTrip) {
    const auto plan = plan_from_json(inline_plan());
    EXPECT_EQ(plan.repetitions, 2);
    EXPECT_EQ(plan.hyper.max_train_iters, 100);
    EXPECT_TRUE(plan.qlearning.visit_decay);
    EXPECT_DOUBLE_EQ(plan.beta, 0.25);
    const auto again = plan_from_json(plan_to_json(plan));
    EXPECT_EQ(again, plan);
    // The emitted form is self-contained and stable.
    EXPECT_EQ(plan_to_json(again).dump(), plan_to_json(plan).dump());
}

TEST(Config, FilePathsResolveAgainstThePlan) {
    const auto dir = std::filesystem::temp_directory_path() / "dsa_test_config";
    std::filesystem::create_directories(dir / "sub");
    std::filesystem::copy_file(kScenarios / "scenario3.json", dir / "sub" / "s.json",
                               std::filesystem::copy_options::overwrite_existing);
    {
        std::ofstream(dir / "plan.json") << R"({"scenarios": [{"id": "s", "file": "sub/s.json"}],
                                                "policies": ["improvident"]})";
        std::ofstream(dir / "bad.json") << R"({"scenarios": [{"id": "s", "file": "sub/missing.json"}],
                                               "policies": ["improvident"]})";
    }
    const auto plan = load_plan((dir / "plan.json").string());
    EXPECT_EQ(plan.scenarios[0].config, load_scenario((kScenarios / "scenario3.json").string()));
    EXPECT_THROW(load_plan((dir / "bad.json").string()), ConfigError);
    std::filesystem::remove_all(dir);
}
