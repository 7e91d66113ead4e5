#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dsa/scenario.hpp"

using namespace dsa;
using nlohmann::json;

namespace {

json explicit_scenario() {
    return json::parse(R"({
        "n_channels": 6, "segment_len": 3, "demand": 2,
        "p00": 0.9, "p11": 0.8,
        "independents": [1, 4],
        "dependents": [[2, 1, 1], [3, 1, -1], [5, 4, 1], [6, 4, -1]],
        "env_seed": 5
    })");
}

std::string field_of(const json& j) {
    try {
        scenario_from_json(j);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "";
}

}  // namespace

TEST(Scenario, ExplicitTopologyUsesOneBasedIndices) {
    const auto cfg = scenario_from_json(explicit_scenario());
    EXPECT_EQ(cfg.n_channels, 6);
    EXPECT_EQ(cfg.segment_len, 3);
    EXPECT_EQ(cfg.demand, 2);
    EXPECT_DOUBLE_EQ(cfg.transition.p00, 0.9);
    EXPECT_DOUBLE_EQ(cfg.transition.p01, 1.0 - 0.9);
    EXPECT_DOUBLE_EQ(cfg.transition.p10, 1.0 - 0.8);
    EXPECT_DOUBLE_EQ(cfg.transition.p11, 0.8);
    EXPECT_EQ(cfg.topology.independents, (std::vector<int>{0, 3}));
    EXPECT_EQ(cfg.topology.dependents.at(2), (Dependent{0, -1}));
    EXPECT_EQ(cfg.topology.dependents.at(5), (Dependent{3, -1}));
    EXPECT_EQ(cfg.env_seed, 5u);
}

TEST(Scenario, GeneratedTopologyIsDeterministic) {
    auto j = json::parse(R"({"n_channels": 24, "segment_len": 8, "demand": 4, "p00": 0.95, "p11": 0.95,
                             "independents": 4, "rho": -1, "topology_seed": 9, "env_seed": 1})");
    const auto a = scenario_from_json(j);
    const auto b = scenario_from_json(j);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.topology.independent_count(), 4u);
    EXPECT_EQ(a.topology.dependents.size(), 20u);
    for (const auto& [child, dep] : a.topology.dependents) EXPECT_EQ(dep.rho, -1);
    j["topology_seed"] = 10;
    EXPECT_NE(scenario_from_json(j).topology, a.topology);
}

TEST(Scenario, RoundTripThroughJson) {
    for (const auto& j : {explicit_scenario(),
                          json::parse(R"({"n_channels": 24, "segment_len": 8, "demand": 4, "p00": 0.5, "p11": 0.5,
                                          "independents": 6, "rho": 1, "topology_seed": 4, "env_seed": 77})")}) {
        const auto cfg = scenario_from_json(j);
        const auto again = scenario_from_json(scenario_to_json(cfg));
        EXPECT_EQ(cfg, again);
        EXPECT_EQ(scenario_hash(cfg), scenario_hash(again));
    }
}

TEST(Scenario, HashSeesEveryField) {
    const auto cfg = scenario_from_json(explicit_scenario());
    auto other = cfg;
    other.env_seed += 1;
    EXPECT_NE(scenario_hash(cfg), scenario_hash(other));
    other = cfg;
    other.topology.dependents[1].rho = -1;
    EXPECT_NE(scenario_hash(cfg), scenario_hash(other));
}

TEST(Scenario, ErrorsNameTheField) {
    auto j = explicit_scenario();
    j["demand"] = 4;
    EXPECT_EQ(field_of(j), "demand");

    j = explicit_scenario();
    j.erase("segment_len");
    EXPECT_EQ(field_of(j), "segment_len");

    j = explicit_scenario();
    j["colour"] = "blue";
    EXPECT_EQ(field_of(j), "colour");

    j = explicit_scenario();
    j["p00"] = 1.5;
    EXPECT_EQ(field_of(j), "transition");

    j = explicit_scenario();
    j["dependents"].push_back({2, 4, 1});
    EXPECT_EQ(field_of(j), "dependents");

    j = explicit_scenario();
    j["dependents"] = json::array({{2, 1, 1}});
    EXPECT_EQ(field_of(j), "dependents");  // channels left uncovered

    j = explicit_scenario();
    j["independents"] = "four";
    EXPECT_EQ(field_of(j), "independents");

    j = explicit_scenario();
    j["independents"] = 2;
    j.erase("dependents");
    EXPECT_EQ(field_of(j), "rho");

    j["rho"] = 0;
    EXPECT_EQ(field_of(j), "rho");

    j = explicit_scenario();
    j["rho"] = 1;
    EXPECT_EQ(field_of(j), "rho");

    j = explicit_scenario();
    j["n_channels"] = "six";
    EXPECT_EQ(field_of(j), "n_channels");
}

TEST(Scenario, FilesAreReadAndBadFilesRejected) {
    const auto dir = std::filesystem::temp_directory_path() / "dsa_test_scenario";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "ok.json") << explicit_scenario().dump();
        std::ofstream(dir / "broken.json") << "{\"n_channels\": 6,";
    }
    EXPECT_EQ(load_scenario((dir / "ok.json").string()), scenario_from_json(explicit_scenario()));
    EXPECT_THROW(load_scenario((dir / "broken.json").string()), ConfigError);
    EXPECT_THROW(load_scenario((dir / "missing.json").string()), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST(Scenario, StationaryVacancy) {
    EXPECT_DOUBLE_EQ(TransitionMatrix::from_stay(0.9, 0.8).stationary_vacant(), 0.2 / (0.1 + 0.2));
    EXPECT_DOUBLE_EQ(TransitionMatrix::from_stay(0.5, 0.5).stationary_vacant(), 0.5);
    EXPECT_DOUBLE_EQ(TransitionMatrix::from_stay(1.0, 1.0).stationary_vacant(), 0.5);
}

TEST(Scenario, RandomTopologyCoversEveryChannel) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto topo = random_topology(24, 5, 1, seed);
        EXPECT_NO_THROW(topo.validate(24));
        EXPECT_TRUE(std::is_sorted(topo.independents.begin(), topo.independents.end()));
    }
    EXPECT_THROW(random_topology(8, 0, 1, 1), ConfigError);
    EXPECT_THROW(random_topology(8, 9, 1, 1), ConfigError);
}
