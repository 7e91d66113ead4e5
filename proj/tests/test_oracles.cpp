#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dsa/environment.hpp"
#include "dsa/oracles.hpp"
#include "test_util.hpp"

using namespace dsa;
using dsa::test::make_config;

namespace {

SystemState bits(std::initializer_list<int> b) {
    SystemState s;
    for (int v : b) s.bits.push_back(static_cast<std::uint8_t>(v));
    return s;
}

// ch1, ch2 independent; ch3 mirrors ch1; every row of P is (0.8, 0.2).
ScenarioConfig three_channel_example() {
    return make_config(3, 2, 2, TransitionMatrix{0.8, 0.2, 0.8, 0.2}, {0, 1}, {{2, 0, -1}});
}

}  // namespace

TEST(Oracles, ExpectedRewardHandExample) {
    const auto cfg = three_channel_example();
    // The next state does not depend on the current one here.
    for (const auto& s : {bits({0, 0, 1}), bits({1, 1, 0}), bits({0, 1, 1})}) {
        EXPECT_EQ(expected_action_reward(cfg, s, 0), 0.0);
        EXPECT_NEAR(expected_action_reward(cfg, s, 1), 4 * (0.8 * 0.8) - 2, 1e-12);
        EXPECT_NEAR(expected_action_reward(cfg, s, 2), 4 * (0.8 * 0.2) - 2, 1e-12);
    }
    EXPECT_THROW(expected_action_reward(cfg, bits({0, 0, 1}), 3), std::out_of_range);
}

TEST(Oracles, DeterministicChainHasSingleSuccessor) {
    const auto cfg = make_config(3, 2, 2, dsa::test::kIdentity, {0, 1, 2});
    const auto s = bits({0, 0, 1});
    const auto succ = successor_distribution(cfg, s);
    double total = 0.0;
    for (const auto& w : succ) {
        total += w.probability;
        if (w.probability > 0.0) EXPECT_EQ(w.state, s);
    }
    EXPECT_DOUBLE_EQ(total, 1.0);
    EXPECT_EQ(expected_action_reward(cfg, s, 1), 2.0);
    EXPECT_EQ(expected_action_reward(cfg, s, 2), -2.0);
}

TEST(Oracles, SuccessorDistributionSumsToOne) {
    const auto cfg = dsa::test::random_config(12, 4, 2, TransitionMatrix::from_stay(0.7, 0.55), 5, -1, 8);
    for (const auto& s : enumerate_states(cfg)) {
        double total = 0.0;
        for (const auto& w : successor_distribution(cfg, s)) {
            EXPECT_TRUE(satisfies_topology(cfg.topology, w.state));
            total += w.probability;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Oracles, GenieExamples) {
    const auto cfg = make_config(4, 2, 2, dsa::test::kIdentity, {0, 1, 2, 3});
    EXPECT_EQ(genie_action(cfg, bits({0, 0, 0, 0})), 1);
    EXPECT_EQ(genie_action(cfg, bits({1, 0, 1, 0})), 0);
    EXPECT_EQ(genie_action(cfg, bits({1, 0, 0, 1})), 2);
    for (int k = 1; k <= 3; ++k) {
        // Brute force: the chosen segment succeeds and no earlier one does.
        const auto s = bits({1, 0, 0, 1});
        const int g = genie_action(cfg, s);
        if (k < g) EXPECT_LT(vacancy_count(s, k, 2), 2);
        if (k == g) EXPECT_GE(vacancy_count(s, k, 2), 2);
    }
}

TEST(Oracles, ValueIterationGeometricSeries) {
    const auto cfg = make_config(2, 1, 1, dsa::test::kIdentity, {0}, {{1, 0, 1}});
    const double gamma = 0.9;
    const auto vi = value_iteration(cfg, gamma, 1e-12);
    EXPECT_LE(vi.residual, 1e-12);
    EXPECT_NEAR(vi.q.get("00", 1), 2.0 / (1.0 - gamma), 1e-9);
    EXPECT_NEAR(vi.q.get("00", 2), 2.0 / (1.0 - gamma), 1e-9);
    EXPECT_NEAR(vi.q.get("00", 0), gamma * 2.0 / (1.0 - gamma), 1e-9);
    // On an occupied, frozen pair the best plan is to idle forever, so a single
    // transmission costs exactly one failure.
    EXPECT_NEAR(vi.q.get("11", 0), 0.0, 1e-12);
    EXPECT_NEAR(vi.q.get("11", 1), -2.0, 1e-12);
    EXPECT_EQ(vi.q.argmax("11"), 0);
}

TEST(Oracles, ValueIterationRejectsLargeOrUndiscountedProblems) {
    auto big = dsa::test::random_config(16, 4, 2, TransitionMatrix::from_stay(0.9, 0.9), 13, 1, 1);
    EXPECT_THROW(value_iteration(big, 0.9, 1e-9), std::length_error);
    const auto cfg = make_config(2, 1, 1, dsa::test::kIdentity, {0}, {{1, 0, 1}});
    EXPECT_THROW(value_iteration(cfg, 1.0, 1e-9, 200), std::runtime_error);
}

// Monte Carlo evaluation of the greedy policy of Q*, started with action a in
// state s; an independent route to Q*(s, a).
TEST(Oracles, ValueIterationMatchesMonteCarloRollouts) {
    const auto cfg = make_config(5, 2, 2, TransitionMatrix::from_stay(0.8, 0.7), {0, 2, 4}, {{1, 0, -1}, {3, 2, 1}});
    const double gamma = 0.8;
    const auto vi = value_iteration(cfg, gamma, 1e-12);
    const int horizon = 90;  // gamma^90 * 2 / (1 - gamma) < 1e-8
    const int episodes = 100000;

    std::map<std::string, int> greedy;
    for (const auto& s : enumerate_states(cfg)) greedy[s.key()] = vi.q.argmax(s.key());

    Rng rng(2024);
    const std::vector<std::pair<SystemState, int>> probes{{bits({0, 1, 0, 0, 1}), 1}, {bits({1, 0, 1, 1, 0}), 3}};
    for (const auto& [start, first_action] : probes) {
        ASSERT_TRUE(satisfies_topology(cfg.topology, start));
        double sum = 0.0;
        for (int e = 0; e < episodes; ++e) {
            SystemState s = start;
            int a = first_action;
            double discount = 1.0, ret = 0.0;
            for (int t = 0; t < horizon; ++t) {
                s = advance(cfg, s, rng);
                if (a != 0) ret += discount * (vacancy_count(s, a, 2) >= 2 ? 2.0 : -2.0);
                discount *= gamma;
                a = greedy[s.key()];
            }
            sum += ret;
        }
        EXPECT_NEAR(sum / episodes, vi.q.get(start.key(), first_action), 0.05) << start.key() << " a=" << first_action;
    }
}

TEST(Oracles, StationaryActionAccuracyMatchesSimulation) {
    auto cfg = dsa::test::random_config(10, 4, 3, TransitionMatrix::from_stay(0.6, 0.7), 4, -1, 5, 31);
    const auto exact = stationary_action_accuracy(cfg);
    ASSERT_EQ(exact.size(), static_cast<std::size_t>(cfg.action_count()));
    Environment env(cfg);
    std::vector<double> hits(exact.size(), 0.0);
    const int steps = 200000;
    for (int t = 0; t < steps; ++t) {
        const auto& s = env.advance();
        if (!feasible(s, cfg.demand, cfg.segment_len)) hits[0] += 1;
        for (int k = 1; k <= cfg.segment_count(); ++k) {
            if (vacancy_count(s, k, cfg.segment_len) >= cfg.demand) hits[static_cast<std::size_t>(k)] += 1;
        }
    }
    for (std::size_t a = 0; a < exact.size(); ++a) EXPECT_NEAR(hits[a] / steps, exact[a], 0.01) << "action " << a;
}

TEST(Oracles, QTableDefaultsAndTies) {
    QTable t(4);
    EXPECT_EQ(t.get("x", 2), 0.0);
    EXPECT_EQ(t.argmax("x"), 0);
    EXPECT_EQ(t.max("x"), 0.0);
    t.set("x", 2, 1.0);
    t.set("x", 3, 1.0);
    EXPECT_EQ(t.argmax("x"), 2);
    EXPECT_EQ(t.max("x"), 1.0);
}

TEST(Oracles, QTableSaveLoadIsExact) {
    QTable t(3);
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
        for (int a = 0; a < 3; ++a) t.set("0:" + std::to_string(k), a, rng.normal() * 1e3 / 7.0);
    }
    std::stringstream ss;
    t.save(ss);
    EXPECT_EQ(QTable::load(ss, 3), t);

    std::istringstream bad("0:1 7 1.0\n");
    EXPECT_THROW(QTable::load(bad, 3), std::runtime_error);
}
