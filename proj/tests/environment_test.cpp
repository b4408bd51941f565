/*
Copyright 2026 The dmalab Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <gtest/gtest.h>

#include <cmath>

#include "dmalab/environment.hpp"
#include "dmalab/instance_gen.hpp"
#include "oracles.hpp"

using namespace dmalab;

namespace {

GenConfig small_config(std::uint64_t seed) {
    GenConfig c;
    c.n_workers = 5;
    c.n_tasks = 10;
    c.seed = seed;
    return c;
}

Action random_action(const EnvState &st, Rng &rng) {
    return st.feasible[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(st.feasible.size()) - 1))];
}

std::set<std::pair<int, int>> as_set(const std::vector<Action> &acts) {
    std::set<std::pair<int, int>> out;
    for (const auto &a : acts) out.insert({a.subtask, a.worker});
    return out;
}

}  // namespace

TEST(Reset, Fixture) {
    const EnvState st = reset(illustrative_fixture());
    EXPECT_EQ(std::count(st.assigned.begin(), st.assigned.end(), 1), 0);
    EXPECT_EQ(st.worker_clock[0], 0.0);
    EXPECT_EQ(st.worker_clock[2], 2.0);
    EXPECT_FALSE(st.done);
    EXPECT_EQ(st.step_count, 0);
}

TEST(Reset, NoSkillOverlapIsTerminal) {
    Instance inst;
    inst.skill_pool_size = 2;
    inst.workers = {Worker{0, {0, 0}, 0, 30, 1, {0}}};
    inst.subtasks = {Subtask{0, 0, {1, 1}, 0, 40, 1, 3, {1}, {}}};
    inst.tasks = {Task{0, {0}}};
    EXPECT_TRUE(reset(inst).done);
}

TEST(Reset, Idempotent) {
    const Instance inst = generate_instance(small_config(1));
    const EnvState a = reset(inst);
    const EnvState b = reset(inst);
    EXPECT_EQ(a.worker_clock, b.worker_clock);
    EXPECT_EQ(a.feasible, b.feasible);
    EXPECT_EQ(a.feasible_start, b.feasible_start);
}

TEST(FeasibleActions, FixtureAtReset) {
    const EnvState st = reset(illustrative_fixture());
    const auto mask = as_set(feasible_actions(st));
    EXPECT_TRUE(mask.count({0, 0}));
    for (int u = 0; u < 3; ++u) EXPECT_FALSE(mask.count({2, u}));
    EXPECT_EQ(mask, oracle::enumerate_feasible(st));
    // v1 by u1, v4 by u3, v6 by u2.
    EXPECT_EQ(mask, (std::set<std::pair<int, int>>{{0, 0}, {3, 2}, {5, 1}}));
}

TEST(FeasibleActions, ExpiredWorkerAppearsNowhere) {
    Instance inst = generate_instance(small_config(4));
    inst.workers[0].arrive_time = 0.0;
    inst.workers[0].work_time = 1e-3;  // cannot even finish one unit of work
    const EnvState st = reset(inst);
    for (const auto &a : st.feasible) EXPECT_NE(a.worker, 0);
}

TEST(FeasibleActions, MatchesEnumerationOracle) {
    Rng rng(17);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        GenConfig c = small_config(derive_seed(8, seed));
        c.n_workers = 3;
        c.n_tasks = 3;
        EnvState st = reset(generate_instance(c));
        for (;;) {
            ASSERT_EQ(as_set(st.feasible), oracle::enumerate_feasible(st));
            if (st.done) break;
            step(st, random_action(st, rng));
        }
    }
}

TEST(Step, RewardExample) {
    Instance inst;
    inst.workers = {Worker{0, {0, 0}, 0, 30, 1, {0}}};
    inst.subtasks = {Subtask{0, 0, {2, 0}, 0, 40, 1, 3, {0}, {}}};
    inst.tasks = {Task{0, {0}}};
    EnvState st = reset(inst);
    const StepResult r = step(st, {0, 0});
    EXPECT_NEAR(r.reward, 3.0 - 0.4 * (2.0 + 1.0), 1e-12);
    EXPECT_NEAR(r.reward, 1.8, 1e-12);
    EXPECT_TRUE(r.done);
    EXPECT_TRUE(st.feasible.empty());
    EXPECT_EQ(st.worker_clock[0], 3.0);
    EXPECT_EQ(st.worker_profit[0], 3.0);
}

TEST(Step, RejectsInfeasible) {
    EnvState st = reset(illustrative_fixture());
    try {
        step(st, {2, 2});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InfeasibleAction);
    }
}

TEST(Step, ReturnDecomposition) {
    Rng rng(21);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Instance inst = generate_instance(small_config(derive_seed(77, seed)));
        EnvState st = reset(inst);
        double ret = 0.0;
        while (!st.done) ret += step(st, random_action(st, rng)).reward;
        // Recompute both sides from the final schedule.
        const Schedule s = extract_schedule(st);
        double time_used = 0.0;
        for (std::size_t u = 0; u < s.routes.size(); ++u) {
            Location at = inst.workers[u].loc;
            for (const auto &a : s.routes[u]) {
                const auto &v = inst.subtasks[a.subtask];
                time_used += travel_time(inst.workers[u], at, v.loc) + v.exec_time;
                at = v.loc;
            }
        }
        EXPECT_NEAR(ret + 0.4 * time_used, schedule_profit(s, inst), 1e-9);
    }
}

TEST(ExtractSchedule, ResetIsEmpty) {
    const Schedule s = extract_schedule(reset(illustrative_fixture()));
    EXPECT_EQ(s.routes.size(), 3u);
    EXPECT_EQ(s.num_assigned(), 0u);
}

TEST(ExtractSchedule, SafetyFuzz) {
    Rng rng(1);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const Instance inst = generate_instance(small_config(derive_seed(5, seed)));
        EnvState st = reset(inst);
        int steps = 0;
        while (!st.done) {
            step(st, random_action(st, rng));
            ++steps;
        }
        ASSERT_LE(static_cast<std::size_t>(steps), inst.num_subtasks());
        const Schedule s = extract_schedule(st);
        const auto report = validate_schedule(inst, s);
        ASSERT_TRUE(report.valid) << report.violations.front().detail;
        EXPECT_DOUBLE_EQ(schedule_profit(s, inst), total_profit(st));
        for (const auto &route : s.routes)
            for (std::size_t k = 1; k < route.size(); ++k) EXPECT_LT(route[k - 1].start, route[k].start);
    }
}

TEST(ExtractSchedule, FixtureRolloutValid) {
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        EnvState st = reset(illustrative_fixture());
        while (!st.done) step(st, random_action(st, rng));
        EXPECT_TRUE(validate_schedule(st.instance(), extract_schedule(st)).valid);
    }
}
