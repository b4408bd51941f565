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

#include "dmalab/baselines.hpp"
#include "dmalab/instance_gen.hpp"
#include "oracles.hpp"

using namespace dmalab;

namespace {

Instance tiny(std::uint64_t seed) {
    GenConfig c;
    c.n_workers = 2;
    c.n_tasks = 2;
    c.task_size_range = {1, 3};
    c.seed = seed;
    return generate_instance(c);
}

Instance one_worker_two_jobs(double work_time) {
    Instance inst;
    inst.workers = {Worker{0, {0, 0}, 0.0, work_time, 1.0, {0}}};
    inst.subtasks = {Subtask{0, 0, {1, 0}, 0.0, 50.0, 1.0, 2.0, {0}, {}},
                     Subtask{1, 1, {0, 1}, 0.0, 50.0, 1.0, 3.0, {0}, {}}};
    inst.tasks = {Task{0, {0}}, Task{1, {1}}};
    return inst;
}

}  // namespace

TEST(Greedy, FixtureFirstPick) {
    const EnvState st = reset(illustrative_fixture());
    const Action a = greedy_action(st);
    EXPECT_EQ(st.instance().subtasks[a.subtask].budget, 2.0);
    EXPECT_TRUE(a.subtask == 3 || a.subtask == 5);
    EXPECT_EQ(a, (Action{3, 2}));
}

TEST(Greedy, FixtureScheduleValid) {
    const Instance f = illustrative_fixture();
    const Schedule s = greedy_solve(f);
    EXPECT_TRUE(validate_schedule(f, s).valid);
    EXPECT_DOUBLE_EQ(schedule_profit(s, f), 6.0);
}

TEST(Greedy, NoSkillOverlap) {
    Instance inst = one_worker_two_jobs(20);
    inst.skill_pool_size = 2;
    for (auto &v : inst.subtasks) v.skills = {1};
    const Schedule s = greedy_solve(inst);
    EXPECT_EQ(s.num_assigned(), 0u);
    EXPECT_EQ(schedule_profit(s, inst), 0.0);
}

TEST(Oracle, SmallExamples) {
    EXPECT_DOUBLE_EQ(brute_force_optimal(one_worker_two_jobs(20)).optimum, 5.0);
    // Window of 2.5: reaching either subtask and executing takes 2; both need 2 + sqrt(2) + 1.
    EXPECT_DOUBLE_EQ(brute_force_optimal(one_worker_two_jobs(2.5)).optimum, 3.0);
}

TEST(Oracle, FixtureOptimum) {
    const Instance f = illustrative_fixture();
    const OracleResult r = brute_force_optimal(f);
    EXPECT_DOUBLE_EQ(r.optimum, 8.0);
    EXPECT_TRUE(validate_schedule(f, r.schedule).valid);
    EXPECT_DOUBLE_EQ(schedule_profit(r.schedule, f), 8.0);
    EXPECT_EQ(r.schedule.num_assigned(), 5u);
    EXPECT_DOUBLE_EQ(oracle::exhaustive_profit(reset(f)), 8.0);
}

TEST(Oracle, MatchesUnprunedEnumeration) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const Instance inst = tiny(derive_seed(404, s));
        const OracleResult r = brute_force_optimal(inst);
        EXPECT_NEAR(r.optimum, oracle::exhaustive_profit(reset(inst)), 1e-9);
        EXPECT_TRUE(validate_schedule(inst, r.schedule).valid);
        EXPECT_EQ(brute_force_optimal(inst).optimum, r.optimum);
    }
}

TEST(Oracle, Limits) {
    GenConfig c;
    c.n_workers = 3;
    c.n_tasks = 5;
    c.seed = 1;
    try {
        brute_force_optimal(generate_instance(c), OracleLimits{8, 1000});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::LimitExceeded);
    }
    try {
        brute_force_optimal(illustrative_fixture(), OracleLimits{8, 3});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::LimitExceeded);
    }
}

TEST(Ga, ValidAndElitist) {
    GenConfig c;
    c.n_workers = 4;
    c.n_tasks = 6;
    for (std::uint64_t s = 0; s < 5; ++s) {
        c.seed = derive_seed(3, s);
        const Instance inst = generate_instance(c);
        GaConfig g;
        g.seed = s;
        g.population_size = 30;
        g.max_generations = 40;
        const GaResult r = ga_run(make_problem(inst), g);
        EXPECT_TRUE(validate_schedule(inst, r.best).valid);
        EXPECT_DOUBLE_EQ(schedule_profit(r.best, inst), r.best_profit);
        ASSERT_EQ(r.history.size(), 41u);
        for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_GE(r.history[i], r.history[i - 1]);
        EXPECT_GE(r.best_profit, schedule_profit(greedy_solve(inst), inst));
    }
}

TEST(Ga, GreedyChromosomeReplaysGreedy) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        GenConfig c;
        c.n_workers = 5;
        c.n_tasks = 10;
        c.seed = s;
        const auto p = make_problem(generate_instance(c));
        std::vector<int> rank;
        const EnvState st = detail::decode(p, greedy_chromosome(p), rank);
        EXPECT_EQ(extract_schedule(st, "greedy").routes, greedy_solve(p).routes);
    }
}

TEST(Ga, RejectsBadConfig) {
    GaConfig g;
    g.population_size = 4;
    g.elitism_count = 4;
    EXPECT_THROW(ga_solve(illustrative_fixture(), g), Error);
}

TEST(BoundChain, TinyInstances) {
    double ga_sum = 0.0, opt_sum = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const Instance inst = tiny(derive_seed(2025, s));
        const double g = schedule_profit(greedy_solve(inst), inst);
        GaConfig cfg;
        cfg.seed = s;
        const double ga = schedule_profit(ga_solve(inst, cfg), inst);
        const double opt = brute_force_optimal(inst).optimum;
        EXPECT_LE(g, ga + 1e-9);
        EXPECT_LE(ga, opt + 1e-9);
        ga_sum += ga;
        opt_sum += opt;
    }
    EXPECT_GE(ga_sum, 0.95 * opt_sum);
}
