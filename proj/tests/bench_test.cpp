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

#include "dmalab/bench.hpp"
#include "dmalab/config.hpp"

using namespace dmalab;

namespace {

std::vector<Instance> scenario(int workers, int tasks, int count, std::uint64_t seed = 1) {
    GenConfig g;
    g.n_workers = workers;
    g.n_tasks = tasks;
    g.seed = seed;
    return generate_batch(g, static_cast<std::size_t>(count));
}

SolverSuite fast_suite() {
    SolverSuite s;
    s.ga.population_min = 10;
    s.ga.generations_min = 8;
    s.ga.population_scale = 0.0;
    s.ga.generation_scale = 0.0;
    return s;
}

}  // namespace

TEST(Metrics, ReferenceAgainstItselfIsZero) {
    const auto inst = scenario(5, 10, 8);
    std::vector<Schedule> greedy;
    for (const auto &i : inst) greedy.push_back(greedy_solve(i));
    const auto rows = compute_metrics("s", inst, {{"greedy", greedy, false}});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(*rows[0].performance_ratio, 0.0);
    EXPECT_EQ(*rows[0].performance_ratio_per_instance, 0.0);
    EXPECT_GE(rows[0].subtask_coverage, 0.0);
    EXPECT_LE(rows[0].subtask_coverage, 1.0);
    EXPECT_FALSE(rows[0].mean_wall_seconds.has_value());
}

TEST(Metrics, FixtureOptimum) {
    const Instance f = illustrative_fixture();
    const auto rows = compute_metrics("fixture", {f}, {{"oracle", {illustrative_optimal_schedule()}, false}});
    EXPECT_DOUBLE_EQ(rows[0].mean_profit, 8.0);
    EXPECT_DOUBLE_EQ(rows[0].subtask_coverage, 5.0 / 6.0);
    EXPECT_DOUBLE_EQ(*rows[0].avg_profit_per_completed_subtask, 1.6);
    EXPECT_DOUBLE_EQ(*rows[0].performance_ratio, 8.0 / 6.0 - 1.0);
}

TEST(Metrics, RatioAggregationsDiffer) {
    // Two instances: reference profits {a, b}, scheme profits {c, d}.
    const auto inst = scenario(5, 10, 2, 4);
    std::vector<Schedule> ref, empty(2);
    for (const auto &i : inst) ref.push_back(greedy_solve(i));
    for (auto &s : empty) s.routes.resize(5);
    // Scheme equals the reference on instance 0 and is empty on instance 1.
    std::vector<Schedule> mixed{ref[0], empty[1]};
    const double a = schedule_profit(ref[0], inst[0]), b = schedule_profit(ref[1], inst[1]);
    const auto rows = compute_metrics("s", inst, {{"greedy", ref, false}, {"x", mixed, false}});
    EXPECT_NEAR(*rows[1].performance_ratio, a / (a + b) - 1.0, 1e-15);
    EXPECT_NEAR(*rows[1].performance_ratio_per_instance, -0.5, 1e-15);
}

TEST(Metrics, DivisionGuard) {
    Instance inst = illustrative_fixture();
    for (auto &w : inst.workers) w.skills = {3};
    for (auto &v : inst.subtasks) v.skills = {0};
    Schedule none;
    none.routes.resize(inst.num_workers());
    const auto rows = compute_metrics("zero", {inst}, {{"greedy", {none}, false}});
    EXPECT_FALSE(rows[0].performance_ratio.has_value());
    EXPECT_FALSE(rows[0].performance_ratio_per_instance.has_value());
    EXPECT_FALSE(rows[0].avg_profit_per_completed_subtask.has_value());
    const std::string csv = metrics_csv(rows, RatioMode::Both);
    EXPECT_NE(csv.find(",NA,NA,0,NA,"), std::string::npos) << csv;
}

TEST(Metrics, SkillMatchingAgreesWithGraph) {
    for (const auto &inst : scenario(6, 8, 10, 9)) {
        const auto gs = build_graph(reset(inst), {});
        EXPECT_DOUBLE_EQ(skill_matching_ratio(inst), skill_matching_ratio(gs.graph));
    }
}

TEST(Metrics, MoreSkillsMatchMore) {
    SweepSpec spec;
    spec.base.n_workers = 6;
    spec.base.n_tasks = 8;
    spec.instances_per_point = 10;
    spec.axis = SweepAxis::MaxSkillsWorker;
    GenConfig lo = spec.base, hi = spec.base;
    lo.max_worker_skills = lo.max_subtask_skills = 1;
    hi.max_worker_skills = hi.max_subtask_skills = 4;
    double r_lo = 0.0, r_hi = 0.0;
    for (const auto &i : generate_batch(lo, 10)) r_lo += skill_matching_ratio(i);
    for (const auto &i : generate_batch(hi, 10)) r_hi += skill_matching_ratio(i);
    EXPECT_GT(r_hi, r_lo);
}

TEST(Metrics, ShapeMismatch) {
    const auto inst = scenario(3, 3, 2);
    EXPECT_THROW(compute_metrics("s", inst, {{"greedy", {greedy_solve(inst[0])}, false}}), Error);
}

TEST(Csv, ColumnSelectionByMode) {
    MetricsRow r;
    r.scenario = "p";
    r.scheme = "ga";
    r.instances = 3;
    r.mean_profit = 10.5;
    r.performance_ratio = 0.25;
    r.performance_ratio_per_instance = 0.5;
    r.subtask_coverage = 0.75;
    r.avg_profit_per_completed_subtask = 3.5;
    r.skill_matching_ratio = 0.5;
    const std::string header =
        "schema,scenario,scheme,instances,mean_profit,performance_ratio,performance_ratio_per_instance,"
        "subtask_coverage,avg_profit_per_completed_subtask,mean_wall_seconds,skill_matching_ratio\n";
    EXPECT_EQ(metrics_csv({r}), header + "dmalab.metrics/1,p,ga,3,10.5,0.25,,0.75,3.5,,0.5\n");
    EXPECT_EQ(metrics_csv({r}, RatioMode::MeanOfRatios), header + "dmalab.metrics/1,p,ga,3,10.5,,0.5,0.75,3.5,,0.5\n");
    EXPECT_EQ(metrics_csv({r}, RatioMode::Both), header + "dmalab.metrics/1,p,ga,3,10.5,0.25,0.5,0.75,3.5,,0.5\n");
    EXPECT_EQ(ratio_mode_from("both"), RatioMode::Both);
    EXPECT_THROW(ratio_mode_from("median"), Error);
}

TEST(Compare, TwoRowsPerScenarioAndValidSchedules) {
    const auto inst = scenario(4, 5, 20);
    const Report rep = compare_schemes("s", inst, {"greedy", "ga"}, fast_suite());
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.rows[0].scheme, "greedy");
    EXPECT_EQ(rep.rows[1].scheme, "ga");
    EXPECT_GE(*rep.rows[1].performance_ratio, 0.0);
    ASSERT_EQ(rep.results.size(), 20u);
    for (const auto &r : rep.results)
        for (const auto &[scheme, s] : r.schedules) EXPECT_TRUE(validate_schedule(r.instance, s).valid) << scheme;
}

TEST(Compare, ParallelMatchesSerial) {
    const auto inst = scenario(4, 5, 6);
    CompareOptions par;
    par.parallel = 3;
    const auto a = compare_schemes("s", inst, {"greedy", "ga"}, fast_suite());
    const auto b = compare_schemes("s", inst, {"greedy", "ga"}, fast_suite(), par);
    EXPECT_EQ(metrics_csv(a.rows, RatioMode::Both), metrics_csv(b.rows, RatioMode::Both));
}

TEST(Compare, TimingFillsWallSeconds) {
    CompareOptions opt;
    opt.timing = true;
    const auto rep = compare_schemes("s", scenario(3, 3, 2), {"greedy"}, fast_suite(), opt);
    ASSERT_TRUE(rep.rows[0].mean_wall_seconds.has_value());
    EXPECT_GT(*rep.rows[0].mean_wall_seconds, 0.0);
}

TEST(Compare, UnknownSchemeAndMissingPolicy) {
    const auto inst = scenario(3, 3, 1);
    EXPECT_THROW(compare_schemes("s", inst, {"magic"}, fast_suite()), Error);
    EXPECT_THROW(compare_schemes("s", inst, {"chanet"}, fast_suite()), Error);
    SolverSuite with_policy = fast_suite();
    with_policy.policy = init_params(NetDims{4, 1, 8}, 1);
    EXPECT_NO_THROW(compare_schemes("s", inst, {"chanet"}, with_policy));
}

TEST(Sweep, OneRowPerPointAndScheme) {
    SweepSpec spec;
    spec.base.n_tasks = 4;
    spec.axis = SweepAxis::Workers;
    spec.values = {3, 5, 7};
    spec.instances_per_point = 3;
    const Report rep = sweep_run(spec, {"greedy", "ga"}, fast_suite());
    ASSERT_EQ(rep.rows.size(), 6u);
    EXPECT_EQ(rep.rows[0].scenario, "n_workers=3");
    EXPECT_EQ(rep.rows[5].scenario, "n_workers=7");
    EXPECT_EQ(rep.results.size(), 9u);
}

TEST(Sweep, SingletonTasksHaveNoDependencyEdges) {
    SweepSpec spec;
    spec.base.n_workers = 4;
    spec.base.fixed_total_subtasks = 12;
    spec.axis = SweepAxis::TaskSizeFixed;
    spec.values = {1};
    spec.instances_per_point = 5;
    for (const auto &inst : sweep_point_instances(spec, 1))
        EXPECT_TRUE(build_graph(reset(inst), {}).graph.edges_dp.empty());
}

TEST(Results, RecomputedMetricsMatchCsv) {
    SweepSpec spec;
    spec.base.n_workers = 4;
    spec.axis = SweepAxis::Tasks;
    spec.values = {3, 5};
    spec.instances_per_point = 4;
    const Report rep = sweep_run(spec, {"greedy", "ga"}, fast_suite());
    std::vector<InstanceResult> reloaded;
    for (auto it = rep.results.rbegin(); it != rep.results.rend(); ++it)
        reloaded.push_back(load_result(result_to_json(*it).dump(2)));
    // Reversed file order still yields the same report.
    std::stable_sort(reloaded.begin(), reloaded.end(),
                     [](const InstanceResult &a, const InstanceResult &b) { return a.scenario < b.scenario; });
    EXPECT_EQ(metrics_csv(metrics_from_results(reloaded), RatioMode::Both), metrics_csv(rep.rows, RatioMode::Both));
}

TEST(Results, TimedRoundTrip) {
    CompareOptions opt;
    opt.timing = true;
    opt.repeats = 1;
    const Report rep = compare_schemes("t", scenario(3, 4, 3), {"greedy", "ga"}, fast_suite(), opt);
    std::vector<InstanceResult> reloaded;
    for (const auto &r : rep.results) reloaded.push_back(load_result(result_to_json(r, true).dump()));
    EXPECT_EQ(metrics_csv(metrics_from_results(reloaded, true)), metrics_csv(rep.rows));
}

TEST(Config, DefaultsAndOverrides) {
    const LabConfig c = load_lab_config(R"({
        "gen": {"n_workers": 5, "budget_range": [1, 2], "task_size_range": [2, 2]},
        "sweep": {"axis": "n_tasks", "values": [10, 20], "instances_per_point": 7},
        "ppo": {"iterations": 12, "learning_rate": 0.001, "dims": {"lambda": 8},
                "graph": {"ad_threshold": "inf", "mode": "intersection"}, "env": {"alpha": 0.5}},
        "ga": {"population_min": 12},
        "oracle": {"max_subtasks": 6}
    })");
    EXPECT_EQ(c.gen.n_workers, 5);
    EXPECT_EQ(c.gen.n_tasks, GenConfig{}.n_tasks);
    EXPECT_EQ(c.gen.budget_range, (Range{1.0, 2.0}));
    EXPECT_EQ(c.gen.task_size_range, (IntRange{2, 2}));
    ASSERT_TRUE(c.sweep.has_value());
    EXPECT_EQ(c.sweep->axis, SweepAxis::Tasks);
    EXPECT_EQ(c.sweep->base.n_workers, 5);
    EXPECT_EQ(c.sweep->instances_per_point, 7);
    EXPECT_EQ(c.ppo.iterations, 12);
    EXPECT_DOUBLE_EQ(c.ppo.learning_rate, 1e-3);
    EXPECT_EQ(c.ppo.dims, (NetDims{8, 4, 128}));
    EXPECT_TRUE(std::isinf(c.ppo.graph.ad_threshold));
    EXPECT_EQ(c.ppo.graph.mode, NeighborhoodMode::Intersection);
    EXPECT_DOUBLE_EQ(c.ppo.env.alpha, 0.5);
    EXPECT_EQ(c.ga.population_min, 12);
    EXPECT_EQ(c.oracle.max_subtasks, 6u);
    EXPECT_EQ(load_lab_config("{}").gen, GenConfig{});
}

TEST(Config, RejectsBadInput) {
    for (const char *text : {R"({"gen": {"n_worker": 5}})", R"({"gen": {"n_workers": 2.5}})",
                             R"({"gen": {"budget_range": [1]}})", R"({"sweep": {"axis": "colour"}})",
                             R"({"ppo": {"graph": {"mode": "both"}}})", R"({"extra": 1})", R"([1, 2])",
                             R"({"ppo": {"normalize_advantages": 1}})", R"({"oracle": {"max_states": -3}})", "{"}) {
        try {
            load_lab_config(text);
            ADD_FAILURE() << "accepted " << text;
        } catch (const Error &e) {
            EXPECT_EQ(e.code(), ErrorCode::ParseError) << text;
        }
    }
}
