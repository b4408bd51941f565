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

#pragma once

/**
 * @brief Seeded synthetic instances, the small worked example, and the
 * JSON formats for instances and schedules.
 */

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmalab/model.hpp"
#include "dmalab/random.hpp"

namespace dmalab {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] double mid() const { return 0.5 * (lo + hi); }
    friend bool operator==(const Range &, const Range &) = default;
};

struct IntRange {
    int lo = 0;
    int hi = 0;

    friend bool operator==(const IntRange &, const IntRange &) = default;
};

/// Scenario parameters; defaults are the standard experiment scenario.
struct GenConfig {
    int n_workers = 10;
    int n_tasks = 20;
    double area_side = 10.0;
    Range arrive_range{0.0, 30.0};
    Range work_range{20.0, 30.0};
    Range pace_range{1.0, 3.0};
    int skill_pool = 4;
    int max_worker_skills = 3;
    int max_subtask_skills = 3;
    Range budget_range{2.0, 5.0};
    IntRange task_size_range{3, 5};
    Range deadline_range{40.0, 60.0};
    double exec_time = 1.0;
    /// When positive, instances have exactly this many subtasks split into
    /// tasks of `fixed_task_size` (the last task takes the remainder).
    int fixed_total_subtasks = 0;
    int fixed_task_size = 1;
    std::uint64_t seed = 0;

    friend bool operator==(const GenConfig &, const GenConfig &) = default;
};

inline void check_config(const GenConfig &cfg) {
    auto fail = [](const std::string &m) { throw Error(ErrorCode::InvalidArgument, "GenConfig: " + m); };
    auto range_ok = [](const Range &r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; };
    if (cfg.n_workers <= 0) fail("n_workers must be positive");
    if (cfg.n_tasks <= 0 && cfg.fixed_total_subtasks <= 0) fail("n_tasks must be positive");
    if (!(cfg.area_side > 0.0)) fail("area_side must be positive");
    if (!range_ok(cfg.arrive_range) || !range_ok(cfg.work_range) || !range_ok(cfg.pace_range) ||
        !range_ok(cfg.budget_range) || !range_ok(cfg.deadline_range))
        fail("empty range");
    if (!(cfg.work_range.lo > 0.0)) fail("work_range must be positive");
    if (!(cfg.pace_range.lo > 0.0)) fail("pace_range must be positive");
    if (!(cfg.budget_range.lo > 0.0)) fail("budget_range must be positive");
    if (cfg.task_size_range.lo < 1 || cfg.task_size_range.lo > cfg.task_size_range.hi) fail("bad task_size_range");
    if (cfg.skill_pool <= 0) fail("skill_pool must be positive");
    if (cfg.max_worker_skills < 1 || cfg.max_worker_skills > cfg.skill_pool) fail("max_worker_skills out of range");
    if (cfg.max_subtask_skills < 1 || cfg.max_subtask_skills > cfg.skill_pool) fail("max_subtask_skills out of range");
    if (cfg.exec_time < 0.0 || cfg.exec_time > cfg.deadline_range.lo) fail("exec_time must fit every deadline");
    if (cfg.fixed_total_subtasks > 0 && cfg.fixed_task_size < 1) fail("fixed_task_size must be positive");
}

namespace detail {

inline SkillSet draw_skills(Rng &rng, int pool, int max_skills) {
    const int k = static_cast<int>(rng.uniform_int(1, max_skills));
    std::vector<int> all(pool);
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i, pool - 1));
        std::swap(all[i], all[j]);
    }
    SkillSet out(all.begin(), all.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

inline Location draw_location(Rng &rng, double side) { return {rng.uniform(0.0, side), rng.uniform(0.0, side)}; }

inline Instance generate_with_sizes(const GenConfig &cfg, const std::vector<int> &task_sizes, Rng &rng) {
    Instance inst;
    inst.area_side = cfg.area_side;
    inst.skill_pool_size = cfg.skill_pool;
    inst.seed = cfg.seed;
    for (int i = 0; i < cfg.n_workers; ++i) {
        Worker w;
        w.id = i;
        w.loc = draw_location(rng, cfg.area_side);
        w.arrive_time = rng.uniform(cfg.arrive_range.lo, cfg.arrive_range.hi);
        w.work_time = rng.uniform(cfg.work_range.lo, cfg.work_range.hi);
        w.pace = rng.uniform(cfg.pace_range.lo, cfg.pace_range.hi);
        w.skills = draw_skills(rng, cfg.skill_pool, cfg.max_worker_skills);
        inst.workers.push_back(std::move(w));
    }
    int next = 0;
    for (std::size_t t = 0; t < task_sizes.size(); ++t) {
        Task task;
        task.id = static_cast<int>(t);
        const double deadline = rng.uniform(cfg.deadline_range.lo, cfg.deadline_range.hi);
        for (int k = 0; k < task_sizes[t]; ++k) {
            Subtask v;
            v.id = next++;
            v.task_id = task.id;
            v.loc = draw_location(rng, cfg.area_side);
            v.earliest_start = 0.0;
            v.deadline = deadline;
            v.exec_time = cfg.exec_time;
            v.budget = rng.uniform(cfg.budget_range.lo, cfg.budget_range.hi);
            v.skills = draw_skills(rng, cfg.skill_pool, cfg.max_subtask_skills);
            v.deps = task.subtask_ids;
            task.subtask_ids.push_back(v.id);
            inst.subtasks.push_back(std::move(v));
        }
        inst.tasks.push_back(std::move(task));
    }
    return inst;
}

}  // namespace detail

inline Instance generate_fixed_subtasks(int total, int task_size, const GenConfig &cfg) {
    if (total <= 0 || task_size <= 0)
        throw Error(ErrorCode::InvalidArgument, "total and task_size must be positive");
    GenConfig c = cfg;
    c.fixed_total_subtasks = total;
    c.fixed_task_size = task_size;
    check_config(c);
    std::vector<int> sizes;
    for (int left = total; left > 0; left -= task_size) sizes.push_back(std::min(task_size, left));
    Rng rng(cfg.seed);
    return detail::generate_with_sizes(c, sizes, rng);
}

inline Instance generate_instance(const GenConfig &cfg) {
    if (cfg.fixed_total_subtasks > 0) return generate_fixed_subtasks(cfg.fixed_total_subtasks, cfg.fixed_task_size, cfg);
    check_config(cfg);
    Rng rng(cfg.seed);
    std::vector<int> sizes(cfg.n_tasks);
    for (auto &s : sizes) s = static_cast<int>(rng.uniform_int(cfg.task_size_range.lo, cfg.task_size_range.hi));
    return detail::generate_with_sizes(cfg, sizes, rng);
}

/// `count` instances from one config, instance i seeded with derive_seed(cfg.seed, i).
inline std::vector<Instance> generate_batch(const GenConfig &cfg, std::size_t count) {
    std::vector<Instance> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        GenConfig c = cfg;
        c.seed = derive_seed(cfg.seed, i);
        out.push_back(generate_instance(c));
    }
    return out;
}

enum class SweepAxis { Workers, Tasks, TaskSizeFixed, TotalSubtasks, MaxSkillsWorker, MaxSkillsSubtask };

inline std::string_view to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::Workers: return "n_workers";
        case SweepAxis::Tasks: return "n_tasks";
        case SweepAxis::TaskSizeFixed: return "task_size_fixed";
        case SweepAxis::TotalSubtasks: return "total_subtasks";
        case SweepAxis::MaxSkillsWorker: return "max_skills_worker";
        case SweepAxis::MaxSkillsSubtask: return "max_skills_subtask";
    }
    return "unknown";
}

inline SweepAxis sweep_axis_from(std::string_view name) {
    for (auto a : {SweepAxis::Workers, SweepAxis::Tasks, SweepAxis::TaskSizeFixed, SweepAxis::TotalSubtasks,
                   SweepAxis::MaxSkillsWorker, SweepAxis::MaxSkillsSubtask})
        if (to_string(a) == name) return a;
    throw Error(ErrorCode::InvalidArgument, "unknown sweep axis '" + std::string(name) + "'");
}

struct SweepSpec {
    GenConfig base;
    SweepAxis axis = SweepAxis::Workers;
    std::vector<int> values;
    int instances_per_point = 100;
};

/// Base config with the swept parameter set to `value`.
inline GenConfig sweep_point_config(const SweepSpec &spec, int value) {
    GenConfig c = spec.base;
    switch (spec.axis) {
        case SweepAxis::Workers: c.n_workers = value; break;
        case SweepAxis::Tasks: c.n_tasks = value; break;
        case SweepAxis::TaskSizeFixed:
            c.fixed_task_size = value;
            if (c.fixed_total_subtasks <= 0)
                throw Error(ErrorCode::InvalidArgument, "task_size_fixed sweep needs base.fixed_total_subtasks");
            break;
        case SweepAxis::TotalSubtasks: c.fixed_total_subtasks = value; break;
        case SweepAxis::MaxSkillsWorker: c.max_worker_skills = value; break;
        case SweepAxis::MaxSkillsSubtask: c.max_subtask_skills = value; break;
    }
    return c;
}

inline std::string sweep_point_id(const SweepSpec &spec, int value) {
    return std::string(to_string(spec.axis)) + "=" + std::to_string(value);
}

/// Instances of one sweep point; the seed stream is shared across points so
/// that points differ only in the swept parameter.
inline std::vector<Instance> sweep_point_instances(const SweepSpec &spec, int value) {
    if (spec.values.empty()) throw Error(ErrorCode::InvalidArgument, "SweepSpec: values must be nonempty");
    if (spec.instances_per_point <= 0) throw Error(ErrorCode::InvalidArgument, "SweepSpec: instances_per_point");
    return generate_batch(sweep_point_config(spec, value), static_cast<std::size_t>(spec.instances_per_point));
}

/**
 * The three-worker, six-subtask worked example. Skills, budgets, windows and
 * dependencies follow its table (skill sk_i is index i-1); coordinates are
 * ours, chosen so that the optimal routes are
 *   u1: v1@2, v5@4.5   u2: v2@3   u3: v4@3, v3@5     (profit 8, five subtasks)
 * with u2 reaching v2 at time 2 and waiting for v1, and the alternative
 *   u1: v1@2, v5@4.5   u2: v6@1.5   u3: v4@3          (profit 6, four subtasks).
 * All paces are 1.
 */
inline Instance illustrative_fixture() {
    Instance inst;
    inst.area_side = 10.0;
    inst.skill_pool_size = 4;
    auto worker = [](int id, Location loc, double from, double to, SkillSet skills) {
        return Worker{id, loc, from, to - from, 1.0, std::move(skills)};
    };
    inst.workers = {
        worker(0, {1.0, 1.0}, 0.0, 6.0, {0, 1}),
        worker(1, {1.0, 5.0}, 0.0, 4.0, {2}),
        worker(2, {7.0, 5.0}, 2.0, 7.0, {1, 3}),
    };
    auto subtask = [](int id, int task, Location loc, double deadline, double budget, SkillSet skills,
                      std::vector<int> deps) {
        return Subtask{id, task, loc, 0.0, deadline, 1.0, budget, std::move(skills), std::move(deps)};
    };
    inst.subtasks = {
        subtask(0, 0, {3.0, 1.0}, 6.0, 1.0, {0}, {}),
        subtask(1, 0, {3.0, 5.0}, 6.0, 1.0, {2, 3}, {0}),
        subtask(2, 0, {7.0, 7.0}, 6.0, 3.0, {3}, {0, 1}),
        subtask(3, 1, {7.0, 6.0}, 8.0, 2.0, {1}, {}),
        subtask(4, 1, {3.0, 2.5}, 8.0, 1.0, {0, 3}, {3}),
        subtask(5, 2, {1.0, 3.5}, 3.0, 2.0, {2, 3}, {}),
    };
    inst.tasks = {Task{0, {0, 1, 2}}, Task{1, {3, 4}}, Task{2, {5}}};
    return inst;
}

/// Profit-8 solution of the worked example.
inline Schedule illustrative_optimal_schedule() {
    Schedule s;
    s.solver = "reference";
    s.routes = {{{0, 2.0}, {4, 4.5}}, {{1, 3.0}}, {{3, 3.0}, {2, 5.0}}};
    return s;
}

/// Profit-6 solution of the worked example.
inline Schedule illustrative_suboptimal_schedule() {
    Schedule s;
    s.solver = "reference";
    s.routes = {{{0, 2.0}, {4, 4.5}}, {{5, 1.5}}, {{3, 3.0}}};
    return s;
}

// ---------------------------------------------------------------------------
// JSON formats

inline constexpr const char *kInstanceFormat = "dmalab.instance/1";
inline constexpr const char *kScheduleFormat = "dmalab.schedule/1";

namespace detail {

using ojson = nlohmann::ordered_json;

[[noreturn]] inline void parse_fail(const std::string &where, const std::string &what) {
    throw Error(ErrorCode::ParseError, "at " + where + ": " + what);
}

inline const nlohmann::json &field(const nlohmann::json &obj, const char *key, const std::string &where) {
    if (!obj.is_object()) parse_fail(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) parse_fail(where, std::string("missing key '") + key + "'");
    return *it;
}

inline double number(const nlohmann::json &obj, const char *key, const std::string &where) {
    const auto &v = field(obj, key, where);
    if (!v.is_number()) parse_fail(where + "/" + key, "expected a number");
    return v.get<double>();
}

inline int integer(const nlohmann::json &obj, const char *key, const std::string &where) {
    const auto &v = field(obj, key, where);
    if (!v.is_number_integer()) parse_fail(where + "/" + key, "expected an integer");
    return v.get<int>();
}

inline std::vector<int> int_list(const nlohmann::json &obj, const char *key, const std::string &where) {
    const auto &v = field(obj, key, where);
    if (!v.is_array()) parse_fail(where + "/" + key, "expected an array");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) parse_fail(where + "/" + key + "/" + std::to_string(i), "expected an integer");
        out.push_back(v[i].get<int>());
    }
    return out;
}

inline const nlohmann::json &array(const nlohmann::json &obj, const char *key, const std::string &where) {
    const auto &v = field(obj, key, where);
    if (!v.is_array()) parse_fail(where + "/" + key, "expected an array");
    return v;
}

inline ojson location_json(const Location &l) { return ojson{{"x", l.x}, {"y", l.y}}; }

inline Location location_from(const nlohmann::json &obj, const std::string &where) {
    const auto &l = field(obj, "location", where);
    return {number(l, "x", where + "/location"), number(l, "y", where + "/location")};
}

inline nlohmann::json parse_document(const std::string &text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::ParseError, "byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

inline void check_format(const nlohmann::json &doc, const char *expected) {
    const auto &v = field(doc, "format_version", "");
    if (!v.is_string() || v.get<std::string>() != expected)
        parse_fail("/format_version", std::string("unsupported format, expected '") + expected + "'");
}

}  // namespace detail

inline nlohmann::ordered_json instance_to_json(const Instance &inst) {
    using detail::ojson;
    ojson doc;
    doc["format_version"] = kInstanceFormat;
    doc["units"] = ojson{{"length", "area unit"}, {"time", "time unit"}, {"budget", "budget unit"}};
    doc["area_side"] = inst.area_side;
    doc["skill_pool_size"] = inst.skill_pool_size;
    if (inst.seed) doc["seed"] = *inst.seed;
    ojson workers = ojson::array();
    for (const auto &w : inst.workers)
        workers.push_back(ojson{{"id", w.id},
                                {"location", detail::location_json(w.loc)},
                                {"arrive_time", w.arrive_time},
                                {"work_time", w.work_time},
                                {"pace", w.pace},
                                {"skills", w.skills}});
    doc["workers"] = std::move(workers);
    ojson tasks = ojson::array();
    for (const auto &t : inst.tasks) tasks.push_back(ojson{{"id", t.id}, {"subtasks", t.subtask_ids}});
    doc["tasks"] = std::move(tasks);
    ojson subtasks = ojson::array();
    for (const auto &v : inst.subtasks)
        subtasks.push_back(ojson{{"id", v.id},
                                 {"task", v.task_id},
                                 {"location", detail::location_json(v.loc)},
                                 {"earliest_start", v.earliest_start},
                                 {"deadline", v.deadline},
                                 {"exec_time", v.exec_time},
                                 {"budget", v.budget},
                                 {"skills", v.skills},
                                 {"deps", v.deps}});
    doc["subtasks"] = std::move(subtasks);
    return doc;
}

inline std::string save_instance(const Instance &inst) { return instance_to_json(inst).dump(2) + "\n"; }

inline Instance instance_from_json(const nlohmann::json &doc) {
    using namespace detail;
    check_format(doc, kInstanceFormat);
    Instance inst;
    inst.area_side = number(doc, "area_side", "");
    inst.skill_pool_size = integer(doc, "skill_pool_size", "");
    if (auto it = doc.find("seed"); it != doc.end()) {
        if (!it->is_number_unsigned()) parse_fail("/seed", "expected an unsigned integer");
        inst.seed = it->get<std::uint64_t>();
    }
    const auto &workers = array(doc, "workers", "");
    for (std::size_t i = 0; i < workers.size(); ++i) {
        const std::string at = "/workers/" + std::to_string(i);
        Worker w;
        w.id = integer(workers[i], "id", at);
        w.loc = location_from(workers[i], at);
        w.arrive_time = number(workers[i], "arrive_time", at);
        w.work_time = number(workers[i], "work_time", at);
        w.pace = number(workers[i], "pace", at);
        w.skills = int_list(workers[i], "skills", at);
        inst.workers.push_back(std::move(w));
    }
    const auto &tasks = array(doc, "tasks", "");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const std::string at = "/tasks/" + std::to_string(i);
        inst.tasks.push_back(Task{integer(tasks[i], "id", at), int_list(tasks[i], "subtasks", at)});
    }
    const auto &subtasks = array(doc, "subtasks", "");
    for (std::size_t i = 0; i < subtasks.size(); ++i) {
        const std::string at = "/subtasks/" + std::to_string(i);
        const auto &j = subtasks[i];
        Subtask v;
        v.id = integer(j, "id", at);
        v.task_id = integer(j, "task", at);
        v.loc = location_from(j, at);
        v.earliest_start = number(j, "earliest_start", at);
        v.deadline = number(j, "deadline", at);
        v.exec_time = number(j, "exec_time", at);
        v.budget = number(j, "budget", at);
        v.skills = int_list(j, "skills", at);
        v.deps = int_list(j, "deps", at);
        inst.subtasks.push_back(std::move(v));
    }
    if (auto problems = instance_problems(inst); !problems.empty()) parse_fail("/", problems.front());
    return inst;
}

inline Instance load_instance(const std::string &text) { return instance_from_json(detail::parse_document(text)); }

inline nlohmann::ordered_json schedule_to_json(const Schedule &s, bool with_timing = false) {
    using detail::ojson;
    ojson doc;
    doc["format_version"] = kScheduleFormat;
    doc["solver"] = s.solver;
    if (with_timing) doc["wall_seconds"] = s.wall_seconds;
    ojson routes = ojson::array();
    for (const auto &route : s.routes) {
        ojson r = ojson::array();
        for (const auto &a : route) r.push_back(ojson{{"subtask", a.subtask}, {"start", a.start}});
        routes.push_back(std::move(r));
    }
    doc["routes"] = std::move(routes);
    return doc;
}

inline std::string save_schedule(const Schedule &s, bool with_timing = false) {
    return schedule_to_json(s, with_timing).dump(2) + "\n";
}

inline Schedule schedule_from_json(const nlohmann::json &doc) {
    using namespace detail;
    check_format(doc, kScheduleFormat);
    Schedule s;
    const auto &solver = field(doc, "solver", "");
    if (!solver.is_string()) parse_fail("/solver", "expected a string");
    s.solver = solver.get<std::string>();
    if (doc.contains("wall_seconds")) s.wall_seconds = number(doc, "wall_seconds", "");
    const auto &routes = array(doc, "routes", "");
    for (std::size_t w = 0; w < routes.size(); ++w) {
        const std::string at = "/routes/" + std::to_string(w);
        if (!routes[w].is_array()) parse_fail(at, "expected an array");
        std::vector<Assignment> route;
        for (std::size_t k = 0; k < routes[w].size(); ++k) {
            const std::string here = at + "/" + std::to_string(k);
            route.push_back({integer(routes[w][k], "subtask", here), number(routes[w][k], "start", here)});
        }
        s.routes.push_back(std::move(route));
    }
    return s;
}

inline Schedule load_schedule(const std::string &text) { return schedule_from_json(detail::parse_document(text)); }

}  // namespace dmalab
