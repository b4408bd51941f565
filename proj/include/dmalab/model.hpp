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
 * @brief Domain model of dependency-aware multi-task allocation: workers,
 * chained subtasks, schedules, the timing recurrence and the validator.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dmalab {

enum class ErrorCode {
    MissingDependency,
    InfeasibleAction,
    NoFeasibleAction,
    ParseError,
    LimitExceeded,
    ShapeMismatch,
    InvalidArgument,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingDependency: return "MISSING_DEPENDENCY";
        case ErrorCode::InfeasibleAction: return "INFEASIBLE_ACTION";
        case ErrorCode::NoFeasibleAction: return "NO_FEASIBLE_ACTION";
        case ErrorCode::ParseError: return "PARSE_ERROR";
        case ErrorCode::LimitExceeded: return "LIMIT_EXCEEDED";
        case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
        case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Absolute tolerance for every timing comparison (mask and validator).
inline constexpr double kTimeTolerance = 1e-9;

struct Location {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Location &, const Location &) = default;
};

/// Skills are kept as sorted, duplicate-free index lists.
using SkillSet = std::vector<int>;

struct Worker {
    int id = 0;
    Location loc;
    double arrive_time = 0.0;
    double work_time = 0.0;
    /// Time per unit distance; travel time is pace * distance.
    double pace = 1.0;
    SkillSet skills;

    [[nodiscard]] double expire_time() const { return arrive_time + work_time; }

    friend bool operator==(const Worker &, const Worker &) = default;
};

struct Subtask {
    int id = 0;
    int task_id = 0;
    Location loc;
    double earliest_start = 0.0;
    double deadline = 0.0;
    double exec_time = 1.0;
    double budget = 0.0;
    SkillSet skills;
    std::vector<int> deps;

    [[nodiscard]] double latest_start() const { return deadline - exec_time; }

    friend bool operator==(const Subtask &, const Subtask &) = default;
};

struct Task {
    int id = 0;
    std::vector<int> subtask_ids;

    friend bool operator==(const Task &, const Task &) = default;
};

struct Instance {
    std::vector<Worker> workers;
    std::vector<Task> tasks;
    std::vector<Subtask> subtasks;
    double area_side = 10.0;
    int skill_pool_size = 4;
    std::optional<std::uint64_t> seed;

    [[nodiscard]] std::size_t num_workers() const { return workers.size(); }
    [[nodiscard]] std::size_t num_subtasks() const { return subtasks.size(); }

    friend bool operator==(const Instance &, const Instance &) = default;
};

struct Assignment {
    int subtask = 0;
    double start = 0.0;

    friend bool operator==(const Assignment &, const Assignment &) = default;
};

struct Schedule {
    /// routes[w] is worker w's ordered route.
    std::vector<std::vector<Assignment>> routes;
    std::string solver;
    double wall_seconds = 0.0;

    [[nodiscard]] std::size_t num_assigned() const {
        std::size_t count = 0;
        for (const auto &route : routes) count += route.size();
        return count;
    }
};

enum class Constraint { SubtaskWindow, WorkerWindow, Dependency, Skill, Duplicate, Timing };

inline std::string_view to_string(Constraint c) {
    switch (c) {
        case Constraint::SubtaskWindow: return "SUBTASK_WINDOW";
        case Constraint::WorkerWindow: return "WORKER_WINDOW";
        case Constraint::Dependency: return "DEPENDENCY";
        case Constraint::Skill: return "SKILL";
        case Constraint::Duplicate: return "DUPLICATE";
        case Constraint::Timing: return "TIMING";
    }
    return "UNKNOWN";
}

struct Violation {
    Constraint constraint;
    int subtask = -1;
    std::string detail;
};

struct ValidationReport {
    bool valid = true;
    std::vector<Violation> violations;

    [[nodiscard]] std::size_t count(Constraint c) const {
        return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                      [c](const Violation &v) { return v.constraint == c; }));
    }
};

inline double distance(const Location &a, const Location &b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double travel_time(const Worker &w, const Location &from, const Location &to) {
    return w.pace * distance(from, to);
}

inline bool skill_match(const SkillSet &worker_skills, const SkillSet &subtask_skills) {
    auto a = worker_skills.begin();
    auto b = subtask_skills.begin();
    while (a != worker_skills.end() && b != subtask_skills.end()) {
        if (*a == *b) return true;
        if (*a < *b) ++a; else ++b;
    }
    return false;
}

inline bool skill_match(const Worker &w, const Subtask &v) { return skill_match(w.skills, v.skills); }

/// max(dependency completion, worker arrival, earliest start).
inline double start_time(double deps_done, double ready_time, const Location &from, const Worker &w,
                         const Subtask &v) {
    return std::max({deps_done, ready_time + travel_time(w, from, v.loc), v.earliest_start});
}

namespace detail {

inline std::vector<std::optional<double>> recorded_starts(const Schedule &s, std::size_t num_subtasks) {
    std::vector<std::optional<double>> starts(num_subtasks);
    for (const auto &route : s.routes)
        for (const auto &a : route)
            if (a.subtask >= 0 && static_cast<std::size_t>(a.subtask) < num_subtasks && !starts[a.subtask])
                starts[a.subtask] = a.start;
    return starts;
}

}  // namespace detail

/**
 * Start time of subtask `subtask_id` if placed at `route_position` of worker
 * `worker_id`'s route in `partial`. Dependencies are read from whichever route
 * holds them; the previous route entry (if any) supplies the ready time and
 * origin location.
 */
inline double compute_start_time(const Schedule &partial, const Instance &inst, int worker_id, int subtask_id,
                                 std::size_t route_position) {
    const Worker &w = inst.workers.at(worker_id);
    const Subtask &v = inst.subtasks.at(subtask_id);
    const auto starts = detail::recorded_starts(partial, inst.num_subtasks());

    double deps_done = -std::numeric_limits<double>::infinity();
    for (int d : v.deps) {
        if (!starts[d])
            throw Error(ErrorCode::MissingDependency,
                        "subtask " + std::to_string(d) + " required by " + std::to_string(subtask_id) +
                            " has no start time");
        deps_done = std::max(deps_done, *starts[d] + inst.subtasks[d].exec_time);
    }

    double ready = w.arrive_time;
    Location from = w.loc;
    if (route_position > 0) {
        const auto &route = partial.routes.at(worker_id);
        if (route_position > route.size())
            throw Error(ErrorCode::InvalidArgument, "route position past the end of the route");
        const auto &prev = route[route_position - 1];
        const Subtask &pv = inst.subtasks.at(prev.subtask);
        ready = prev.start + pv.exec_time;
        from = pv.loc;
    }
    return start_time(deps_done, ready, from, w, v);
}

/// Structural problems with an instance (empty when well-formed).
inline std::vector<std::string> instance_problems(const Instance &inst) {
    std::vector<std::string> out;
    auto bad = [&](const std::string &m) { out.push_back(m); };
    auto skills_ok = [&](const SkillSet &s) {
        if (s.empty() || !std::is_sorted(s.begin(), s.end()) ||
            std::adjacent_find(s.begin(), s.end()) != s.end())
            return false;
        return s.front() >= 0 && s.back() < inst.skill_pool_size;
    };
    for (std::size_t i = 0; i < inst.workers.size(); ++i) {
        const Worker &w = inst.workers[i];
        const std::string who = "worker " + std::to_string(i);
        if (w.id != static_cast<int>(i)) bad(who + ": id not dense");
        if (!(w.work_time > 0.0)) bad(who + ": work_time must be positive");
        if (!(w.pace > 0.0)) bad(who + ": pace must be positive");
        if (!skills_ok(w.skills)) bad(who + ": invalid skill set");
        if (!std::isfinite(w.loc.x) || !std::isfinite(w.loc.y)) bad(who + ": non-finite location");
    }
    std::size_t total = 0;
    std::vector<int> owner(inst.subtasks.size(), -1);
    std::vector<int> position(inst.subtasks.size(), -1);
    for (std::size_t t = 0; t < inst.tasks.size(); ++t) {
        const Task &task = inst.tasks[t];
        if (task.id != static_cast<int>(t)) bad("task " + std::to_string(t) + ": id not dense");
        if (task.subtask_ids.empty()) bad("task " + std::to_string(t) + ": no subtasks");
        for (std::size_t k = 0; k < task.subtask_ids.size(); ++k) {
            const int sid = task.subtask_ids[k];
            if (sid < 0 || static_cast<std::size_t>(sid) >= inst.subtasks.size() || owner[sid] != -1) {
                bad("task " + std::to_string(t) + ": bad or repeated subtask id " + std::to_string(sid));
                continue;
            }
            owner[sid] = static_cast<int>(t);
            position[sid] = static_cast<int>(k);
        }
        total += task.subtask_ids.size();
    }
    if (total != inst.subtasks.size()) bad("subtask count does not match task sizes");
    for (std::size_t i = 0; i < inst.subtasks.size(); ++i) {
        const Subtask &v = inst.subtasks[i];
        const std::string who = "subtask " + std::to_string(i);
        if (v.id != static_cast<int>(i)) bad(who + ": id not dense");
        if (owner[i] != v.task_id) bad(who + ": task_id disagrees with task membership");
        if (v.earliest_start + v.exec_time > v.deadline + kTimeTolerance) bad(who + ": window shorter than exec_time");
        if (!(v.budget > 0.0)) bad(who + ": budget must be positive");
        if (!(v.exec_time >= 0.0)) bad(who + ": negative exec_time");
        if (!skills_ok(v.skills)) bad(who + ": invalid skill set");
        for (int d : v.deps) {
            if (d < 0 || static_cast<std::size_t>(d) >= inst.subtasks.size() || d == v.id) {
                bad(who + ": invalid dependency " + std::to_string(d));
                continue;
            }
            if (owner[d] != owner[i] || position[d] >= position[i])
                bad(who + ": dependency " + std::to_string(d) + " is not an earlier subtask of the same task");
        }
    }
    return out;
}

inline double schedule_profit(const Schedule &s, const Instance &inst) {
    double total = 0.0;
    for (const auto &route : s.routes)
        for (const auto &a : route) total += inst.subtasks.at(a.subtask).budget;
    return total;
}

inline ValidationReport validate_schedule(const Instance &inst, const Schedule &s) {
    ValidationReport report;
    const std::size_t ml = inst.num_subtasks();
    auto flag = [&](Constraint c, int subtask, const std::string &msg) {
        report.violations.push_back({c, subtask, msg});
    };
    auto fmt = [](double t) {
        std::ostringstream os;
        os.precision(12);
        os << t;
        return os.str();
    };

    if (s.routes.size() > inst.num_workers())
        flag(Constraint::Timing, -1, "schedule has more routes than the instance has workers");

    std::vector<int> seen(ml, 0);
    for (const auto &route : s.routes)
        for (const auto &a : route) {
            if (a.subtask < 0 || static_cast<std::size_t>(a.subtask) >= ml) {
                flag(Constraint::Timing, a.subtask, "unknown subtask id");
                continue;
            }
            if (++seen[a.subtask] == 2) flag(Constraint::Duplicate, a.subtask, "subtask assigned more than once");
        }
    const auto starts = detail::recorded_starts(s, ml);

    const std::size_t routes = std::min(s.routes.size(), inst.num_workers());
    for (std::size_t wi = 0; wi < routes; ++wi) {
        const Worker &w = inst.workers[wi];
        const auto &route = s.routes[wi];
        double ready = w.arrive_time;
        Location from = w.loc;
        for (std::size_t pos = 0; pos < route.size(); ++pos) {
            const auto &a = route[pos];
            if (a.subtask < 0 || static_cast<std::size_t>(a.subtask) >= ml) continue;
            const Subtask &v = inst.subtasks[a.subtask];
            const std::string who = "worker " + std::to_string(wi) + ", subtask " + std::to_string(v.id);

            if (a.start < v.earliest_start - kTimeTolerance || a.start > v.latest_start() + kTimeTolerance)
                flag(Constraint::SubtaskWindow, v.id,
                     who + ": start " + fmt(a.start) + " outside [" + fmt(v.earliest_start) + ", " +
                         fmt(v.latest_start()) + "]");
            if (pos == 0 && a.start < w.arrive_time - kTimeTolerance)
                flag(Constraint::WorkerWindow, v.id, who + ": starts before the worker arrives");
            if (pos + 1 == route.size() && a.start + v.exec_time > w.expire_time() + kTimeTolerance)
                flag(Constraint::WorkerWindow, v.id,
                     who + ": completes at " + fmt(a.start + v.exec_time) + " after worker expiry " +
                         fmt(w.expire_time()));
            if (!skill_match(w, v)) flag(Constraint::Skill, v.id, who + ": no shared skill");

            double deps_done = -std::numeric_limits<double>::infinity();
            for (int d : v.deps) {
                if (!starts[d]) {
                    flag(Constraint::Dependency, v.id, who + ": dependency " + std::to_string(d) + " not assigned");
                    continue;
                }
                const double done = *starts[d] + inst.subtasks[d].exec_time;
                if (done > a.start + kTimeTolerance)
                    flag(Constraint::Dependency, v.id,
                         who + ": dependency " + std::to_string(d) + " completes at " + fmt(done) +
                             " after start " + fmt(a.start));
                deps_done = std::max(deps_done, done);
            }

            const double expected = start_time(deps_done, ready, from, w, v);
            if (std::abs(expected - a.start) > kTimeTolerance)
                flag(Constraint::Timing, v.id,
                     who + ": recorded start " + fmt(a.start) + " but route timing gives " + fmt(expected));

            ready = a.start + v.exec_time;
            from = v.loc;
        }
    }
    report.valid = report.violations.empty();
    return report;
}

}  // namespace dmalab
