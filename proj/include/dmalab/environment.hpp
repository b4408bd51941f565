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
 * @brief Sequential assignment process. Each step appends one subtask to the
 * end of one worker's route; the action mask admits exactly the appends that
 * keep every constraint satisfied.
 */

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "dmalab/model.hpp"

namespace dmalab {

/// An instance together with its static worker/subtask skill-match table.
class Problem {
public:
    explicit Problem(Instance inst) : inst_(std::move(inst)) {
        const std::size_t n = inst_.num_workers();
        const std::size_t ml = inst_.num_subtasks();
        match_.assign(n * ml, 0);
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = 0; v < ml; ++v) match_[u * ml + v] = skill_match(inst_.workers[u], inst_.subtasks[v]);
    }

    [[nodiscard]] const Instance &instance() const { return inst_; }
    [[nodiscard]] bool matches(std::size_t worker, std::size_t subtask) const {
        return match_[worker * inst_.num_subtasks() + subtask] != 0;
    }
    [[nodiscard]] std::size_t matching_pairs() const {
        std::size_t c = 0;
        for (char m : match_) c += m != 0;
        return c;
    }

private:
    Instance inst_;
    std::vector<char> match_;
};

using ProblemPtr = std::shared_ptr<const Problem>;

inline ProblemPtr make_problem(Instance inst) { return std::make_shared<const Problem>(std::move(inst)); }

struct Action {
    int subtask = 0;
    int worker = 0;

    friend bool operator==(const Action &, const Action &) = default;
};

struct StepResult {
    double reward = 0.0;
    bool done = false;
};

struct EnvConfig {
    /// Weight of consumed worker time in the step reward.
    double alpha = 0.4;
};

struct EnvState {
    ProblemPtr problem;
    EnvConfig config;
    std::vector<char> assigned;
    /// Start time per subtask, NaN while unassigned.
    std::vector<double> start;
    std::vector<int> assigned_worker;
    std::vector<double> worker_clock;
    std::vector<Location> worker_loc;
    std::vector<double> worker_profit;
    std::vector<std::vector<int>> routes;
    int step_count = 0;
    bool done = false;
    /// Feasible actions of this state, ordered by (subtask, worker), with the
    /// start time each would receive.
    std::vector<Action> feasible;
    std::vector<double> feasible_start;

    [[nodiscard]] const Instance &instance() const { return problem->instance(); }
};

namespace detail {

/// Completion time of all dependencies, nullopt when one is unassigned.
inline std::optional<double> deps_done(const EnvState &st, const Subtask &v) {
    double done = -std::numeric_limits<double>::infinity();
    for (int d : v.deps) {
        if (!st.assigned[d]) return std::nullopt;
        done = std::max(done, st.start[d] + st.instance().subtasks[d].exec_time);
    }
    return done;
}

inline std::optional<double> candidate_start(const EnvState &st, double deps, const Subtask &v, int u) {
    const Worker &w = st.instance().workers[u];
    const double tb = start_time(deps, st.worker_clock[u], st.worker_loc[u], w, v);
    if (tb < v.earliest_start - kTimeTolerance || tb > v.latest_start() + kTimeTolerance) return std::nullopt;
    if (tb + v.exec_time > w.expire_time() + kTimeTolerance) return std::nullopt;
    return tb;
}

inline void refresh_mask(EnvState &st) {
    st.feasible.clear();
    st.feasible_start.clear();
    const Instance &inst = st.instance();
    const int n = static_cast<int>(inst.num_workers());
    for (const Subtask &v : inst.subtasks) {
        if (st.assigned[v.id]) continue;
        const auto deps = deps_done(st, v);
        if (!deps) continue;
        for (int u = 0; u < n; ++u) {
            if (!st.problem->matches(u, v.id)) continue;
            if (auto tb = candidate_start(st, *deps, v, u)) {
                st.feasible.push_back({v.id, u});
                st.feasible_start.push_back(*tb);
            }
        }
    }
    st.done = st.feasible.empty();
}

}  // namespace detail

inline EnvState reset(ProblemPtr problem, EnvConfig config = {}) {
    EnvState st;
    st.problem = std::move(problem);
    st.config = config;
    const Instance &inst = st.instance();
    const std::size_t n = inst.num_workers();
    const std::size_t ml = inst.num_subtasks();
    st.assigned.assign(ml, 0);
    st.start.assign(ml, std::numeric_limits<double>::quiet_NaN());
    st.assigned_worker.assign(ml, -1);
    st.worker_clock.resize(n);
    st.worker_loc.resize(n);
    st.worker_profit.assign(n, 0.0);
    st.routes.assign(n, {});
    for (std::size_t u = 0; u < n; ++u) {
        st.worker_clock[u] = inst.workers[u].arrive_time;
        st.worker_loc[u] = inst.workers[u].loc;
    }
    detail::refresh_mask(st);
    return st;
}

inline EnvState reset(const Instance &inst, EnvConfig config = {}) { return reset(make_problem(inst), config); }

inline const std::vector<Action> &feasible_actions(const EnvState &st) { return st.feasible; }

/// Index of `a` in the feasible list, or -1.
inline int feasible_index(const EnvState &st, Action a) {
    for (std::size_t i = 0; i < st.feasible.size(); ++i)
        if (st.feasible[i] == a) return static_cast<int>(i);
    return -1;
}

/// Applies a feasible action in place.
inline StepResult step(EnvState &st, Action a) {
    const int idx = feasible_index(st, a);
    if (idx < 0)
        throw Error(ErrorCode::InfeasibleAction,
                    "(subtask " + std::to_string(a.subtask) + ", worker " + std::to_string(a.worker) + ")");
    const Instance &inst = st.instance();
    const Subtask &v = inst.subtasks[a.subtask];
    const Worker &w = inst.workers[a.worker];
    const double tb = st.feasible_start[idx];
    const double travel = travel_time(w, st.worker_loc[a.worker], v.loc);

    st.assigned[v.id] = 1;
    st.start[v.id] = tb;
    st.assigned_worker[v.id] = a.worker;
    st.worker_clock[a.worker] = tb + v.exec_time;
    st.worker_loc[a.worker] = v.loc;
    st.worker_profit[a.worker] += v.budget;
    st.routes[a.worker].push_back(v.id);
    ++st.step_count;
    detail::refresh_mask(st);
    return {v.budget - st.config.alpha * (travel + v.exec_time), st.done};
}

inline Schedule extract_schedule(const EnvState &st, std::string solver = "env") {
    Schedule s;
    s.solver = std::move(solver);
    s.routes.resize(st.routes.size());
    for (std::size_t u = 0; u < st.routes.size(); ++u)
        for (int v : st.routes[u]) s.routes[u].push_back({v, st.start[v]});
    return s;
}

inline double total_profit(const EnvState &st) {
    double p = 0.0;
    for (double x : st.worker_profit) p += x;
    return p;
}

}  // namespace dmalab
