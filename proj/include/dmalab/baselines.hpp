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
 * @brief Non-learned solvers: max-budget greedy, a two-stage genetic
 * algorithm, and exhaustive search for tiny instances.
 */

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "dmalab/environment.hpp"
#include "dmalab/random.hpp"

namespace dmalab {

// ---------------------------------------------------------------------------
// Greedy

/// Feasible action with the largest budget; ties go to the smaller subtask id,
/// then the smaller worker id.
inline Action greedy_action(const EnvState &st) {
    if (st.feasible.empty()) throw Error(ErrorCode::NoFeasibleAction, "greedy_action on a terminal state");
    const auto &subtasks = st.instance().subtasks;
    Action best = st.feasible.front();
    for (const Action &a : st.feasible)
        if (subtasks[a.subtask].budget > subtasks[best.subtask].budget) best = a;
    return best;
}

inline Schedule greedy_solve(const ProblemPtr &problem) {
    EnvState st = reset(problem);
    while (!st.done) step(st, greedy_action(st));
    return extract_schedule(st, "greedy");
}

inline Schedule greedy_solve(const Instance &inst) { return greedy_solve(make_problem(inst)); }

// ---------------------------------------------------------------------------
// Two-stage genetic algorithm

struct GaConfig {
    /// Zero means "scale with n * ml": max(min, scale * n * ml).
    int population_size = 0;
    int max_generations = 0;
    double population_scale = 0.5;
    double generation_scale = 1.0;
    int population_min = 40;
    int generations_min = 60;
    double crossover_rate = 0.8;
    double mutation_rate = 0.2;
    int elitism_count = 2;
    int tournament_size = 3;
    std::uint64_t seed = 0;

    [[nodiscard]] int resolved_population(std::size_t n, std::size_t ml) const {
        if (population_size > 0) return population_size;
        return std::max(population_min, static_cast<int>(population_scale * static_cast<double>(n * ml)));
    }
    [[nodiscard]] int resolved_generations(std::size_t n, std::size_t ml) const {
        if (max_generations > 0) return max_generations;
        return std::max(generations_min, static_cast<int>(generation_scale * static_cast<double>(n * ml)));
    }
};

/// Stage one orders subtasks by priority; stage two names a preferred worker
/// per subtask (-1 when no worker has a matching skill).
struct Chromosome {
    std::vector<int> order;
    std::vector<int> preferred;
};

struct GaResult {
    Schedule best;
    double best_profit = 0.0;
    /// Best-so-far profit after each generation (index 0 is the initial population).
    std::vector<double> history;
};

namespace detail {

inline EnvState decode(const ProblemPtr &problem, const Chromosome &c, std::vector<int> &rank) {
    const std::size_t ml = problem->instance().num_subtasks();
    rank.resize(ml);
    for (std::size_t i = 0; i < c.order.size(); ++i) rank[c.order[i]] = static_cast<int>(i);
    EnvState st = reset(problem);
    while (!st.done) {
        int pick = st.feasible.front().subtask;
        for (const Action &a : st.feasible)
            if (rank[a.subtask] < rank[pick]) pick = a.subtask;
        int chosen = -1;
        double earliest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < st.feasible.size(); ++i) {
            const Action &a = st.feasible[i];
            if (a.subtask != pick) continue;
            if (a.worker == c.preferred[pick]) {
                chosen = static_cast<int>(i);
                break;
            }
            if (st.feasible_start[i] < earliest) {
                earliest = st.feasible_start[i];
                chosen = static_cast<int>(i);
            }
        }
        step(st, st.feasible[chosen]);
    }
    return st;
}

inline std::vector<int> matching_workers(const Problem &p, int subtask) {
    std::vector<int> out;
    for (std::size_t u = 0; u < p.instance().num_workers(); ++u)
        if (p.matches(u, subtask)) out.push_back(static_cast<int>(u));
    return out;
}

/// Order crossover: a slice of `a` kept in place, the rest filled in `b`'s order.
inline std::vector<int> order_crossover(const std::vector<int> &a, const std::vector<int> &b, Rng &rng) {
    const std::size_t len = a.size();
    if (len < 2) return a;
    auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(len) - 1));
    auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(len) - 1));
    if (i > j) std::swap(i, j);
    std::vector<int> child(len, -1);
    std::vector<char> used(len, 0);
    for (std::size_t k = i; k <= j; ++k) {
        child[k] = a[k];
        used[a[k]] = 1;
    }
    std::size_t pos = (j + 1) % len;
    for (std::size_t k = 0; k < len; ++k) {
        const int gene = b[(j + 1 + k) % len];
        if (used[gene]) continue;
        child[pos] = gene;
        pos = (pos + 1) % len;
    }
    return child;
}

}  // namespace detail

/// Chromosome whose decoding replays the greedy schedule.
inline Chromosome greedy_chromosome(const ProblemPtr &problem) {
    const std::size_t ml = problem->instance().num_subtasks();
    Chromosome c;
    c.preferred.assign(ml, -1);
    std::vector<char> placed(ml, 0);
    EnvState st = reset(problem);
    while (!st.done) {
        const Action a = greedy_action(st);
        c.order.push_back(a.subtask);
        c.preferred[a.subtask] = a.worker;
        placed[a.subtask] = 1;
        step(st, a);
    }
    for (std::size_t v = 0; v < ml; ++v) {
        if (placed[v]) continue;
        c.order.push_back(static_cast<int>(v));
        const auto workers = detail::matching_workers(*problem, static_cast<int>(v));
        c.preferred[v] = workers.empty() ? -1 : workers.front();
    }
    return c;
}

inline GaResult ga_run(const ProblemPtr &problem, const GaConfig &cfg) {
    const Instance &inst = problem->instance();
    const std::size_t n = inst.num_workers();
    const std::size_t ml = inst.num_subtasks();
    const int pop_size = cfg.resolved_population(n, ml);
    const int generations = cfg.resolved_generations(n, ml);
    if (pop_size < 2) throw Error(ErrorCode::InvalidArgument, "GaConfig: population must be at least 2");
    if (cfg.elitism_count < 0 || cfg.elitism_count >= pop_size)
        throw Error(ErrorCode::InvalidArgument, "GaConfig: elitism_count must be below the population size");

    Rng rng(cfg.seed);
    std::vector<std::vector<int>> candidates(ml);
    for (std::size_t v = 0; v < ml; ++v) candidates[v] = detail::matching_workers(*problem, static_cast<int>(v));
    auto random_worker = [&](std::size_t v) {
        const auto &c = candidates[v];
        return c.empty() ? -1 : c[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(c.size()) - 1))];
    };

    std::vector<Chromosome> pop;
    pop.reserve(pop_size);
    pop.push_back(greedy_chromosome(problem));
    while (static_cast<int>(pop.size()) < pop_size) {
        Chromosome c;
        c.order.resize(ml);
        std::iota(c.order.begin(), c.order.end(), 0);
        for (std::size_t i = ml; i > 1; --i)
            std::swap(c.order[i - 1], c.order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        c.preferred.resize(ml);
        for (std::size_t v = 0; v < ml; ++v) c.preferred[v] = random_worker(v);
        pop.push_back(std::move(c));
    }

    GaResult result;
    std::vector<int> rank;
    std::vector<double> fitness(pop_size);
    auto evaluate = [&]() {
        for (int i = 0; i < pop_size; ++i) {
            EnvState st = detail::decode(problem, pop[i], rank);
            fitness[i] = total_profit(st);
            if (result.history.empty() && i == 0) {
                result.best = extract_schedule(st, "ga");
                result.best_profit = fitness[i];
            } else if (fitness[i] > result.best_profit) {
                result.best = extract_schedule(st, "ga");
                result.best_profit = fitness[i];
            }
        }
        result.history.push_back(result.best_profit);
    };
    auto tournament = [&]() -> const Chromosome & {
        int best = static_cast<int>(rng.uniform_int(0, pop_size - 1));
        for (int k = 1; k < cfg.tournament_size; ++k) {
            const int c = static_cast<int>(rng.uniform_int(0, pop_size - 1));
            if (fitness[c] > fitness[best]) best = c;
        }
        return pop[best];
    };

    evaluate();
    std::vector<int> by_fitness(pop_size);
    for (int gen = 0; gen < generations; ++gen) {
        std::iota(by_fitness.begin(), by_fitness.end(), 0);
        std::stable_sort(by_fitness.begin(), by_fitness.end(),
                         [&](int a, int b) { return fitness[a] > fitness[b]; });
        std::vector<Chromosome> next;
        next.reserve(pop_size);
        for (int e = 0; e < cfg.elitism_count; ++e) next.push_back(pop[by_fitness[e]]);
        while (static_cast<int>(next.size()) < pop_size) {
            const Chromosome &a = tournament();
            const Chromosome &b = tournament();
            Chromosome child;
            if (rng.uniform() < cfg.crossover_rate) {
                child.order = detail::order_crossover(a.order, b.order, rng);
                child.preferred.resize(ml);
                for (std::size_t v = 0; v < ml; ++v) child.preferred[v] = rng.uniform() < 0.5 ? a.preferred[v] : b.preferred[v];
            } else {
                child = a;
            }
            if (ml >= 2 && rng.uniform() < cfg.mutation_rate) {
                const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ml) - 1));
                const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ml) - 1));
                std::swap(child.order[i], child.order[j]);
            }
            if (ml >= 1 && rng.uniform() < cfg.mutation_rate) {
                const auto v = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ml) - 1));
                child.preferred[v] = random_worker(v);
            }
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        evaluate();
    }
    return result;
}

inline Schedule ga_solve(const ProblemPtr &problem, const GaConfig &cfg) { return ga_run(problem, cfg).best; }

inline Schedule ga_solve(const Instance &inst, const GaConfig &cfg) { return ga_solve(make_problem(inst), cfg); }

// ---------------------------------------------------------------------------
// Exhaustive search

struct OracleLimits {
    std::size_t max_subtasks = 8;
    std::size_t max_states = 5'000'000;
};

struct OracleResult {
    Schedule schedule;
    double optimum = 0.0;
    std::size_t states = 0;
};

namespace detail {

class ExhaustiveSearch {
public:
    ExhaustiveSearch(const OracleLimits &lim) : lim_(lim) {}

    OracleResult run(const ProblemPtr &problem) {
        EnvState root = reset(problem);
        best_ = root;
        best_profit_ = 0.0;
        remaining_ = 0.0;
        for (const auto &v : problem->instance().subtasks) remaining_ += v.budget;
        visit(root, 0.0, remaining_);
        return {extract_schedule(best_, "oracle"), best_profit_, states_};
    }

private:
    // Identical keys mean identical reachable futures.
    static std::vector<double> key(const EnvState &st) {
        std::vector<double> k;
        k.reserve(2 * st.start.size() + st.worker_clock.size());
        for (std::size_t v = 0; v < st.start.size(); ++v) {
            k.push_back(st.assigned[v] ? st.start[v] : -1.0);
            k.push_back(static_cast<double>(st.assigned_worker[v]));
        }
        k.insert(k.end(), st.worker_clock.begin(), st.worker_clock.end());
        return k;
    }

    void visit(const EnvState &st, double profit, double unassigned_budget) {
        if (++states_ > lim_.max_states)
            throw Error(ErrorCode::LimitExceeded, "search exceeded " + std::to_string(lim_.max_states) + " states");
        if (profit > best_profit_) {
            best_profit_ = profit;
            best_ = st;
        }
        if (st.done || profit + unassigned_budget <= best_profit_) return;
        if (!seen_.insert(key(st)).second) return;
        const auto &subtasks = st.instance().subtasks;
        for (const Action &a : st.feasible) {
            EnvState next = st;
            step(next, a);
            const double b = subtasks[a.subtask].budget;
            visit(next, profit + b, unassigned_budget - b);
        }
    }

    OracleLimits lim_;
    EnvState best_;
    double best_profit_ = 0.0;
    double remaining_ = 0.0;
    std::size_t states_ = 0;
    std::set<std::vector<double>> seen_;
};

}  // namespace detail

inline OracleResult brute_force_optimal(const ProblemPtr &problem, const OracleLimits &lim = {}) {
    if (problem->instance().num_subtasks() > lim.max_subtasks)
        throw Error(ErrorCode::LimitExceeded, "instance has " + std::to_string(problem->instance().num_subtasks()) +
                                                  " subtasks, limit is " + std::to_string(lim.max_subtasks));
    return detail::ExhaustiveSearch(lim).run(problem);
}

inline OracleResult brute_force_optimal(const Instance &inst, const OracleLimits &lim = {}) {
    return brute_force_optimal(make_problem(inst), lim);
}

}  // namespace dmalab
