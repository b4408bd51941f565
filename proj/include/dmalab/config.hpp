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

// JSON configuration files. Every section is optional and every key inside a
// section is optional; absent keys keep their defaults, unknown keys are
// rejected.
//
//   { "gen":    { "n_workers": 5, "budget_range": [2, 5], ... },
//     "sweep":  { "axis": "n_workers", "values": [5, 10, 15], "instances_per_point": 10 },
//     "ppo":    { "iterations": 1000, "batch_size": 8, "dims": { "lambda": 16 }, ... },
//     "ga":     { "population_min": 40, ... },
//     "oracle": { "max_subtasks": 8, "max_states": 5000000 } }

#include <initializer_list>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "dmalab/baselines.hpp"
#include "dmalab/trainer.hpp"

namespace dmalab {

struct LabConfig {
    GenConfig gen;
    std::optional<SweepSpec> sweep;
    PpoConfig ppo;
    GaConfig ga;
    OracleLimits oracle;
};

namespace detail {

class Reader {
public:
    Reader(const nlohmann::json &obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(const std::string &key, const std::string &msg) const {
        throw Error(ErrorCode::ParseError, "config " + where_ + (key.empty() ? "" : "/" + key) + ": " + msg);
    }

    template <typename T>
    Reader &get(const char *key, T &out) {
        seen_.insert(key);
        if (!obj_.contains(key)) return *this;
        const auto &v = obj_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(key, "expected an integer");
            if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                fail(key, "expected a non-negative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(key, "expected a number");
        }
        try {
            out = v.get<T>();
        } catch (const nlohmann::json::exception &) {
            fail(key, "wrong type");
        }
        return *this;
    }

    template <typename R>
    Reader &range(const char *key, R &out) {
        seen_.insert(key);
        if (!obj_.contains(key)) return *this;
        const auto &v = obj_.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            fail(key, "expected [lo, hi]");
        if constexpr (std::is_same_v<R, IntRange>) {
            if (!v[0].is_number_integer() || !v[1].is_number_integer()) fail(key, "expected integers");
            out = {v[0].get<int>(), v[1].get<int>()};
        } else {
            out = {v[0].get<double>(), v[1].get<double>()};
        }
        return *this;
    }

    /// A nested section, or nullptr when absent.
    const nlohmann::json *section(const char *key) {
        seen_.insert(key);
        return obj_.contains(key) ? &obj_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto &item : obj_.items())
            if (!seen_.count(item.key())) fail(item.key(), "unknown key");
    }

    [[nodiscard]] const std::string &where() const { return where_; }

private:
    const nlohmann::json &obj_;
    std::string where_;
    std::set<std::string> seen_;
};

inline double number_or_infinity(const nlohmann::json &v, const std::string &where) {
    if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (!v.is_number()) throw Error(ErrorCode::ParseError, "config " + where + ": expected a number or \"inf\"");
    return v.get<double>();
}

}  // namespace detail

inline GenConfig gen_config_from_json(const nlohmann::json &obj, GenConfig c = {}, const std::string &where = "/gen") {
    detail::Reader r(obj, where);
    r.get("n_workers", c.n_workers)
        .get("n_tasks", c.n_tasks)
        .get("area_side", c.area_side)
        .range("arrive_range", c.arrive_range)
        .range("work_range", c.work_range)
        .range("pace_range", c.pace_range)
        .get("skill_pool", c.skill_pool)
        .get("max_worker_skills", c.max_worker_skills)
        .get("max_subtask_skills", c.max_subtask_skills)
        .range("budget_range", c.budget_range)
        .range("task_size_range", c.task_size_range)
        .range("deadline_range", c.deadline_range)
        .get("exec_time", c.exec_time)
        .get("fixed_total_subtasks", c.fixed_total_subtasks)
        .get("fixed_task_size", c.fixed_task_size)
        .get("seed", c.seed);
    r.finish();
    return c;
}

inline SweepSpec sweep_from_json(const nlohmann::json &obj, const GenConfig &base) {
    detail::Reader r(obj, "/sweep");
    SweepSpec s;
    s.base = base;
    std::string axis = std::string(to_string(s.axis));
    r.get("axis", axis).get("values", s.values).get("instances_per_point", s.instances_per_point);
    if (const auto *b = r.section("base")) s.base = gen_config_from_json(*b, base, "/sweep/base");
    r.finish();
    try {
        s.axis = sweep_axis_from(axis);
    } catch (const Error &e) {
        r.fail("axis", e.what());
    }
    return s;
}

inline GraphConfig graph_config_from_json(const nlohmann::json &obj, GraphConfig g = {}) {
    detail::Reader r(obj, "/ppo/graph");
    std::string mode = g.mode == NeighborhoodMode::Union ? "union" : "intersection";
    if (const auto *t = r.section("ad_threshold")) g.ad_threshold = detail::number_or_infinity(*t, "/ppo/graph/ad_threshold");
    r.get("mode", mode).get("normalize", g.normalize);
    r.finish();
    if (mode == "union")
        g.mode = NeighborhoodMode::Union;
    else if (mode == "intersection")
        g.mode = NeighborhoodMode::Intersection;
    else
        r.fail("mode", "expected \"union\" or \"intersection\"");
    return g;
}

inline PpoConfig ppo_config_from_json(const nlohmann::json &obj, PpoConfig c = {}) {
    detail::Reader r(obj, "/ppo");
    r.get("iterations", c.iterations)
        .get("batch_size", c.batch_size)
        .get("refresh_every", c.refresh_every)
        .get("validate_every", c.validate_every)
        .get("validation_size", c.validation_size)
        .get("validation_seed", c.validation_seed)
        .get("ppo_epochs", c.ppo_epochs)
        .get("clip", c.clip)
        .get("coef_policy", c.coef_policy)
        .get("coef_value", c.coef_value)
        .get("coef_entropy", c.coef_entropy)
        .get("gamma", c.gamma)
        .get("gae_lambda", c.gae_lambda)
        .get("learning_rate", c.learning_rate)
        .get("normalize_advantages", c.normalize_advantages)
        .get("seed", c.seed)
        .get("parallel", c.parallel);
    if (const auto *d = r.section("dims")) {
        detail::Reader dr(*d, "/ppo/dims");
        dr.get("lambda", c.dims.lambda).get("rounds", c.dims.rounds).get("lambda_pi", c.dims.lambda_pi);
        dr.finish();
    }
    if (const auto *g = r.section("graph")) c.graph = graph_config_from_json(*g, c.graph);
    if (const auto *e = r.section("env")) {
        detail::Reader er(*e, "/ppo/env");
        er.get("alpha", c.env.alpha);
        er.finish();
    }
    r.finish();
    return c;
}

inline GaConfig ga_config_from_json(const nlohmann::json &obj, GaConfig c = {}) {
    detail::Reader r(obj, "/ga");
    r.get("population_size", c.population_size)
        .get("max_generations", c.max_generations)
        .get("population_scale", c.population_scale)
        .get("generation_scale", c.generation_scale)
        .get("population_min", c.population_min)
        .get("generations_min", c.generations_min)
        .get("crossover_rate", c.crossover_rate)
        .get("mutation_rate", c.mutation_rate)
        .get("elitism_count", c.elitism_count)
        .get("tournament_size", c.tournament_size)
        .get("seed", c.seed);
    r.finish();
    return c;
}

inline LabConfig lab_config_from_json(const nlohmann::json &doc) {
    detail::Reader r(doc, "");
    LabConfig c;
    if (const auto *g = r.section("gen")) c.gen = gen_config_from_json(*g);
    if (const auto *s = r.section("sweep")) c.sweep = sweep_from_json(*s, c.gen);
    if (const auto *p = r.section("ppo")) c.ppo = ppo_config_from_json(*p);
    if (const auto *g = r.section("ga")) c.ga = ga_config_from_json(*g);
    if (const auto *o = r.section("oracle")) {
        detail::Reader orr(*o, "/oracle");
        orr.get("max_subtasks", c.oracle.max_subtasks).get("max_states", c.oracle.max_states);
        orr.finish();
    }
    r.finish();
    return c;
}

inline LabConfig load_lab_config(const std::string &text) {
    return lab_config_from_json(detail::parse_document(text));
}

}  // namespace dmalab
