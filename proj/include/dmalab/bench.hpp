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
 * @brief Scheme comparison and metrics.
 *
 * Metrics are computed from (instances, schedules) alone, so a report can be
 * rebuilt from the per-instance result files. Wall-clock figures are only
 * collected when timing is requested.
 */

#include <algorithm>
#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dmalab/baselines.hpp"
#include "dmalab/config.hpp"
#include "dmalab/trainer.hpp"

namespace dmalab {

inline constexpr const char *kMetricsSchema = "dmalab.metrics/1";
inline constexpr const char *kResultFormat = "dmalab.result/1";

/// Reference scheme for performance ratios.
inline constexpr const char *kReferenceScheme = "greedy";

enum class RatioMode { RatioOfMeans, MeanOfRatios, Both };

inline RatioMode ratio_mode_from(std::string_view s) {
    if (s == "ratio-of-means") return RatioMode::RatioOfMeans;
    if (s == "mean-of-ratios") return RatioMode::MeanOfRatios;
    if (s == "both") return RatioMode::Both;
    throw Error(ErrorCode::InvalidArgument, "unknown ratio mode '" + std::string(s) + "'");
}

struct MetricsRow {
    std::string scenario;
    std::string scheme;
    std::size_t instances = 0;
    double mean_profit = 0.0;
    /// mean_profit / mean reference profit - 1; empty when the reference earns nothing.
    std::optional<double> performance_ratio;
    /// Mean over instances of profit / reference profit - 1; empty when any
    /// reference profit is zero.
    std::optional<double> performance_ratio_per_instance;
    double subtask_coverage = 0.0;
    /// Empty when no subtask was completed.
    std::optional<double> avg_profit_per_completed_subtask;
    std::optional<double> mean_wall_seconds;
    double skill_matching_ratio = 0.0;
};

/// Fraction of worker-subtask pairs with a shared skill.
inline double skill_matching_ratio(const Instance &inst) {
    const std::size_t pairs = inst.num_workers() * inst.num_subtasks();
    if (pairs == 0) return 0.0;
    std::size_t matched = 0;
    for (const auto &w : inst.workers)
        for (const auto &v : inst.subtasks) matched += skill_match(w, v) ? 1 : 0;
    return static_cast<double>(matched) / static_cast<double>(pairs);
}

inline double subtask_coverage(const Schedule &s, const Instance &inst) {
    return inst.num_subtasks() == 0
               ? 0.0
               : static_cast<double>(s.num_assigned()) / static_cast<double>(inst.num_subtasks());
}

struct SchemeRun {
    std::string scheme;
    std::vector<Schedule> schedules;
    /// Whether `wall_seconds` of the schedules is meaningful.
    bool timed = false;
};

/// One row per run, in order. The reference run supplies the ratio
/// denominators; when absent, greedy is solved here.
inline std::vector<MetricsRow> compute_metrics(const std::string &scenario, const std::vector<Instance> &instances,
                                               const std::vector<SchemeRun> &runs) {
    const std::size_t n = instances.size();
    for (const auto &run : runs)
        if (run.schedules.size() != n)
            throw Error(ErrorCode::ShapeMismatch, "scheme '" + run.scheme + "' has " +
                                                      std::to_string(run.schedules.size()) + " schedules for " +
                                                      std::to_string(n) + " instances");
    std::vector<double> reference(n);
    const auto ref = std::find_if(runs.begin(), runs.end(), [](const SchemeRun &r) { return r.scheme == kReferenceScheme; });
    for (std::size_t i = 0; i < n; ++i)
        reference[i] = schedule_profit(ref != runs.end() ? ref->schedules.at(i) : greedy_solve(instances[i]), instances[i]);

    double smr = 0.0;
    for (const auto &inst : instances) smr += skill_matching_ratio(inst);
    if (n > 0) smr /= static_cast<double>(n);
    double reference_mean = 0.0;
    for (double r : reference) reference_mean += r;
    if (n > 0) reference_mean /= static_cast<double>(n);

    std::vector<MetricsRow> rows;
    for (const auto &run : runs) {
        MetricsRow row;
        row.scenario = scenario;
        row.scheme = run.scheme;
        row.instances = n;
        row.skill_matching_ratio = smr;
        double profit = 0.0, coverage = 0.0, seconds = 0.0, ratio_sum = 0.0;
        std::size_t completed = 0;
        bool ratio_defined = n > 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = schedule_profit(run.schedules[i], instances[i]);
            profit += p;
            coverage += subtask_coverage(run.schedules[i], instances[i]);
            completed += run.schedules[i].num_assigned();
            seconds += run.schedules[i].wall_seconds;
            if (reference[i] > 0.0)
                ratio_sum += p / reference[i] - 1.0;
            else
                ratio_defined = false;
        }
        if (n > 0) {
            row.mean_profit = profit / static_cast<double>(n);
            row.subtask_coverage = coverage / static_cast<double>(n);
        }
        if (reference_mean > 0.0) row.performance_ratio = row.mean_profit / reference_mean - 1.0;
        if (ratio_defined) row.performance_ratio_per_instance = ratio_sum / static_cast<double>(n);
        if (completed > 0) row.avg_profit_per_completed_subtask = profit / static_cast<double>(completed);
        if (run.timed && n > 0) row.mean_wall_seconds = seconds / static_cast<double>(n);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace detail {

inline std::string csv_number(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace detail

/// Frozen column layout. A ratio column not selected by `mode` is left blank;
/// a selected but undefined ratio is written as NA.
inline std::string metrics_csv(const std::vector<MetricsRow> &rows, RatioMode mode = RatioMode::RatioOfMeans) {
    using detail::csv_number;
    auto opt = [](const std::optional<double> &x, bool selected) -> std::string {
        if (!selected) return "";
        return x ? csv_number(*x) : "NA";
    };
    const bool means = mode != RatioMode::MeanOfRatios;
    const bool ratios = mode != RatioMode::RatioOfMeans;
    std::ostringstream os;
    os << "schema,scenario,scheme,instances,mean_profit,performance_ratio,performance_ratio_per_instance,"
          "subtask_coverage,avg_profit_per_completed_subtask,mean_wall_seconds,skill_matching_ratio\n";
    for (const auto &r : rows) {
        os << kMetricsSchema << ',' << r.scenario << ',' << r.scheme << ',' << r.instances << ','
           << csv_number(r.mean_profit) << ',' << opt(r.performance_ratio, means) << ','
           << opt(r.performance_ratio_per_instance, ratios) << ',' << csv_number(r.subtask_coverage) << ','
           << opt(r.avg_profit_per_completed_subtask, true) << ','
           << (r.mean_wall_seconds ? csv_number(*r.mean_wall_seconds) : "") << ','
           << csv_number(r.skill_matching_ratio) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Solving

inline const std::vector<std::string> &known_schemes() {
    static const std::vector<std::string> names{"greedy", "ga", "chanet", "oracle"};
    return names;
}

struct SolverSuite {
    GaConfig ga;
    OracleLimits oracle;
    std::optional<ParamSet> policy;
    GraphConfig graph;
};

/// Solves one instance. `index` decorrelates the GA seed across instances.
inline Schedule solve_scheme(const std::string &scheme, const ProblemPtr &problem, const SolverSuite &suite,
                             std::size_t index = 0) {
    Schedule s;
    if (scheme == "greedy") {
        s = greedy_solve(problem);
    } else if (scheme == "ga") {
        GaConfig cfg = suite.ga;
        cfg.seed = derive_seed(suite.ga.seed, index);
        s = ga_solve(problem, cfg);
    } else if (scheme == "chanet") {
        if (!suite.policy) throw Error(ErrorCode::InvalidArgument, "scheme 'chanet' needs a checkpoint");
        s = greedy_decode(*suite.policy, problem, suite.graph);
    } else if (scheme == "oracle") {
        s = brute_force_optimal(problem, suite.oracle).schedule;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown scheme '" + scheme + "'");
    }
    s.solver = scheme;
    s.wall_seconds = 0.0;
    return s;
}

/// Solves `repeats` times and records the median wall time of the solve call.
inline Schedule timed_solve(const std::string &scheme, const ProblemPtr &problem, const SolverSuite &suite,
                            std::size_t index, int repeats = 3) {
    std::vector<double> times;
    Schedule s;
    for (int k = 0; k < std::max(1, repeats); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        s = solve_scheme(scheme, problem, suite, index);
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    s.wall_seconds = times[times.size() / 2];
    return s;
}

struct InstanceResult {
    std::string scenario;
    std::size_t index = 0;
    Instance instance;
    std::vector<std::pair<std::string, Schedule>> schedules;
};

struct CompareOptions {
    int parallel = 1;
    bool timing = false;
    int repeats = 3;
};

struct Report {
    std::vector<MetricsRow> rows;
    std::vector<InstanceResult> results;
};

/// Runs every scheme on every instance of one scenario. Timed runs are serial.
inline Report compare_schemes(const std::string &scenario, const std::vector<Instance> &instances,
                              const std::vector<std::string> &schemes, const SolverSuite &suite,
                              const CompareOptions &opt = {}) {
    for (const auto &s : schemes)
        if (std::find(known_schemes().begin(), known_schemes().end(), s) == known_schemes().end())
            throw Error(ErrorCode::InvalidArgument, "unknown scheme '" + s + "'");
    const auto problems = make_problems(instances);
    std::vector<SchemeRun> runs;
    for (const auto &s : schemes) runs.push_back({s, std::vector<Schedule>(instances.size()), opt.timing});
    for (auto &run : runs) {
        parallel_for(instances.size(), opt.timing ? 1 : opt.parallel, [&](std::size_t i) {
            run.schedules[i] = opt.timing ? timed_solve(run.scheme, problems[i], suite, i, opt.repeats)
                                          : solve_scheme(run.scheme, problems[i], suite, i);
        });
    }
    Report rep;
    rep.rows = compute_metrics(scenario, instances, runs);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        InstanceResult r{scenario, i, instances[i], {}};
        for (const auto &run : runs) r.schedules.emplace_back(run.scheme, run.schedules[i]);
        rep.results.push_back(std::move(r));
    }
    return rep;
}

/// One report covering every point of the sweep.
inline Report sweep_run(const SweepSpec &spec, const std::vector<std::string> &schemes, const SolverSuite &suite,
                        const CompareOptions &opt = {}) {
    Report all;
    for (int value : spec.values) {
        Report r = compare_schemes(sweep_point_id(spec, value), sweep_point_instances(spec, value), schemes, suite, opt);
        all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
        for (auto &x : r.results) all.results.push_back(std::move(x));
    }
    return all;
}

// ---------------------------------------------------------------------------
// Per-instance result files

inline nlohmann::ordered_json result_to_json(const InstanceResult &r, bool with_timing = false) {
    nlohmann::ordered_json doc;
    doc["format_version"] = kResultFormat;
    doc["scenario"] = r.scenario;
    doc["index"] = r.index;
    doc["instance"] = instance_to_json(r.instance);
    nlohmann::ordered_json schedules = nlohmann::ordered_json::array();
    for (const auto &[scheme, s] : r.schedules) {
        auto js = schedule_to_json(s, with_timing);
        js["profit"] = schedule_profit(s, r.instance);
        schedules.push_back(std::move(js));
    }
    doc["schedules"] = std::move(schedules);
    return doc;
}

inline InstanceResult result_from_json(const nlohmann::json &doc) {
    using namespace detail;
    check_format(doc, kResultFormat);
    InstanceResult r;
    const auto &scenario = field(doc, "scenario", "");
    if (!scenario.is_string()) parse_fail("/scenario", "expected a string");
    r.scenario = scenario.get<std::string>();
    r.index = static_cast<std::size_t>(integer(doc, "index", ""));
    r.instance = instance_from_json(field(doc, "instance", ""));
    const auto &schedules = array(doc, "schedules", "");
    for (const auto &js : schedules) {
        nlohmann::json copy = js;
        copy.erase("profit");
        Schedule s = schedule_from_json(copy);
        r.schedules.emplace_back(s.solver, std::move(s));
    }
    return r;
}

inline InstanceResult load_result(const std::string &text) { return result_from_json(detail::parse_document(text)); }

/// Rebuilds the metrics rows from result files (scenarios in order of first
/// appearance, instances by index).
inline std::vector<MetricsRow> metrics_from_results(std::vector<InstanceResult> results, bool timed = false) {
    std::vector<std::string> order;
    for (const auto &r : results)
        if (std::find(order.begin(), order.end(), r.scenario) == order.end()) order.push_back(r.scenario);
    std::vector<MetricsRow> rows;
    for (const auto &scenario : order) {
        std::vector<const InstanceResult *> group;
        for (const auto &r : results)
            if (r.scenario == scenario) group.push_back(&r);
        std::stable_sort(group.begin(), group.end(), [](auto *a, auto *b) { return a->index < b->index; });
        std::vector<Instance> instances;
        std::vector<SchemeRun> runs;
        for (const auto &[scheme, s] : group.front()->schedules) runs.push_back({scheme, {}, timed});
        for (const auto *r : group) {
            instances.push_back(r->instance);
            if (r->schedules.size() != runs.size())
                throw Error(ErrorCode::ShapeMismatch, "result files disagree on the scheme list");
            for (std::size_t k = 0; k < runs.size(); ++k) runs[k].schedules.push_back(r->schedules[k].second);
        }
        auto part = compute_metrics(scenario, instances, runs);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

}  // namespace dmalab
