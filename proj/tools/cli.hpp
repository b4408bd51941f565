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

// Command implementations for the `dmalab` tool. Exit codes: 0 success,
// 1 an invalid schedule was found, 2 bad usage or a failed command.

#include <glob.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dmalab/bench.hpp"
#include "dmalab/config.hpp"

namespace dmalab::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitError = 2;

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path.string() + "'");
    out << text;
}

/// Sorted matches of a shell pattern; a plain existing path matches itself.
inline std::vector<std::string> expand_glob(const std::string &pattern) {
    glob_t g{};
    std::vector<std::string> out;
    if (::glob(pattern.c_str(), 0, nullptr, &g) == 0)
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    ::globfree(&g);
    std::sort(out.begin(), out.end());
    if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no files match '" + pattern + "'");
    return out;
}

inline std::string index_name(std::size_t i) {
    std::ostringstream os;
    os << std::setw(4) << std::setfill('0') << i;
    return os.str();
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::vector<std::string> schemes;
    std::string instances;
    std::string checkpoint;
    int parallel = 1;
    bool timing = false;
    int count = 1;
    std::string ratio_mode = "ratio-of-means";
    std::optional<int> iterations;
    std::optional<int> lambda, rounds, lambda_pi;
    std::vector<std::string> positional;
};

class Runner {
public:
    Runner(const Options &o, std::ostream &out) : o_(o), out_(out) {
        if (!o_.config.empty()) cfg_ = load_lab_config(read_file(o_.config));
        if (o_.seed) {
            cfg_.gen.seed = *o_.seed;
            if (cfg_.sweep) cfg_.sweep->base.seed = *o_.seed;
            cfg_.ppo.seed = *o_.seed;
            cfg_.ga.seed = *o_.seed;
        }
        if (o_.iterations) cfg_.ppo.iterations = *o_.iterations;
        if (o_.lambda) cfg_.ppo.dims.lambda = *o_.lambda;
        if (o_.rounds) cfg_.ppo.dims.rounds = *o_.rounds;
        if (o_.lambda_pi) cfg_.ppo.dims.lambda_pi = *o_.lambda_pi;
        cfg_.ppo.parallel = o_.parallel;
    }

    int generate() {
        std::size_t written = 0;
        if (cfg_.sweep) {
            for (int value : cfg_.sweep->values) {
                const auto id = sweep_point_id(*cfg_.sweep, value);
                const auto batch = sweep_point_instances(*cfg_.sweep, value);
                for (std::size_t i = 0; i < batch.size(); ++i, ++written)
                    write_file(fs::path(o_.out) / id / ("instance_" + index_name(i) + ".json"), save_instance(batch[i]));
            }
        } else {
            const auto batch = generate_batch(cfg_.gen, static_cast<std::size_t>(std::max(1, o_.count)));
            for (std::size_t i = 0; i < batch.size(); ++i, ++written)
                write_file(fs::path(o_.out) / ("instance_" + index_name(i) + ".json"), save_instance(batch[i]));
        }
        out_ << "wrote " << written << " instances to " << o_.out << "\n";
        return kExitOk;
    }

    int solve() {
        const auto suite = solvers();
        const auto schemes = o_.schemes.empty() ? std::vector<std::string>{"greedy"} : o_.schemes;
        for (const auto &path : expand_glob(require(o_.instances, "--instances"))) {
            const Instance inst = load_instance(read_file(path));
            const auto problem = make_problem(inst);
            for (const auto &scheme : schemes) {
                const Schedule s = o_.timing ? timed_solve(scheme, problem, suite, 0) : solve_scheme(scheme, problem, suite, 0);
                check_valid(inst, s, path);
                const auto dest = fs::path(o_.out) / (fs::path(path).stem().string() + "." + scheme + ".json");
                write_file(dest, save_schedule(s, o_.timing));
                out_ << path << " " << scheme << " profit " << schedule_profit(s, inst) << "\n";
            }
        }
        return kExitOk;
    }

    int train() {
        const TrainResult r = dmalab::train(cfg_.ppo, cfg_.gen, [&](const TrainLogRow &row) {
            if (row.validation_profit) out_ << "iteration " << row.iteration << " validation " << *row.validation_profit << "\n";
            return true;
        });
        write_file(fs::path(o_.out) / "checkpoint_best.json", save_checkpoint(r.best));
        write_file(fs::path(o_.out) / "checkpoint_last.json", save_checkpoint(r.last));
        write_file(fs::path(o_.out) / "training_log.csv", training_log_csv(r.log, o_.timing));
        out_ << "best validation " << r.best_validation << " at iteration " << r.best_iteration << "\n";
        return kExitOk;
    }

    int eval() {
        const ParamSet p = policy();
        std::vector<std::string> names;
        std::vector<Instance> instances;
        if (!o_.instances.empty()) {
            for (const auto &path : expand_glob(o_.instances)) {
                names.push_back(path);
                instances.push_back(load_instance(read_file(path)));
            }
        } else {
            instances = validation_set(cfg_.ppo, cfg_.gen);
            for (std::size_t i = 0; i < instances.size(); ++i) names.push_back("validation_" + index_name(i));
        }
        const Evaluation ev = evaluate_policy(p, make_problems(instances), cfg_.ppo.graph, o_.parallel);
        std::ostringstream csv;
        csv.precision(17);
        csv << "instance,profit,coverage\n";
        for (std::size_t i = 0; i < instances.size(); ++i) {
            check_valid(instances[i], ev.schedules[i], names[i]);
            csv << names[i] << ',' << ev.profits[i] << ',' << subtask_coverage(ev.schedules[i], instances[i]) << '\n';
        }
        write_file(fs::path(o_.out) / "eval.csv", csv.str());
        out_ << "mean profit " << ev.mean_profit() << " over " << instances.size() << " instances\n";
        return kExitOk;
    }

    int compare() {
        const auto suite = solvers();
        const auto schemes = o_.schemes.empty() ? std::vector<std::string>{"greedy", "ga"} : o_.schemes;
        CompareOptions opt;
        opt.parallel = o_.parallel;
        opt.timing = o_.timing;
        const RatioMode mode = ratio_mode_from(o_.ratio_mode);
        Report rep;
        if (!o_.instances.empty()) {
            std::vector<Instance> instances;
            for (const auto &path : expand_glob(o_.instances)) instances.push_back(load_instance(read_file(path)));
            rep = compare_schemes("instances", instances, schemes, suite, opt);
        } else if (cfg_.sweep) {
            rep = sweep_run(*cfg_.sweep, schemes, suite, opt);
        } else {
            rep = compare_schemes("default", generate_batch(cfg_.gen, static_cast<std::size_t>(std::max(1, o_.count))),
                                  schemes, suite, opt);
        }
        for (const auto &r : rep.results) {
            for (const auto &[scheme, s] : r.schedules) check_valid(r.instance, s, r.scenario + "/" + index_name(r.index));
            write_file(fs::path(o_.out) / "results" / r.scenario / (index_name(r.index) + ".json"),
                       result_to_json(r, o_.timing).dump(2) + "\n");
        }
        const std::string csv = metrics_csv(rep.rows, mode);
        write_file(fs::path(o_.out) / "metrics.csv", csv);
        out_ << csv;
        return kExitOk;
    }

    int validate() {
        if (o_.positional.size() != 2) throw Error(ErrorCode::InvalidArgument, "validate needs INSTANCE SCHEDULE");
        const Instance inst = load_instance(read_file(o_.positional[0]));
        const Schedule s = load_schedule(read_file(o_.positional[1]));
        const ValidationReport rep = validate_schedule(inst, s);
        if (rep.valid) {
            out_ << "valid, profit " << schedule_profit(s, inst) << "\n";
            return kExitOk;
        }
        out_ << "invalid, " << rep.violations.size() << " violation(s)\n";
        for (const auto &v : rep.violations)
            out_ << "  " << to_string(v.constraint) << " subtask " << v.subtask << ": " << v.detail << "\n";
        return kExitInvalid;
    }

    int oracle() {
        for (const auto &path : expand_glob(require(o_.instances, "--instances"))) {
            const Instance inst = load_instance(read_file(path));
            const OracleResult r = brute_force_optimal(inst, cfg_.oracle);
            Schedule s = r.schedule;
            s.solver = "oracle";
            write_file(fs::path(o_.out) / (fs::path(path).stem().string() + ".oracle.json"), save_schedule(s));
            out_ << path << " optimum " << r.optimum << " states " << r.states << "\n";
        }
        return kExitOk;
    }

private:
    static const std::string &require(const std::string &v, const char *flag) {
        if (v.empty()) throw Error(ErrorCode::InvalidArgument, std::string(flag) + " is required");
        return v;
    }

    static void check_valid(const Instance &inst, const Schedule &s, const std::string &where) {
        const auto rep = validate_schedule(inst, s);
        if (!rep.valid)
            throw Error(ErrorCode::InfeasibleAction, "solver produced an invalid schedule for " + where + ": " +
                                                         rep.violations.front().detail);
    }

    [[nodiscard]] ParamSet policy() const {
        return load_checkpoint(read_file(require(o_.checkpoint, "--checkpoint")), cfg_.ppo.dims);
    }

    [[nodiscard]] SolverSuite solvers() const {
        SolverSuite s;
        s.ga = cfg_.ga;
        s.oracle = cfg_.oracle;
        s.graph = cfg_.ppo.graph;
        if (!o_.checkpoint.empty()) s.policy = policy();
        return s;
    }

    const Options &o_;
    std::ostream &out_;
    LabConfig cfg_;
};

inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    CLI::App app{"Solver lab for dependency-aware multi-task allocation", "dmalab"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App *sub) {
        sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Seed overriding every seed in the configuration");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--parallel", o.parallel, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--timing", o.timing, "Record wall-clock times (outputs are then not reproducible)");
    };
    auto dims = [&](CLI::App *sub) {
        sub->add_option("--lambda", o.lambda, "Embedding width");
        sub->add_option("--rounds", o.rounds, "Attention rounds");
        sub->add_option("--lambda-pi", o.lambda_pi, "Policy hidden width");
    };

    auto *gen = app.add_subcommand("generate", "Write random instances");
    common(gen);
    gen->add_option("--count", o.count, "Instances when no sweep is configured")->check(CLI::PositiveNumber);

    auto *solve = app.add_subcommand("solve", "Solve instance files with the named schemes");
    common(solve);
    solve->add_option("--instances", o.instances, "Instance files (glob)");
    solve->add_option("--scheme", o.schemes, "greedy, ga, chanet, oracle")->delimiter(',');
    solve->add_option("--checkpoint", o.checkpoint, "Policy checkpoint for the chanet scheme");
    dims(solve);

    auto *train = app.add_subcommand("train", "Train the policy");
    common(train);
    train->add_option("--iterations", o.iterations, "Training iterations");
    dims(train);

    auto *eval = app.add_subcommand("eval", "Greedy-decode a checkpoint on instances");
    common(eval);
    eval->add_option("--instances", o.instances, "Instance files (glob); defaults to the validation set");
    eval->add_option("--checkpoint", o.checkpoint, "Policy checkpoint")->required();
    dims(eval);

    auto *compare = app.add_subcommand("compare", "Compare schemes and write metrics");
    common(compare);
    compare->add_option("--instances", o.instances, "Instance files (glob); otherwise the configured sweep");
    compare->add_option("--scheme", o.schemes, "greedy, ga, chanet, oracle")->delimiter(',');
    compare->add_option("--checkpoint", o.checkpoint, "Policy checkpoint for the chanet scheme");
    compare->add_option("--count", o.count, "Instances when neither files nor a sweep are given")
        ->check(CLI::PositiveNumber);
    compare->add_option("--ratio-mode", o.ratio_mode, "ratio-of-means, mean-of-ratios or both")
        ->check(CLI::IsMember({"ratio-of-means", "mean-of-ratios", "both"}));
    dims(compare);

    auto *validate = app.add_subcommand("validate", "Check a schedule against an instance");
    validate->add_option("files", o.positional, "INSTANCE SCHEDULE")->expected(2)->required();

    auto *oracle = app.add_subcommand("oracle", "Exact optimum of small instances");
    common(oracle);
    oracle->add_option("--instances", o.instances, "Instance files (glob)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        Runner r(o, out);
        if (*gen) return r.generate();
        if (*solve) return r.solve();
        if (*train) return r.train();
        if (*eval) return r.eval();
        if (*compare) return r.compare();
        if (*validate) return r.validate();
        if (*oracle) return r.oracle();
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

}  // namespace dmalab::cli
