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
 * @brief Proximal policy optimisation for the assignment policy.
 *
 * One iteration samples an episode on every instance of the current batch,
 * computes generalised advantages, and takes `ppo_epochs` full-batch Adam
 * steps on the clipped surrogate loss. The batch is regenerated every
 * `refresh_every` iterations and the greedy policy is scored on a fixed
 * validation set every `validate_every` iterations.
 */

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dmalab/chanet.hpp"
#include "dmalab/instance_gen.hpp"
#include "dmalab/parallel.hpp"

namespace dmalab {

struct PpoConfig {
    int iterations = 10000;
    int batch_size = 20;
    int refresh_every = 20;
    int validate_every = 10;
    int validation_size = 100;
    std::uint64_t validation_seed = 0x5EED0F0A11DA7E;
    int ppo_epochs = 3;
    double clip = 0.2;
    double coef_policy = 1.0;
    double coef_value = 0.5;
    double coef_entropy = 0.01;
    double gamma = 1.0;
    double gae_lambda = 0.98;
    double learning_rate = 2e-4;
    bool normalize_advantages = true;
    NetDims dims;
    GraphConfig graph;
    EnvConfig env;
    std::uint64_t seed = 0;
    int parallel = 1;
};

inline void check_config(const PpoConfig &c) {
    auto fail = [](const std::string &m) { throw Error(ErrorCode::InvalidArgument, "PpoConfig: " + m); };
    if (!(c.clip > 0.0 && c.clip < 1.0)) fail("clip must lie in (0, 1)");
    if (c.ppo_epochs < 1) fail("ppo_epochs must be at least 1");
    if (c.iterations < 0 || c.batch_size < 1 || c.refresh_every < 1 || c.validate_every < 1)
        fail("iteration counts must be positive");
    if (c.validation_size < 0) fail("validation_size must be non-negative");
    if (!(c.learning_rate > 0.0)) fail("learning_rate must be positive");
    if (c.gamma < 0.0 || c.gamma > 1.0 || c.gae_lambda < 0.0 || c.gae_lambda > 1.0)
        fail("gamma and gae_lambda must lie in [0, 1]");
}

struct StepRecord {
    GraphState graph;
    std::vector<Action> feasible;
    int action = 0;  // index into `feasible`
    double log_prob = 0.0;
    double reward = 0.0;
    double value = 0.0;
};

struct Trajectory {
    std::vector<StepRecord> steps;
    bool terminal = true;
    Schedule schedule;
    double profit = 0.0;

    [[nodiscard]] double total_reward() const {
        double r = 0.0;
        for (const auto &s : steps) r += s.reward;
        return r;
    }
};

namespace detail {

inline int sample_index(const Eigen::VectorXd &log_probs, Rng &rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < log_probs.size(); ++i) {
        acc += std::exp(log_probs(i));
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(log_probs.size()) - 1;
}

inline int argmax_index(const Eigen::VectorXd &log_probs) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < log_probs.size(); ++i)
        if (log_probs(i) > log_probs(best)) best = i;
    return static_cast<int>(best);
}

}  // namespace detail

/// One sampled episode on `problem`.
inline Trajectory rollout(const ParamSet &params, const ProblemPtr &problem, std::uint64_t seed,
                          const GraphConfig &gcfg = {}, const EnvConfig &ecfg = {}) {
    Rng rng(seed);
    EnvState st = reset(problem, ecfg);
    GraphState gs = build_graph(st, gcfg);
    Trajectory tr;
    while (!st.done) {
        const PolicyOutput out = evaluate_state(gs, st.feasible, params);
        StepRecord rec;
        rec.graph = gs;
        rec.feasible = st.feasible;
        rec.action = detail::sample_index(out.log_probs, rng);
        rec.log_prob = out.log_probs(rec.action);
        rec.value = out.value;
        const Action a = st.feasible[rec.action];
        rec.reward = step(st, a).reward;
        update_graph(gs, st, a);
        tr.steps.push_back(std::move(rec));
    }
    tr.schedule = extract_schedule(st, "chanet");
    tr.profit = total_profit(st);
    return tr;
}

/// One episode per problem; episode i uses the seed derive_seed(seed, i).
inline std::vector<Trajectory> collect_rollouts(const ParamSet &params, const std::vector<ProblemPtr> &problems,
                                                std::uint64_t seed, const PpoConfig &cfg = {}) {
    std::vector<Trajectory> out(problems.size());
    parallel_for(problems.size(), cfg.parallel, [&](std::size_t i) {
        out[i] = rollout(params, problems[i], derive_seed(seed, i), cfg.graph, cfg.env);
    });
    return out;
}

struct Advantages {
    std::vector<double> advantages;
    std::vector<double> returns;
};

/// GAE with a zero bootstrap after the last step.
inline Advantages compute_gae(const std::vector<double> &rewards, const std::vector<double> &values, double gamma,
                              double lambda) {
    if (rewards.size() != values.size()) throw Error(ErrorCode::ShapeMismatch, "compute_gae: length mismatch");
    Advantages out;
    const std::size_t n = rewards.size();
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    double next_value = 0.0, gae = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const double delta = rewards[k] + gamma * next_value - values[k];
        gae = delta + gamma * lambda * gae;
        out.advantages[k] = gae;
        out.returns[k] = gae + values[k];
        next_value = values[k];
    }
    return out;
}

inline Advantages compute_gae(const Trajectory &tr, double gamma, double lambda) {
    std::vector<double> r, v;
    for (const auto &s : tr.steps) {
        r.push_back(s.reward);
        v.push_back(s.value);
    }
    return compute_gae(r, v, gamma, lambda);
}

/// A flattened training batch.
struct PpoBatch {
    std::vector<const StepRecord *> steps;
    std::vector<double> advantages;
    std::vector<double> returns;

    [[nodiscard]] std::size_t size() const { return steps.size(); }
};

inline PpoBatch make_batch(const std::vector<Trajectory> &trajs, const PpoConfig &cfg) {
    PpoBatch b;
    for (const auto &tr : trajs) {
        const Advantages adv = compute_gae(tr, cfg.gamma, cfg.gae_lambda);
        for (std::size_t k = 0; k < tr.steps.size(); ++k) {
            b.steps.push_back(&tr.steps[k]);
            b.advantages.push_back(adv.advantages[k]);
            b.returns.push_back(adv.returns[k]);
        }
    }
    if (cfg.normalize_advantages && b.size() > 1) {
        double mean = 0.0, var = 0.0;
        for (double a : b.advantages) mean += a;
        mean /= static_cast<double>(b.size());
        for (double a : b.advantages) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / static_cast<double>(b.size()));
        for (double &a : b.advantages) a = (a - mean) / (sd + 1e-8);
    }
    return b;
}

struct PpoStats {
    double loss = 0.0;
    double loss_policy = 0.0;
    double loss_value = 0.0;
    double entropy = 0.0;
    /// Largest |ratio - 1| seen and the clipped ratio range, for diagnostics.
    double max_ratio_deviation = 0.0;
    double min_clipped_ratio = 1.0;
    double max_clipped_ratio = 1.0;
};

/// Mean PPO loss over `batch`. When `grads` is given, the gradient of that
/// mean is added into it.
inline PpoStats ppo_loss(const ParamSet &params, const PpoBatch &batch, const PpoConfig &cfg,
                         std::vector<Matrix> *grads = nullptr) {
    PpoStats s;
    if (batch.size() == 0) throw Error(ErrorCode::InvalidArgument, "ppo_loss: empty batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const StepRecord &rec = *batch.steps[i];
        ad::Tape t(grads != nullptr);
        const BoundParams b = bind_params(t, params, grads);
        const EncodedState e = encode(t, b, rec.graph);
        const ad::Var logp = t.log_softmax(policy_logits(t, b, action_embeddings(t, e, rec.feasible)));
        const ad::Var value = value_head(t, b, e.hs);

        const ad::Var ratio =
            t.exp(t.add(t.pick(logp, rec.action), t.constant(Matrix::Constant(1, 1, -rec.log_prob))));
        const ad::Var clipped = t.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
        const ad::Var adv = t.constant(Matrix::Constant(1, 1, batch.advantages[i]));
        const ad::Var surrogate = t.minimum(t.mul(ratio, adv), t.mul(clipped, adv));
        const ad::Var value_err =
            t.square(t.add(value, t.constant(Matrix::Constant(1, 1, -batch.returns[i]))));
        const ad::Var entropy = t.scale(t.sum(t.mul(t.exp(logp), logp)), -1.0);
        const ad::Var loss = t.add(t.add(t.scale(surrogate, -cfg.coef_policy), t.scale(value_err, cfg.coef_value)),
                                   t.scale(entropy, -cfg.coef_entropy));

        const double r = t.scalar(ratio);
        s.max_ratio_deviation = std::max(s.max_ratio_deviation, std::abs(r - 1.0));
        s.min_clipped_ratio = std::min(s.min_clipped_ratio, t.scalar(clipped));
        s.max_clipped_ratio = std::max(s.max_clipped_ratio, t.scalar(clipped));
        s.loss_policy += -t.scalar(surrogate) * inv_n;
        s.loss_value += t.scalar(value_err) * inv_n;
        s.entropy += t.scalar(entropy) * inv_n;
        s.loss += t.scalar(loss) * inv_n;
        if (grads) t.backward(loss, inv_n);
    }
    return s;
}

/// `ppo_epochs` full-batch Adam steps; returns the statistics of the first
/// epoch (measured before any parameter change).
inline PpoStats ppo_update(ParamSet &params, ad::Adam &opt, const PpoBatch &batch, const PpoConfig &cfg) {
    PpoStats first;
    for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
        std::vector<Matrix> grads = params.zeros_like();
        const PpoStats s = ppo_loss(params, batch, cfg, &grads);
        if (epoch == 0) first = s;
        opt.step(params.tensors(), grads);
    }
    return first;
}

struct Evaluation {
    std::vector<Schedule> schedules;
    std::vector<double> profits;

    [[nodiscard]] double mean_profit() const {
        if (profits.empty()) return 0.0;
        double s = 0.0;
        for (double p : profits) s += p;
        return s / static_cast<double>(profits.size());
    }
};

/// Greedy decoding: the most probable feasible action at every step.
inline Schedule greedy_decode(const ParamSet &params, const ProblemPtr &problem, const GraphConfig &gcfg = {},
                              const EnvConfig &ecfg = {}) {
    EnvState st = reset(problem, ecfg);
    GraphState gs = build_graph(st, gcfg);
    while (!st.done) {
        const Action a = st.feasible[detail::argmax_index(evaluate_state(gs, st.feasible, params, false).log_probs)];
        step(st, a);
        update_graph(gs, st, a);
    }
    return extract_schedule(st, "chanet");
}

inline Evaluation evaluate_policy(const ParamSet &params, const std::vector<ProblemPtr> &problems,
                                  const GraphConfig &gcfg = {}, int parallel = 1) {
    Evaluation ev;
    ev.schedules.resize(problems.size());
    ev.profits.resize(problems.size());
    parallel_for(problems.size(), parallel, [&](std::size_t i) {
        ev.schedules[i] = greedy_decode(params, problems[i], gcfg);
        ev.profits[i] = schedule_profit(ev.schedules[i], problems[i]->instance());
    });
    return ev;
}

inline std::vector<ProblemPtr> make_problems(const std::vector<Instance> &instances) {
    std::vector<ProblemPtr> out;
    for (const auto &i : instances) out.push_back(make_problem(i));
    return out;
}

struct TrainLogRow {
    int iteration = 0;
    double mean_batch_return = 0.0;
    std::optional<double> validation_profit;
    double loss_policy = 0.0;
    double loss_value = 0.0;
    double entropy = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    ParamSet best;
    ParamSet last;
    double best_validation = -std::numeric_limits<double>::infinity();
    int best_iteration = 0;
    std::vector<TrainLogRow> log;
};

/// Called after every iteration; return false to stop early.
using TrainCallback = std::function<bool(const TrainLogRow &)>;

inline std::vector<Instance> validation_set(const PpoConfig &cfg, const GenConfig &gen) {
    GenConfig g = gen;
    g.seed = cfg.validation_seed;
    return generate_batch(g, static_cast<std::size_t>(cfg.validation_size));
}

inline TrainResult train(const PpoConfig &cfg, const GenConfig &gen, const TrainCallback &callback = {}) {
    check_config(cfg);
    check_config(gen);
    const auto clock_start = std::chrono::steady_clock::now();
    TrainResult res;
    ParamSet params = init_params(cfg.dims, derive_seed(cfg.seed, 0));
    ad::Adam opt({cfg.learning_rate});
    const std::vector<ProblemPtr> validation = make_problems(validation_set(cfg, gen));
    std::vector<ProblemPtr> batch;
    res.best = params;
    for (int it = 1; it <= cfg.iterations; ++it) {
        if ((it - 1) % cfg.refresh_every == 0) {
            GenConfig g = gen;
            g.seed = derive_seed(derive_seed(cfg.seed, 1), static_cast<std::uint64_t>((it - 1) / cfg.refresh_every));
            batch = make_problems(generate_batch(g, static_cast<std::size_t>(cfg.batch_size)));
        }
        const auto trajs = collect_rollouts(params, batch, derive_seed(derive_seed(cfg.seed, 2), it), cfg);
        TrainLogRow row;
        row.iteration = it;
        for (const auto &tr : trajs) row.mean_batch_return += tr.total_reward() / static_cast<double>(trajs.size());
        const PpoBatch b = make_batch(trajs, cfg);
        if (b.size() > 0) {
            const PpoStats s = ppo_update(params, opt, b, cfg);
            row.loss_policy = s.loss_policy;
            row.loss_value = s.loss_value;
            row.entropy = s.entropy;
        }
        if (it % cfg.validate_every == 0 && !validation.empty()) {
            const double v = evaluate_policy(params, validation, cfg.graph, cfg.parallel).mean_profit();
            row.validation_profit = v;
            if (v > res.best_validation) {
                res.best_validation = v;
                res.best_iteration = it;
                res.best = params;
            }
        }
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
        res.log.push_back(row);
        if (callback && !callback(row)) break;
    }
    res.last = params;
    if (res.best_iteration == 0) res.best = params;
    return res;
}

/// Training log as CSV. Timing is written only when `with_timing` is set so
/// that repeated runs produce identical files.
inline std::string training_log_csv(const std::vector<TrainLogRow> &log, bool with_timing = false) {
    std::ostringstream os;
    os.precision(17);
    os << "iteration,mean_batch_return,validation_profit,loss_policy,loss_value,entropy,wall_seconds\n";
    for (const auto &r : log) {
        os << r.iteration << ',' << r.mean_batch_return << ',';
        if (r.validation_profit) os << *r.validation_profit;
        os << ',' << r.loss_policy << ',' << r.loss_value << ',' << r.entropy << ',';
        if (with_timing) os << r.wall_seconds;
        os << '\n';
    }
    return os.str();
}

}  // namespace dmalab
