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
 * @brief Compound-path graph attention encoder with policy and value heads.
 *
 * Raw node and edge features are projected to width lambda. Each of K rounds
 * first updates every worker from its worker and subtask neighborhoods, then
 * every subtask from its subtask neighborhood and the freshly updated
 * workers. Mean pooling gives the state vector; an action is the
 * concatenation of its worker, its subtask and the state.
 */

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmalab/autodiff.hpp"
#include "dmalab/random.hpp"
#include "dmalab/relgraph.hpp"

namespace dmalab {

struct NetDims {
    int lambda = 16;
    int rounds = 4;
    int lambda_pi = 128;

    friend bool operator==(const NetDims &, const NetDims &) = default;
};

/// Compound paths in the order uu, uv, vu, vv.
enum class Path { UU = 0, UV = 1, VU = 2, VV = 3 };
inline constexpr std::array<const char *, 4> kPathNames{"uu", "uv", "vu", "vv"};

/// Named tensors in a fixed order. Linear maps are stored out x in.
class ParamSet {
public:
    ParamSet() = default;
    explicit ParamSet(NetDims dims) : dims_(dims) {
        if (dims.lambda <= 0 || dims.rounds < 0 || dims.lambda_pi <= 0)
            throw Error(ErrorCode::InvalidArgument, "network dimensions must be positive");
        const int l = dims.lambda, h = dims.lambda_pi;
        add("w0_u", l, kWorkerFeatures);
        add("w0_v", l, kSubtaskFeatures);
        add("w_uu", l, 1);
        add("w_uv", l, 2);
        add("w_vv", l, 2);
        for (int k = 0; k < dims.rounds; ++k) {
            const std::string r = "round" + std::to_string(k) + ".";
            for (const char *p : kPathNames) {
                add(r + p + ".a", 1, l);
                add(r + p + ".we", l, 3 * l);
                add(r + p + ".wts", l, 2 * l);
            }
            add(r + "w_u", l, 3 * l);
            add(r + "w_v", l, 3 * l);
        }
        for (const char *head : {"policy", "value"}) {
            const int in = std::string(head) == "policy" ? 4 * l : 2 * l;
            const std::string p = std::string(head) + ".";
            add(p + "w1", h, in);
            add(p + "b1", 1, h);
            add(p + "w2", h, h);
            add(p + "b2", 1, h);
            add(p + "w3", 1, h);
            add(p + "b3", 1, 1);
        }
    }

    [[nodiscard]] const NetDims &dims() const { return dims_; }
    [[nodiscard]] std::size_t size() const { return tensors_.size(); }
    [[nodiscard]] const std::string &name(std::size_t i) const { return names_[i]; }
    [[nodiscard]] Matrix &operator[](std::size_t i) { return tensors_[i]; }
    [[nodiscard]] const Matrix &operator[](std::size_t i) const { return tensors_[i]; }
    [[nodiscard]] std::vector<Matrix> &tensors() { return tensors_; }
    [[nodiscard]] const std::vector<Matrix> &tensors() const { return tensors_; }

    [[nodiscard]] std::size_t index(const std::string &name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return i;
        throw Error(ErrorCode::InvalidArgument, "no parameter named " + name);
    }
    [[nodiscard]] const Matrix &at(const std::string &name) const { return tensors_[index(name)]; }
    [[nodiscard]] Matrix &at(const std::string &name) { return tensors_[index(name)]; }

    // Positions of the fixed layout.
    static constexpr std::size_t kW0u = 0, kW0v = 1, kWuu = 2, kWuv = 3, kWvv = 4, kRoundBase = 5, kPerRound = 14;
    [[nodiscard]] static std::size_t attn(int round, Path p, int which) {
        return kRoundBase + kPerRound * round + 3 * static_cast<std::size_t>(p) + which;
    }
    [[nodiscard]] static std::size_t w_u(int round) { return kRoundBase + kPerRound * round + 12; }
    [[nodiscard]] static std::size_t w_v(int round) { return kRoundBase + kPerRound * round + 13; }
    [[nodiscard]] std::size_t head(bool policy) const {
        return kRoundBase + kPerRound * static_cast<std::size_t>(dims_.rounds) + (policy ? 0 : 6);
    }

    [[nodiscard]] std::size_t num_scalars() const {
        std::size_t n = 0;
        for (const auto &t : tensors_) n += static_cast<std::size_t>(t.size());
        return n;
    }

    [[nodiscard]] std::vector<Matrix> zeros_like() const {
        std::vector<Matrix> out;
        for (const auto &t : tensors_) out.push_back(Matrix::Zero(t.rows(), t.cols()));
        return out;
    }

    friend bool operator==(const ParamSet &a, const ParamSet &b) {
        return a.dims_ == b.dims_ && a.names_ == b.names_ && a.tensors_ == b.tensors_;
    }

private:
    void add(std::string name, int rows, int cols) {
        names_.push_back(std::move(name));
        tensors_.push_back(Matrix::Zero(rows, cols));
    }

    NetDims dims_;
    std::vector<std::string> names_;
    std::vector<Matrix> tensors_;
};

/// Uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)]; a bias uses the fan-in of
/// its layer.
inline ParamSet init_params(NetDims dims, std::uint64_t seed) {
    ParamSet p(dims);
    Rng rng(seed);
    for (std::size_t i = 0; i < p.size(); ++i) {
        Matrix &t = p[i];
        const bool bias = p.name(i).find(".b") != std::string::npos;
        const double fan_in = bias ? static_cast<double>(p[i - 1].cols()) : static_cast<double>(t.cols());
        const double bound = 1.0 / std::sqrt(fan_in);
        for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.uniform(-bound, bound);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Differentiable forward pass.

/// Tape handles for every tensor of a ParamSet.
struct BoundParams {
    std::vector<ad::Var> v;
    const ParamSet *params = nullptr;

    [[nodiscard]] ad::Var operator[](std::size_t i) const { return v[i]; }
};

/// Binds `p` on the tape; gradients go to `grads` (same layout) when given.
inline BoundParams bind_params(ad::Tape &t, const ParamSet &p, std::vector<Matrix> *grads = nullptr) {
    BoundParams b;
    b.params = &p;
    for (std::size_t i = 0; i < p.size(); ++i) b.v.push_back(t.param(p[i], grads ? &(*grads)[i] : nullptr));
    return b;
}

struct EncodedState {
    ad::Var hu, hv, hs;
};

namespace detail {

/// Batched attention over one compound path. Per edge the logit
/// elu(a^T we [h_t; h_s; h_ts]) is split into the three blocks of we^T a so
/// that target and source terms are computed once per node. Edge vectors
/// h_ts = w_edge f_ts are never formed: the edge blocks are composed with
/// w_edge first, which keeps the per-edge work at the raw feature width.
inline ad::Var attend(ad::Tape &t, const BoundParams &p, int round, Path path, ad::Var ht, ad::Var hs,
                      const PathEdges &edges, ad::Var w_edge) {
    const int l = p.params->dims().lambda;
    const ad::Var a = p[ParamSet::attn(round, path, 0)];
    const ad::Var we = p[ParamSet::attn(round, path, 1)];
    const ad::Var wts = p[ParamSet::attn(round, path, 2)];
    const ad::Var c = t.matmul(a, we);
    const ad::Var lt = t.matmul_nt(ht, t.slice_cols(c, 0, l));
    const ad::Var ls = t.matmul_nt(hs, t.slice_cols(c, l, l));
    const ad::Var ce = t.matmul(t.slice_cols(c, 2 * l, l), w_edge);
    const ad::Var src = t.matmul_nt(hs, t.slice_cols(wts, 0, l));
    const ad::Var m = t.matmul(t.slice_cols(wts, l, l), w_edge);
    return t.elu(t.segment_attention(lt, ls, ce, src, m, edges.feat, edges.source, edges.offsets));
}

inline ad::Var mlp(ad::Tape &t, const BoundParams &p, std::size_t base, ad::Var x) {
    const ad::Var z1 = t.tanh(t.add(t.matmul_nt(x, p[base]), p[base + 1]));
    const ad::Var z2 = t.tanh(t.add(t.matmul_nt(z1, p[base + 2]), p[base + 3]));
    return t.add(t.matmul_nt(z2, p[base + 4]), p[base + 5]);
}

}  // namespace detail

/// Round-K node vectors and the pooled state vector. K = 0 returns the raw
/// projections.
inline EncodedState encode(ad::Tape &t, const BoundParams &p, const GraphState &gs) {
    const auto &g = gs.graph;
    const auto &cn = gs.nbrs;
    ad::Var hu = t.matmul_nt(t.constant(g.worker_feats), p[ParamSet::kW0u]);
    ad::Var hv = t.matmul_nt(t.constant(g.subtask_feats), p[ParamSet::kW0v]);
    const ad::Var w_uu = p[ParamSet::kWuu], w_uv = p[ParamSet::kWuv], w_vv = p[ParamSet::kWvv];
    for (int k = 0; k < p.params->dims().rounds; ++k) {
        const ad::Var agg_uu = detail::attend(t, p, k, Path::UU, hu, hu, cn.uu, w_uu);
        const ad::Var agg_uv = detail::attend(t, p, k, Path::UV, hu, hv, cn.uv, w_uv);
        const ad::Var hu_next = t.elu(t.matmul_nt(t.concat_cols({hu, agg_uu, agg_uv}), p[ParamSet::w_u(k)]));
        const ad::Var agg_vv = detail::attend(t, p, k, Path::VV, hv, hv, cn.vv, w_vv);
        const ad::Var agg_vu = detail::attend(t, p, k, Path::VU, hv, hu_next, cn.vu, w_uv);
        hv = t.elu(t.matmul_nt(t.concat_cols({hv, agg_vv, agg_vu}), p[ParamSet::w_v(k)]));
        hu = hu_next;
    }
    const ad::Var hs = t.concat_cols({t.mean_rows(hu), t.mean_rows(hv)});
    return {hu, hv, hs};
}

/// Rows cat(h_u[worker], h_v[subtask], h_s), one per action.
inline ad::Var action_embeddings(ad::Tape &t, const EncodedState &e, const std::vector<Action> &actions) {
    std::vector<int> workers, subtasks;
    for (const Action &a : actions) {
        workers.push_back(a.worker);
        subtasks.push_back(a.subtask);
    }
    return t.concat_cols({t.gather_rows(e.hu, workers), t.gather_rows(e.hv, subtasks),
                          t.gather_rows(e.hs, std::vector<int>(actions.size(), 0))});
}

/// Column of policy logits, one per action embedding row.
inline ad::Var policy_logits(ad::Tape &t, const BoundParams &p, ad::Var action_rows) {
    return detail::mlp(t, p, p.params->head(true), action_rows);
}

inline ad::Var value_head(ad::Tape &t, const BoundParams &p, ad::Var hs) {
    return detail::mlp(t, p, p.params->head(false), hs);
}

// ---------------------------------------------------------------------------
// Plain evaluation.

struct Embeddings {
    Matrix h_u, h_v, h_s;
};

inline Embeddings embed_nodes(const GraphState &gs, const ParamSet &p) {
    ad::Tape t(false);
    const EncodedState e = encode(t, bind_params(t, p), gs);
    return {t.value(e.hu), t.value(e.hv), t.value(e.hs)};
}

/// Initial node vectors before any attention round.
inline Embeddings project_raw(const MultiRelationGraph &g, const ParamSet &p) {
    Embeddings e;
    e.h_u = g.worker_feats * p[ParamSet::kW0u].transpose();
    e.h_v = g.subtask_feats * p[ParamSet::kW0v].transpose();
    return e;
}

inline Matrix edge_projection(const PathEdges &edges, Path path, const ParamSet &p) {
    const std::size_t w = path == Path::UU ? ParamSet::kWuu : path == Path::VV ? ParamSet::kWvv : ParamSet::kWuv;
    return edges.feat * p[w].transpose();
}

inline Matrix state_embedding(const Matrix &h_u, const Matrix &h_v) {
    Matrix out(1, h_u.cols() + h_v.cols());
    out << h_u.colwise().mean(), h_v.colwise().mean();
    return out;
}

inline Matrix action_embedding(const Matrix &h_u, const Matrix &h_v, const Matrix &h_s, Action a) {
    Matrix out(1, h_u.cols() + h_v.cols() + h_s.cols());
    out << h_u.row(a.worker), h_v.row(a.subtask), h_s;
    return out;
}

/// Per-node reference for one attention aggregation: `neighbors` holds the
/// source vectors and `edge_vecs` the projected edge vectors, one row each.
inline Eigen::RowVectorXd attention_aggregate(const Eigen::RowVectorXd &target, const Matrix &neighbors,
                                              const Matrix &edge_vecs, const ParamSet &p, int round, Path path,
                                              Eigen::VectorXd *alpha_out = nullptr) {
    const Matrix &a = p[ParamSet::attn(round, path, 0)];
    const Matrix &we = p[ParamSet::attn(round, path, 1)];
    const Matrix &wts = p[ParamSet::attn(round, path, 2)];
    const Eigen::Index l = target.size();
    const Eigen::Index m = neighbors.rows();
    if (alpha_out) alpha_out->resize(m);
    if (m == 0) return Eigen::RowVectorXd::Zero(l);
    Eigen::VectorXd e(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::VectorXd cat(3 * l);
        cat << target.transpose(), neighbors.row(j).transpose(), edge_vecs.row(j).transpose();
        const double z = (a * we * cat)(0, 0);
        e(j) = z > 0.0 ? z : std::expm1(z);
    }
    const Eigen::VectorXd w = (e.array() - e.maxCoeff()).exp();
    const Eigen::VectorXd alpha = w / w.sum();
    if (alpha_out) *alpha_out = alpha;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(l);
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::VectorXd cat(2 * l);
        cat << neighbors.row(j).transpose(), edge_vecs.row(j).transpose();
        acc += alpha(j) * (wts * cat);
    }
    return acc.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); }).transpose();
}

/// Probabilities over the rows of `action_rows` (one action embedding each).
inline Eigen::VectorXd policy_distribution(const Matrix &action_rows, const ParamSet &p) {
    if (action_rows.rows() == 0) throw Error(ErrorCode::NoFeasibleAction, "policy over an empty action set");
    ad::Tape t(false);
    const BoundParams b = bind_params(t, p);
    const Matrix logp = t.value(t.log_softmax(policy_logits(t, b, t.constant(action_rows))));
    return logp.col(0).array().exp();
}

inline double value_estimate(const Matrix &h_s, const ParamSet &p) {
    ad::Tape t(false);
    return t.scalar(value_head(t, bind_params(t, p), t.constant(h_s)));
}

/// Policy log-probabilities over the feasible actions of `st` (plus value).
struct PolicyOutput {
    Eigen::VectorXd log_probs;
    double value = 0.0;
};

inline PolicyOutput evaluate_state(const GraphState &gs, const std::vector<Action> &feasible, const ParamSet &p,
                                   bool with_value = true) {
    if (feasible.empty()) throw Error(ErrorCode::NoFeasibleAction, "no feasible action");
    ad::Tape t(false);
    const BoundParams b = bind_params(t, p);
    const EncodedState e = encode(t, b, gs);
    PolicyOutput out;
    out.log_probs = t.value(t.log_softmax(policy_logits(t, b, action_embeddings(t, e, feasible)))).col(0);
    if (with_value) out.value = t.scalar(value_head(t, b, e.hs));
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints.

inline constexpr const char *kCheckpointFormat = "dmalab.checkpoint/1";

inline std::string save_checkpoint(const ParamSet &p) {
    nlohmann::ordered_json doc;
    doc["format_version"] = kCheckpointFormat;
    doc["dims"] = {{"lambda", p.dims().lambda}, {"rounds", p.dims().rounds}, {"lambda_pi", p.dims().lambda_pi}};
    auto tensors = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Matrix &m = p[i];
        tensors.push_back({{"name", p.name(i)},
                           {"shape", {m.rows(), m.cols()}},
                           {"data", std::vector<double>(m.data(), m.data() + m.size())}});
    }
    doc["tensors"] = std::move(tensors);
    return doc.dump() + "\n";
}

/// Parses a checkpoint; `expected` (when given) must match the stored
/// dimensions, and every tensor must have the layout's shape.
inline ParamSet load_checkpoint(const std::string &text, std::optional<NetDims> expected = std::nullopt) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::ParseError, std::string("checkpoint: ") + e.what());
    }
    try {
        if (doc.at("format_version").get<std::string>() != kCheckpointFormat)
            throw Error(ErrorCode::ParseError, "checkpoint: unsupported format_version");
        NetDims dims{doc.at("dims").at("lambda").get<int>(), doc.at("dims").at("rounds").get<int>(),
                     doc.at("dims").at("lambda_pi").get<int>()};
        if (expected && !(*expected == dims))
            throw Error(ErrorCode::ShapeMismatch,
                        "checkpoint has lambda=" + std::to_string(dims.lambda) + " K=" + std::to_string(dims.rounds) +
                            " lambda_pi=" + std::to_string(dims.lambda_pi) + ", expected lambda=" +
                            std::to_string(expected->lambda) + " K=" + std::to_string(expected->rounds) +
                            " lambda_pi=" + std::to_string(expected->lambda_pi));
        ParamSet p(dims);
        const auto &tensors = doc.at("tensors");
        if (tensors.size() != p.size()) throw Error(ErrorCode::ShapeMismatch, "checkpoint: wrong tensor count");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const auto &t = tensors[i];
            const auto name = t.at("name").get<std::string>();
            const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
            const auto data = t.at("data").get<std::vector<double>>();
            if (name != p.name(i) || shape.size() != 2 || shape[0] != p[i].rows() || shape[1] != p[i].cols() ||
                static_cast<Eigen::Index>(data.size()) != p[i].size())
                throw Error(ErrorCode::ShapeMismatch, "checkpoint: tensor " + name + " does not match the layout");
            std::copy(data.begin(), data.end(), p[i].data());
        }
        return p;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::ParseError, std::string("checkpoint: ") + e.what());
    }
}

}  // namespace dmalab
