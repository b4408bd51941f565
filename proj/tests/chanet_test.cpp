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

#include <numeric>

#include "dmalab/chanet.hpp"
#include "dmalab/instance_gen.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dmalab;

namespace {

const NetDims kSmall{4, 2, 8};

Instance small_instance(std::uint64_t seed) {
    GenConfig c;
    c.n_workers = 5;
    c.n_tasks = 10;
    c.seed = seed;
    return generate_instance(c);
}

/// A 2-worker, 3-subtask state with at least two feasible actions.
EnvState tiny_state() {
    GenConfig c;
    c.n_workers = 2;
    for (std::uint64_t s = 0;; ++s) {
        c.seed = s;
        EnvState st = reset(generate_fixed_subtasks(3, 2, c));
        if (st.feasible.size() >= 2) return st;
    }
}

Matrix node_rows(const Matrix &h, const std::vector<int> &ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), h.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = h.row(ids[i]);
    return out;
}

Matrix edge_rows(const Matrix &e, int lo, int hi) { return e.middleRows(lo, hi - lo); }

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

}  // namespace

TEST(InitParams, DeterministicAndBounded) {
    const ParamSet a = init_params({}, 7);
    EXPECT_TRUE(a == init_params({}, 7));
    EXPECT_FALSE(a == init_params({}, 8));
    EXPECT_EQ(a.at("w0_u").size(), 128);
    EXPECT_EQ(a.at("w0_v").rows(), 16);
    EXPECT_EQ(a.at("policy.w1").cols(), 64);
    EXPECT_EQ(a.at("value.w1").cols(), 32);
    for (const char *p : kPathNames)
        for (int k = 0; k < 4; ++k) EXPECT_NO_THROW((void)a.at("round" + std::to_string(k) + "." + p + ".we"));
    EXPECT_THROW((void)a.at("round4.uu.we"), Error);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool bias = a.name(i).find(".b") != std::string::npos;
        const double bound = 1.0 / std::sqrt(static_cast<double>(bias ? a[i - 1].cols() : a[i].cols()));
        EXPECT_LE(a[i].cwiseAbs().maxCoeff(), bound) << a.name(i);
    }
    EXPECT_TRUE(a.at("round2.uv.a") != a.at("round3.uv.a"));
}

TEST(ProjectRaw, LinearWithoutBias) {
    const ParamSet p = init_params({}, 1);
    GraphState gs = build_graph(reset(illustrative_fixture()));
    const Embeddings e = project_raw(gs.graph, p);
    EXPECT_EQ(e.h_u.cols(), 16);
    EXPECT_EQ(e.h_v.cols(), 16);
    gs.graph.worker_feats *= 2.0;
    EXPECT_LT((project_raw(gs.graph, p).h_u - 2.0 * e.h_u).cwiseAbs().maxCoeff(), 1e-14);
    gs.graph.worker_feats.setZero();
    EXPECT_EQ(project_raw(gs.graph, p).h_u, Matrix::Zero(3, 16));
    EXPECT_EQ(edge_projection(gs.nbrs.uv, Path::UV, p).cols(), 16);
}

TEST(AttentionAggregate, SoftmaxLaws) {
    const ParamSet p = init_params({}, 2);
    Rng rng(3);
    Eigen::RowVectorXd target(16);
    for (auto &x : target) x = rng.uniform(-1, 1);
    Matrix nbr(1, 16), edge(1, 16);
    for (Eigen::Index i = 0; i < 16; ++i) {
        nbr(0, i) = rng.uniform(-1, 1);
        edge(0, i) = rng.uniform(-1, 1);
    }
    Eigen::VectorXd alpha;
    const auto single = attention_aggregate(target, nbr, edge, p, 0, Path::UV, &alpha);
    EXPECT_EQ(alpha(0), 1.0);

    Matrix two_n(2, 16), two_e(2, 16);
    two_n << nbr, nbr;
    two_e << edge, edge;
    const auto doubled = attention_aggregate(target, two_n, two_e, p, 0, Path::UV, &alpha);
    EXPECT_DOUBLE_EQ(alpha(0), 0.5);
    EXPECT_DOUBLE_EQ(alpha(1), 0.5);
    EXPECT_LT((doubled - single).cwiseAbs().maxCoeff(), 1e-14);

    const auto empty = attention_aggregate(target, Matrix(0, 16), Matrix(0, 16), p, 0, Path::UV);
    EXPECT_EQ(empty, Eigen::RowVectorXd::Zero(16));
}

TEST(EmbedNodes, BatchedMatchesPerNodeReference) {
    const NetDims dims{16, 1, 32};
    const ParamSet p = init_params(dims, 4);
    Rng rng(5);
    EnvState st = reset(small_instance(3));
    for (int i = 0; i < 4 && !st.done; ++i) step(st, st.feasible[rng.uniform_int(0, st.feasible.size() - 1)]);
    GraphState gs = build_graph(st, GraphConfig{4.0, NeighborhoodMode::Union, true});

    const Embeddings raw = project_raw(gs.graph, p);
    const auto &cn = gs.nbrs;
    const Matrix e_uu = edge_projection(cn.uu, Path::UU, p), e_uv = edge_projection(cn.uv, Path::UV, p);
    const Matrix e_vu = edge_projection(cn.vu, Path::VU, p), e_vv = edge_projection(cn.vv, Path::VV, p);
    auto aggregate = [&](const Matrix &ht, const Matrix &hs, const PathEdges &pe, const Matrix &he, Path path,
                         std::size_t t) {
        return attention_aggregate(ht.row(static_cast<Eigen::Index>(t)), node_rows(hs, pe.neighbors(t)),
                                   edge_rows(he, pe.offsets[t], pe.offsets[t + 1]), p, 0, path);
    };
    const Eigen::Index n = raw.h_u.rows(), ml = raw.h_v.rows();
    Matrix hu(n, 16), hv(ml, 16);
    for (Eigen::Index u = 0; u < n; ++u) {
        Eigen::VectorXd cat(48);
        cat << raw.h_u.row(u).transpose(), aggregate(raw.h_u, raw.h_u, cn.uu, e_uu, Path::UU, u).transpose(),
            aggregate(raw.h_u, raw.h_v, cn.uv, e_uv, Path::UV, u).transpose();
        hu.row(u) = (p[ParamSet::w_u(0)] * cat).unaryExpr(&elu).transpose();
    }
    for (Eigen::Index v = 0; v < ml; ++v) {
        Eigen::VectorXd cat(48);
        cat << raw.h_v.row(v).transpose(), aggregate(raw.h_v, raw.h_v, cn.vv, e_vv, Path::VV, v).transpose(),
            aggregate(raw.h_v, hu, cn.vu, e_vu, Path::VU, v).transpose();
        hv.row(v) = (p[ParamSet::w_v(0)] * cat).unaryExpr(&elu).transpose();
    }
    const Embeddings e = embed_nodes(gs, p);
    EXPECT_LT((e.h_u - hu).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((e.h_v - hv).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((e.h_s - state_embedding(hu, hv)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmbedNodes, ShapesAndZeroRounds) {
    const GraphState gs = build_graph(reset(small_instance(1)));
    const Embeddings e = embed_nodes(gs, init_params({}, 1));
    EXPECT_EQ(e.h_u.rows(), 5);
    EXPECT_EQ(e.h_u.cols(), 16);
    EXPECT_EQ(e.h_v.rows(), gs.graph.subtask_feats.rows());
    EXPECT_EQ(e.h_s.cols(), 32);
    EXPECT_TRUE(e.h_u.allFinite() && e.h_v.allFinite());

    const ParamSet p0 = init_params({16, 0, 128}, 1);
    const Embeddings z = embed_nodes(gs, p0);
    const Embeddings raw = project_raw(gs.graph, p0);
    EXPECT_EQ(z.h_u, raw.h_u);
    EXPECT_EQ(z.h_v, raw.h_v);
}

TEST(EmbedNodes, PermutationEquivariance) {
    const ParamSet p = init_params({}, 9);
    const Instance inst = small_instance(4);
    Rng rng(6);
    const auto n = static_cast<int>(inst.num_workers()), ml = static_cast<int>(inst.num_subtasks());
    std::vector<int> wp(n), vp(ml);
    std::iota(wp.begin(), wp.end(), 0);
    std::iota(vp.begin(), vp.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(wp[i], wp[rng.uniform_int(0, i)]);
    for (int i = ml - 1; i > 0; --i) std::swap(vp[i], vp[rng.uniform_int(0, i)]);
    const Instance perm = oracle::permute_instance(inst, wp, vp);
    ASSERT_TRUE(instance_problems(perm).empty());
    const Embeddings a = embed_nodes(build_graph(reset(inst)), p);
    const Embeddings b = embed_nodes(build_graph(reset(perm)), p);
    for (int u = 0; u < n; ++u) EXPECT_LT((a.h_u.row(u) - b.h_u.row(wp[u])).cwiseAbs().maxCoeff(), 1e-9);
    for (int v = 0; v < ml; ++v) EXPECT_LT((a.h_v.row(v) - b.h_v.row(vp[v])).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(StateEmbedding, MeanPooling) {
    Matrix hu = Matrix::Constant(3, 4, 0.25), hv = Matrix::Constant(5, 4, 0.25);
    EXPECT_EQ(state_embedding(hu, hv), Matrix::Constant(1, 8, 0.25));
    hu(0, 0) = 1.0;
    hu(2, 0) = -0.5;
    EXPECT_DOUBLE_EQ(state_embedding(hu, hv)(0, 0), (1.0 + 0.25 - 0.5) / 3.0);
}

TEST(ActionEmbedding, Blocks) {
    const GraphState gs = build_graph(reset(illustrative_fixture()));
    const Embeddings e = embed_nodes(gs, init_params({}, 2));
    const Matrix a = action_embedding(e.h_u, e.h_v, e.h_s, {0, 1});
    const Matrix b = action_embedding(e.h_u, e.h_v, e.h_s, {3, 1});
    ASSERT_EQ(a.cols(), 64);
    EXPECT_EQ(a.leftCols(16), b.leftCols(16));
    EXPECT_EQ(a.rightCols(32), b.rightCols(32));
    EXPECT_NE(a.middleCols(16, 16), b.middleCols(16, 16));
    EXPECT_EQ(a.rightCols(32), e.h_s);
}

TEST(PolicyDistribution, Laws) {
    ParamSet p = init_params({}, 3);
    Rng rng(8);
    Matrix rows(5, 64);
    for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = rng.uniform(-1, 1);
    rows.row(4) = rows.row(1);
    const Eigen::VectorXd pr = policy_distribution(rows, p);
    EXPECT_NEAR(pr.sum(), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(pr(1), pr(4));
    EXPECT_EQ(policy_distribution(rows.topRows(1), p)(0), 1.0);
    EXPECT_THROW(policy_distribution(Matrix(0, 64), p), Error);
    try {
        policy_distribution(Matrix(0, 64), p);
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NoFeasibleAction);
    }
    // Shifting every logit by the output bias leaves the distribution alone.
    p.at("policy.b3")(0, 0) += 7.5;
    EXPECT_LT((policy_distribution(rows, p) - pr).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, PureAndFinite) {
    const ParamSet p = init_params({}, 11);
    Rng rng(12);
    for (std::uint64_t s = 0; s < 10; ++s) {
        EnvState st = reset(small_instance(s));
        while (!st.done) {
            const GraphState gs = build_graph(st);
            const PolicyOutput a = evaluate_state(gs, st.feasible, p);
            const PolicyOutput b = evaluate_state(gs, st.feasible, p);
            ASSERT_EQ(a.log_probs, b.log_probs);
            ASSERT_EQ(a.value, b.value);
            ASSERT_TRUE(a.log_probs.allFinite() && std::isfinite(a.value));
            ASSERT_NEAR(a.log_probs.array().exp().sum(), 1.0, 1e-9);
            ASSERT_LE(a.log_probs.maxCoeff(), 0.0);
            step(st, st.feasible[rng.uniform_int(0, st.feasible.size() - 1)]);
        }
    }
}

TEST(Backward, FullNetworkMatchesFiniteDifferences) {
    ParamSet p = init_params(kSmall, 13);
    const EnvState st = tiny_state();
    const GraphState gs = build_graph(st);
    Rng rng(14);
    Eigen::VectorXd w(static_cast<Eigen::Index>(st.feasible.size()));
    for (auto &x : w) x = rng.uniform(-1, 1);
    auto loss = [&](ad::Tape &t, const BoundParams &b) {
        const EncodedState e = encode(t, b, gs);
        const ad::Var logp = t.log_softmax(policy_logits(t, b, action_embeddings(t, e, st.feasible)));
        Matrix wm = w;
        const ad::Var pol = t.sum(t.mul(logp, t.constant(wm)));
        return t.add(pol, t.square(value_head(t, b, e.hs)));
    };
    std::vector<Matrix> grads = p.zeros_like();
    {
        ad::Tape t;
        t.backward(loss(t, bind_params(t, p, &grads)));
    }
    const auto numeric = oracle::numeric_gradient(p.tensors(), [&] {
        ad::Tape t(false);
        return t.scalar(loss(t, bind_params(t, p)));
    });
    std::vector<std::string> names;
    for (std::size_t i = 0; i < p.size(); ++i) names.push_back(p.name(i));
    const auto agree = oracle::compare_gradients(grads, numeric, 1e-4, names);
    EXPECT_GE(agree.fraction(), 0.99) << "worst " << agree.worst << " at " << agree.worst_where;
    // With two workers every worker-worker neighborhood is a singleton, so its
    // attention weight is identically 1 and the logit parameters get no gradient.
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool singleton_logit = names[i].find(".uu.a") != std::string::npos || names[i].find(".uu.we") != std::string::npos;
        if (singleton_logit)
            EXPECT_EQ(grads[i].cwiseAbs().maxCoeff(), 0.0) << names[i];
        else
            EXPECT_GT(grads[i].cwiseAbs().maxCoeff(), 0.0) << names[i];
    }
}

TEST(Backward, CriticGradientMatchesFiniteDifferences) {
    ParamSet p = init_params({}, 15);
    const Embeddings e = embed_nodes(build_graph(tiny_state()), p);
    std::vector<Matrix> grads = p.zeros_like();
    {
        ad::Tape t;
        t.backward(value_head(t, bind_params(t, p, &grads), t.constant(e.h_s)));
    }
    const std::size_t base = p.head(false);
    std::vector<Matrix> critic(p.tensors().begin() + base, p.tensors().end());
    std::vector<Matrix> analytic(grads.begin() + base, grads.end());
    const auto numeric = oracle::numeric_gradient(critic, [&] {
        ParamSet q = p;
        std::copy(critic.begin(), critic.end(), q.tensors().begin() + base);
        return value_estimate(e.h_s, q);
    });
    const auto agree = oracle::compare_gradients(analytic, numeric, 1e-4);
    EXPECT_EQ(agree.within, agree.total) << "worst " << agree.worst;
    // Nothing upstream of the critic receives gradient from a constant state.
    for (std::size_t i = 0; i < base; ++i) EXPECT_EQ(grads[i].cwiseAbs().maxCoeff(), 0.0) << p.name(i);
}

TEST(Checkpoint, RoundTripAndShapeChecks) {
    const ParamSet p = init_params({}, 21);
    const std::string text = save_checkpoint(p);
    EXPECT_TRUE(load_checkpoint(text, NetDims{}) == p);
    try {
        load_checkpoint(text, NetDims{8, 4, 128});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
    auto doc = nlohmann::json::parse(text);
    doc["tensors"][0]["shape"] = {8, 16};
    EXPECT_THROW(load_checkpoint(doc.dump()), Error);
    try {
        load_checkpoint("not json");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
}
