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
 * @brief Heterogeneous graph view of an environment state.
 *
 * Nodes are workers and subtasks. Three relations connect them: skill match
 * (worker to subtask), dependency (subtasks of one task) and adjacency (any
 * two nodes closer than a threshold). For message passing the relations
 * between each ordered pair of node types are merged into one compound
 * neighborhood whose edge feature records which relations are present.
 *
 * Node indices in `edges_ad` and `pair_dist` are global: workers first,
 * then subtasks offset by the worker count.
 */

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmalab/environment.hpp"
#include "dmalab/matrix.hpp"

namespace dmalab {

inline constexpr int kWorkerFeatures = 8;
inline constexpr int kSubtaskFeatures = 9;

enum class NeighborhoodMode { Union, Intersection };

struct GraphConfig {
    double ad_threshold = std::numeric_limits<double>::infinity();
    NeighborhoodMode mode = NeighborhoodMode::Union;
    bool normalize = true;
};

/// Edges of one compound path grouped by target (CSR layout). Row e of
/// `feat` belongs to edge e.
struct PathEdges {
    std::vector<int> offsets{0};
    std::vector<int> target;
    std::vector<int> source;
    Matrix feat;

    [[nodiscard]] std::size_t num_targets() const { return offsets.size() - 1; }
    [[nodiscard]] std::size_t num_edges() const { return source.size(); }
    [[nodiscard]] std::vector<int> neighbors(std::size_t t) const {
        return {source.begin() + offsets[t], source.begin() + offsets[t + 1]};
    }

    friend bool operator==(const PathEdges &a, const PathEdges &b) {
        return a.offsets == b.offsets && a.target == b.target && a.source == b.source && a.feat == b.feat;
    }
};

/// uu: worker from worker, feature [ad]. uv: worker from subtask, [ad, sm].
/// vu: subtask from worker, [ad, sm]. vv: subtask from subtask, [ad, dp].
struct CompoundNeighborhoods {
    PathEdges uu, uv, vu, vv;

    friend bool operator==(const CompoundNeighborhoods &, const CompoundNeighborhoods &) = default;
};

struct MultiRelationGraph {
    GraphConfig config;
    Matrix worker_feats;
    Matrix subtask_feats;
    std::vector<std::pair<int, int>> edges_sm;  // (worker, subtask)
    std::vector<std::pair<int, int>> edges_dp;  // (subtask, subtask), first < second
    std::vector<std::pair<int, int>> edges_ad;  // global ids, first < second
    Matrix pair_dist;

    friend bool operator==(const MultiRelationGraph &a, const MultiRelationGraph &b) {
        return a.worker_feats == b.worker_feats && a.subtask_feats == b.subtask_feats && a.edges_sm == b.edges_sm &&
               a.edges_dp == b.edges_dp && a.edges_ad == b.edges_ad && a.pair_dist == b.pair_dist;
    }
};

struct GraphState {
    MultiRelationGraph graph;
    CompoundNeighborhoods nbrs;
};

namespace detail {

struct Scales {
    double time = 1.0, length = 1.0, budget = 1.0, workers = 1.0, subtasks = 1.0;
};

inline Scales feature_scales(const Instance &inst, bool normalize) {
    Scales s;
    if (!normalize) return s;
    double max_deadline = 0.0, max_budget = 0.0;
    for (const auto &v : inst.subtasks) {
        max_deadline = std::max(max_deadline, v.deadline);
        max_budget = std::max(max_budget, v.budget);
    }
    if (max_deadline > 0.0) s.time = max_deadline;
    if (max_budget > 0.0) s.budget = max_budget;
    if (inst.area_side > 0.0) s.length = inst.area_side;
    s.workers = std::max<double>(1.0, static_cast<double>(inst.num_workers()));
    s.subtasks = std::max<double>(1.0, static_cast<double>(inst.num_subtasks()));
    return s;
}

inline double start_sentinel(const Instance &inst) {
    double max_deadline = 0.0;
    for (const auto &v : inst.subtasks) max_deadline = std::max(max_deadline, v.deadline);
    return 10.0 * max_deadline;
}

inline Location node_location(const EnvState &st, int node) {
    const int n = static_cast<int>(st.instance().num_workers());
    return node < n ? st.worker_loc[node] : st.instance().subtasks[node - n].loc;
}

inline void fill_distances(Matrix &d, const EnvState &st, int node) {
    const Location at = node_location(st, node);
    for (int j = 0; j < d.rows(); ++j) {
        const double x = j == node ? 0.0 : distance(at, node_location(st, j));
        d(node, j) = x;
        d(j, node) = x;
    }
}

inline bool adjacent(const MultiRelationGraph &g, int i, int j) {
    return i != j && g.pair_dist(i, j) < g.config.ad_threshold;
}

inline bool combine(bool a, bool b, NeighborhoodMode mode) {
    return mode == NeighborhoodMode::Union ? (a || b) : (a && b);
}

/// Builds one compound path. `has(t, s)` returns the relation indicators
/// {ad, other} of the ordered pair; single-relation paths ignore `other`.
template <typename Has>
PathEdges build_path(int targets, int sources, int feat_dim, bool exclude_self, NeighborhoodMode mode, double length,
                     const Matrix &dist, int t_off, int s_off, Has has) {
    PathEdges p;
    p.offsets.reserve(targets + 1);
    std::vector<double> rows;
    for (int t = 0; t < targets; ++t) {
        for (int s = 0; s < sources; ++s) {
            if (exclude_self && s == t) continue;
            const auto [ad, other] = has(t, s);
            const bool keep = feat_dim == 1 ? ad : combine(ad, other, mode);
            if (!keep) continue;
            p.target.push_back(t);
            p.source.push_back(s);
            rows.push_back(ad ? dist(t_off + t, s_off + s) / length : 0.0);
            if (feat_dim == 2) rows.push_back(other ? 1.0 : 0.0);
        }
        p.offsets.push_back(static_cast<int>(p.source.size()));
    }
    p.feat = Eigen::Map<Matrix>(rows.data(), static_cast<Eigen::Index>(p.source.size()), feat_dim);
    return p;
}

inline void rebuild_worker_paths(const EnvState &st, const MultiRelationGraph &g, CompoundNeighborhoods &cn) {
    const Instance &inst = st.instance();
    const int n = static_cast<int>(inst.num_workers());
    const int ml = static_cast<int>(inst.num_subtasks());
    const double len = feature_scales(inst, g.config.normalize).length;
    const auto mode = g.config.mode;
    cn.uu = build_path(n, n, 1, true, mode, len, g.pair_dist, 0, 0,
                       [&](int t, int s) { return std::pair{adjacent(g, t, s), false}; });
    cn.uv = build_path(n, ml, 2, false, mode, len, g.pair_dist, 0, n, [&](int t, int s) {
        return std::pair{adjacent(g, t, n + s), st.problem->matches(t, s)};
    });
    cn.vu = build_path(ml, n, 2, false, mode, len, g.pair_dist, n, 0, [&](int t, int s) {
        return std::pair{adjacent(g, n + t, s), st.problem->matches(s, t)};
    });
}

inline void rebuild_subtask_path(const EnvState &st, const MultiRelationGraph &g, CompoundNeighborhoods &cn) {
    const Instance &inst = st.instance();
    const int n = static_cast<int>(inst.num_workers());
    const int ml = static_cast<int>(inst.num_subtasks());
    const double len = feature_scales(inst, g.config.normalize).length;
    cn.vv = build_path(ml, ml, 2, true, g.config.mode, len, g.pair_dist, n, n, [&](int t, int s) {
        return std::pair{adjacent(g, n + t, n + s), inst.subtasks[t].task_id == inst.subtasks[s].task_id};
    });
}

inline void rebuild_ad_edges(MultiRelationGraph &g) {
    g.edges_ad.clear();
    const int total = static_cast<int>(g.pair_dist.rows());
    for (int i = 0; i < total; ++i)
        for (int j = i + 1; j < total; ++j)
            if (adjacent(g, i, j)) g.edges_ad.emplace_back(i, j);
}

}  // namespace detail

/// Worker row: available time, x, y, feasible subtask count, their total
/// budget, profit earned, pace, expire time.
inline Eigen::Matrix<double, 1, kWorkerFeatures> worker_features(const EnvState &st, int u, bool normalize = true) {
    const Instance &inst = st.instance();
    const auto sc = detail::feature_scales(inst, normalize);
    double count = 0.0, budget = 0.0;
    for (const Action &a : st.feasible)
        if (a.worker == u) {
            count += 1.0;
            budget += inst.subtasks[a.subtask].budget;
        }
    const Worker &w = inst.workers[u];
    Eigen::Matrix<double, 1, kWorkerFeatures> x;
    x << st.worker_clock[u] / sc.time, st.worker_loc[u].x / sc.length, st.worker_loc[u].y / sc.length,
        count / sc.subtasks, budget / sc.budget, st.worker_profit[u] / sc.budget, w.pace, w.expire_time() / sc.time;
    return x;
}

/// Subtask row: assigned flag, start time (sentinel while unassigned),
/// feasible worker count, incomplete dependency count, open budget of its
/// task, x, y, budget, deadline.
inline Eigen::Matrix<double, 1, kSubtaskFeatures> subtask_features(const EnvState &st, int v, bool normalize = true) {
    const Instance &inst = st.instance();
    const auto sc = detail::feature_scales(inst, normalize);
    const Subtask &s = inst.subtasks[v];
    double workers = 0.0;
    for (const Action &a : st.feasible) workers += a.subtask == v ? 1.0 : 0.0;
    double open_deps = 0.0;
    for (int d : s.deps) open_deps += st.assigned[d] ? 0.0 : 1.0;
    double open_budget = 0.0;
    for (int id : inst.tasks[s.task_id].subtask_ids)
        if (!st.assigned[id]) open_budget += inst.subtasks[id].budget;
    const double start = st.assigned[v] ? st.start[v] : detail::start_sentinel(inst);
    Eigen::Matrix<double, 1, kSubtaskFeatures> x;
    x << (st.assigned[v] ? 1.0 : 0.0), start / sc.time, workers / sc.workers, open_deps / sc.subtasks,
        open_budget / sc.budget, s.loc.x / sc.length, s.loc.y / sc.length, s.budget / sc.budget, s.deadline / sc.time;
    return x;
}

namespace detail {

inline void refresh_features(const EnvState &st, MultiRelationGraph &g) {
    const Instance &inst = st.instance();
    const int n = static_cast<int>(inst.num_workers());
    const int ml = static_cast<int>(inst.num_subtasks());
    g.worker_feats.resize(n, kWorkerFeatures);
    g.subtask_feats.resize(ml, kSubtaskFeatures);
    for (int u = 0; u < n; ++u) g.worker_feats.row(u) = worker_features(st, u, g.config.normalize);
    for (int v = 0; v < ml; ++v) g.subtask_feats.row(v) = subtask_features(st, v, g.config.normalize);
}

}  // namespace detail

inline GraphState build_graph(const EnvState &st, GraphConfig cfg = {}) {
    const Instance &inst = st.instance();
    const int n = static_cast<int>(inst.num_workers());
    const int ml = static_cast<int>(inst.num_subtasks());
    GraphState out;
    MultiRelationGraph &g = out.graph;
    g.config = cfg;
    detail::refresh_features(st, g);
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < ml; ++v)
            if (st.problem->matches(u, v)) g.edges_sm.emplace_back(u, v);
    for (int a = 0; a < ml; ++a)
        for (int b = a + 1; b < ml; ++b)
            if (inst.subtasks[a].task_id == inst.subtasks[b].task_id) g.edges_dp.emplace_back(a, b);
    g.pair_dist = Matrix::Zero(n + ml, n + ml);
    for (int i = 0; i < n + ml; ++i) detail::fill_distances(g.pair_dist, st, i);
    detail::rebuild_ad_edges(g);
    detail::rebuild_worker_paths(st, g, out.nbrs);
    detail::rebuild_subtask_path(st, g, out.nbrs);
    return out;
}

/// Brings a graph built before action `a` up to date with `st_after`. Only
/// the acting worker moved, so only its distances, adjacency edges and the
/// worker-side paths are recomputed; subtask positions and the skill and
/// dependency relations are static.
inline void update_graph(GraphState &gs, const EnvState &st_after, Action a) {
    MultiRelationGraph &g = gs.graph;
    detail::refresh_features(st_after, g);
    detail::fill_distances(g.pair_dist, st_after, a.worker);
    std::erase_if(g.edges_ad, [&](const auto &e) { return e.first == a.worker || e.second == a.worker; });
    const int total = static_cast<int>(g.pair_dist.rows());
    for (int j = 0; j < total; ++j)
        if (detail::adjacent(g, a.worker, j)) {
            const std::pair<int, int> e{std::min(a.worker, j), std::max(a.worker, j)};
            g.edges_ad.insert(std::lower_bound(g.edges_ad.begin(), g.edges_ad.end(), e), e);
        }
    detail::rebuild_worker_paths(st_after, g, gs.nbrs);
}

/// Fraction of worker/subtask pairs joined by a skill-match edge.
inline double skill_matching_ratio(const MultiRelationGraph &g) {
    const double pairs = static_cast<double>(g.worker_feats.rows() * g.subtask_feats.rows());
    return pairs > 0 ? static_cast<double>(g.edges_sm.size()) / pairs : 0.0;
}

inline nlohmann::ordered_json graph_to_json(const GraphState &gs) {
    using nlohmann::ordered_json;
    auto rows = [](const Matrix &m) {
        ordered_json out = ordered_json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            ordered_json row = ordered_json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            out.push_back(std::move(row));
        }
        return out;
    };
    auto pairs = [](const std::vector<std::pair<int, int>> &es) {
        ordered_json out = ordered_json::array();
        for (const auto &[a, b] : es) out.push_back({a, b});
        return out;
    };
    auto path = [&](const PathEdges &p) {
        return ordered_json{{"target", p.target}, {"source", p.source}, {"feat", rows(p.feat)}};
    };
    const auto &g = gs.graph;
    ordered_json doc;
    doc["worker_feats"] = rows(g.worker_feats);
    doc["subtask_feats"] = rows(g.subtask_feats);
    doc["edges_sm"] = pairs(g.edges_sm);
    doc["edges_dp"] = pairs(g.edges_dp);
    doc["edges_ad"] = pairs(g.edges_ad);
    doc["paths"] = ordered_json{
        {"uu", path(gs.nbrs.uu)}, {"uv", path(gs.nbrs.uv)}, {"vu", path(gs.nbrs.vu)}, {"vv", path(gs.nbrs.vv)}};
    return doc;
}

}  // namespace dmalab
