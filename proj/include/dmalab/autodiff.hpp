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
 * @brief Minimal reverse-mode differentiation over dense matrices.
 *
 * A Tape records every operation applied to its variables. Calling
 * backward() on a 1x1 result walks the record in reverse and adds the
 * gradient of each parameter into the matrix supplied when the parameter
 * was bound. A tape built with `record = false` only evaluates.
 */

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dmalab/matrix.hpp"
#include "dmalab/model.hpp"

namespace dmalab::ad {

struct Var {
    int id = -1;
};

class Tape {
public:
    explicit Tape(bool record = true) : record_(record) {}

    [[nodiscard]] bool recording() const { return record_; }
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

    Var constant(Matrix m) { return push(std::move(m)); }

    /// Binds an external parameter by reference. Its gradient is added to
    /// `*grad` by backward(); pass nullptr to treat it as a constant.
    Var param(const Matrix &value, Matrix *grad) {
        Node n;
        n.ref = &value;
        n.sink = record_ ? grad : nullptr;
        n.needs_grad = n.sink != nullptr;
        nodes_.push_back(std::move(n));
        return {static_cast<int>(nodes_.size()) - 1};
    }

    [[nodiscard]] const Matrix &value(Var v) const {
        const Node &n = nodes_[v.id];
        return n.ref ? *n.ref : n.own;
    }
    [[nodiscard]] double scalar(Var v) const { return value(v)(0, 0); }

    void backward(Var loss, double seed = 1.0) {
        if (!record_) throw Error(ErrorCode::InvalidArgument, "backward on a non-recording tape");
        const Matrix &l = value(loss);
        if (l.rows() != 1 || l.cols() != 1) throw Error(ErrorCode::ShapeMismatch, "backward needs a 1x1 loss");
        if (!nodes_[loss.id].needs_grad) return;
        grad(loss.id).array() += seed;
        for (int i = loss.id; i >= 0; --i) {
            Node &n = nodes_[i];
            if (n.back && n.grad.size() != 0) n.back(*this, i);
        }
    }

    // ---- operations ----

    /// A * B.
    Var matmul(Var a, Var b) {
        Matrix out = value(a) * value(b);
        return record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
            const Matrix &g = t.grad(self);
            if (t.needs(a)) t.grad(a.id).noalias() += g * t.value(b).transpose();
            if (t.needs(b)) t.grad(b.id).noalias() += t.value(a).transpose() * g;
        });
    }

    /// A * B^T.
    Var matmul_nt(Var a, Var b) {
        Matrix out = value(a) * value(b).transpose();
        return record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
            const Matrix &g = t.grad(self);
            if (t.needs(a)) t.grad(a.id).noalias() += g * t.value(b);
            if (t.needs(b)) t.grad(b.id).noalias() += g.transpose() * t.value(a);
        });
    }

    /// Elementwise sum. A 1-row `b` is broadcast over the rows of `a`.
    Var add(Var a, Var b) {
        const Matrix &x = value(a);
        const Matrix &y = value(b);
        if (x.rows() == y.rows() && x.cols() == y.cols()) {
            Matrix out = x + y;
            return record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
                if (t.needs(a)) t.grad(a.id) += t.grad(self);
                if (t.needs(b)) t.grad(b.id) += t.grad(self);
            });
        }
        if (y.rows() != 1 || y.cols() != x.cols()) throw shape_error("add", x, y);
        Matrix out = x.rowwise() + y.row(0);
        return record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
            if (t.needs(a)) t.grad(a.id) += t.grad(self);
            if (t.needs(b)) t.grad(b.id) += t.grad(self).colwise().sum();
        });
    }

    Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

    Var mul(Var a, Var b) {
        const Matrix &x = value(a);
        const Matrix &y = value(b);
        if (x.rows() != y.rows() || x.cols() != y.cols()) throw shape_error("mul", x, y);
        Matrix out = x.cwiseProduct(y);
        return record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
            if (t.needs(a)) t.grad(a.id) += t.grad(self).cwiseProduct(t.value(b));
            if (t.needs(b)) t.grad(b.id) += t.grad(self).cwiseProduct(t.value(a));
        });
    }

    Var scale(Var a, double s) {
        Matrix out = value(a) * s;
        return record(std::move(out), {a}, [a, s](Tape &t, int self) { t.grad(a.id) += t.grad(self) * s; });
    }

    Var elu(Var a) {
        Matrix out = value(a).unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
        return record(std::move(out), {a}, [a](Tape &t, int self) {
            const Matrix &y = t.value(Var{self});
            t.grad(a.id) += t.grad(self).binaryExpr(
                y, [](double g, double yv) { return yv > 0.0 ? g : g * (yv + 1.0); });
        });
    }

    Var tanh(Var a) {
        Matrix out = value(a).array().tanh().matrix();
        return record(std::move(out), {a}, [a](Tape &t, int self) {
            const Matrix &y = t.value(Var{self});
            t.grad(a.id).array() += t.grad(self).array() * (1.0 - y.array().square());
        });
    }

    Var exp(Var a) {
        Matrix out = value(a).array().exp().matrix();
        return record(std::move(out), {a}, [a](Tape &t, int self) {
            t.grad(a.id) += t.grad(self).cwiseProduct(t.value(Var{self}));
        });
    }

    Var square(Var a) {
        Matrix out = value(a).array().square().matrix();
        return record(std::move(out), {a}, [a](Tape &t, int self) {
            t.grad(a.id).array() += 2.0 * t.grad(self).array() * t.value(a).array();
        });
    }

    /// Elementwise clamp; the gradient passes where lo <= x <= hi.
    Var clamp(Var a, double lo, double hi) {
        Matrix out = value(a).cwiseMax(lo).cwiseMin(hi);
        return record(std::move(out), {a}, [a, lo, hi](Tape &t, int self) {
            t.grad(a.id) += t.grad(self).binaryExpr(
                t.value(a), [lo, hi](double g, double x) { return x >= lo && x <= hi ? g : 0.0; });
        });
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    Var minimum(Var a, Var b) {
        const Matrix &x = value(a);
        const Matrix &y = value(b);
        if (x.rows() != y.rows() || x.cols() != y.cols()) throw shape_error("minimum", x, y);
        Matrix out = x.cwiseMin(y);
        return record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
            const Matrix &g = t.grad(self);
            const Matrix &xv = t.value(a);
            const Matrix &yv = t.value(b);
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                const bool left = xv.data()[i] <= yv.data()[i];
                if (left && t.needs(a)) t.grad(a.id).data()[i] += g.data()[i];
                if (!left && t.needs(b)) t.grad(b.id).data()[i] += g.data()[i];
            }
        });
    }

    Var concat_cols(const std::vector<Var> &parts) {
        Eigen::Index rows = value(parts.front()).rows(), cols = 0;
        for (Var p : parts) {
            if (value(p).rows() != rows) throw shape_error("concat_cols", value(parts.front()), value(p));
            cols += value(p).cols();
        }
        Matrix out(rows, cols);
        Eigen::Index c = 0;
        for (Var p : parts) {
            out.middleCols(c, value(p).cols()) = value(p);
            c += value(p).cols();
        }
        return record(std::move(out), parts, [parts](Tape &t, int self) {
            Eigen::Index c0 = 0;
            for (Var p : parts) {
                const Eigen::Index w = t.value(p).cols();
                if (t.needs(p)) t.grad(p.id) += t.grad(self).middleCols(c0, w);
                c0 += w;
            }
        });
    }

    Var slice_cols(Var a, Eigen::Index start, Eigen::Index width) {
        Matrix out = value(a).middleCols(start, width);
        return record(std::move(out), {a}, [a, start, width](Tape &t, int self) {
            t.grad(a.id).middleCols(start, width) += t.grad(self);
        });
    }

    /// Row i of the result is row idx[i] of `a`.
    Var gather_rows(Var a, std::vector<int> idx) {
        const Matrix &x = value(a);
        Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
        return record(std::move(out), {a}, [a, idx = std::move(idx)](Tape &t, int self) {
            Matrix &ga = t.grad(a.id);
            const Matrix &g = t.grad(self);
            for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
        });
    }

    /// Softmax of a column vector within each segment [offsets[s], offsets[s+1]).
    Var segment_softmax(Var a, const std::vector<int> &offsets) {
        const Matrix &x = value(a);
        Matrix out(x.rows(), 1);
        for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
            const int lo = offsets[s], len = offsets[s + 1] - offsets[s];
            if (len == 0) continue;
            const double m = x.col(0).segment(lo, len).maxCoeff();
            double z = 0.0;
            for (int e = lo; e < lo + len; ++e) z += out(e, 0) = std::exp(x(e, 0) - m);
            out.col(0).segment(lo, len) /= z;
        }
        return record(std::move(out), {a}, [a, offsets](Tape &t, int self) {
            const Matrix &y = t.value(Var{self});
            const Matrix &g = t.grad(self);
            Matrix &ga = t.grad(a.id);
            for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
                const int lo = offsets[s], len = offsets[s + 1] - offsets[s];
                if (len == 0) continue;
                const double dot = y.col(0).segment(lo, len).dot(g.col(0).segment(lo, len));
                for (int e = lo; e < lo + len; ++e) ga(e, 0) += y(e, 0) * (g(e, 0) - dot);
            }
        });
    }

    /// Row s of the result is the sum of w[e] * x.row(e) over segment s; an
    /// empty segment gives a zero row.
    Var segment_weighted_sum(Var w, Var x, const std::vector<int> &offsets) {
        const Matrix &wv = value(w);
        const Matrix &xv = value(x);
        Matrix out = Matrix::Zero(static_cast<Eigen::Index>(offsets.size()) - 1, xv.cols());
        for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
            const int lo = offsets[s], len = offsets[s + 1] - offsets[s];
            if (len > 0)
                out.row(static_cast<Eigen::Index>(s)).noalias() =
                    wv.col(0).segment(lo, len).transpose() * xv.middleRows(lo, len);
        }
        return record(std::move(out), {w, x}, [w, x, offsets](Tape &t, int self) {
            const Matrix &g = t.grad(self);
            const bool gw = t.needs(w), gx = t.needs(x);
            for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
                const int lo = offsets[s], len = offsets[s + 1] - offsets[s];
                if (len == 0) continue;
                const auto row = g.row(static_cast<Eigen::Index>(s));
                if (gw) t.grad(w.id).col(0).segment(lo, len).noalias() += t.value(x).middleRows(lo, len) * row.transpose();
                if (gx) t.grad(x.id).middleRows(lo, len).noalias() += t.value(w).col(0).segment(lo, len) * row;
            }
        });
    }

    /// Fused attention aggregation over edges grouped by target segment.
    /// Edge e of segment s with source j and raw features f_e gets the logit
    /// elu(lt[s] + ls[j] + f_e . ce), the weights are a softmax within the
    /// segment, and row s of the result is sum_e alpha_e (p[j] + f_e m^T).
    /// Shapes: lt Sx1, ls Nx1, ce 1xF, p NxL, m LxF, feat ExF.
    Var segment_attention(Var lt, Var ls, Var ce, Var p, Var m, const Matrix &feat, const std::vector<int> &source,
                          const std::vector<int> &offsets) {
        const Matrix &ltv = value(lt), &lsv = value(ls), &cev = value(ce), &pv = value(p), &mv = value(m);
        const Eigen::Index segs = static_cast<Eigen::Index>(offsets.size()) - 1;
        const Eigen::Index edges = static_cast<Eigen::Index>(source.size());
        if (ltv.rows() != segs || feat.rows() != edges || cev.cols() != feat.cols() || mv.cols() != feat.cols() ||
            pv.cols() != mv.rows() || lsv.rows() != pv.rows())
            throw Error(ErrorCode::ShapeMismatch, "segment_attention: inconsistent shapes");
        const Eigen::VectorXd fe = feat * cev.transpose();
        Eigen::VectorXd alpha(edges), y(edges);
        Matrix fagg = Matrix::Zero(segs, feat.cols());
        Matrix out = Matrix::Zero(segs, pv.cols());
        for (Eigen::Index s = 0; s < segs; ++s) {
            const int lo = offsets[s], hi = offsets[s + 1];
            if (lo == hi) continue;
            double mx = -std::numeric_limits<double>::infinity();
            for (int e = lo; e < hi; ++e) {
                const double z = ltv(s, 0) + lsv(source[e], 0) + fe(e);
                y(e) = z > 0.0 ? z : std::expm1(z);
                mx = std::max(mx, y(e));
            }
            double sum = 0.0;
            for (int e = lo; e < hi; ++e) sum += alpha(e) = std::exp(y(e) - mx);
            for (int e = lo; e < hi; ++e) {
                alpha(e) /= sum;
                out.row(s) += alpha(e) * pv.row(source[e]);
                fagg.row(s) += alpha(e) * feat.row(e);
            }
        }
        out.noalias() += fagg * mv.transpose();
        return record(std::move(out), {lt, ls, ce, p, m},
                      [=, feat = feat](Tape &t, int self) {
                          const Matrix &g = t.grad(self);
                          const Matrix &pw = t.value(p);
                          const Matrix &mw = t.value(m);
                          if (t.needs(m)) t.grad(m.id).noalias() += g.transpose() * fagg;
                          const Matrix gm = g * mw;  // S x F: gradient reaching each f_e through m
                          Eigen::VectorXd dz(edges);
                          for (Eigen::Index s = 0; s < segs; ++s) {
                              const int lo = offsets[s], hi = offsets[s + 1];
                              double dot = 0.0;
                              for (int e = lo; e < hi; ++e) {
                                  const double da = g.row(s).dot(pw.row(source[e])) + gm.row(s).dot(feat.row(e));
                                  dz(e) = da;
                                  dot += alpha(e) * da;
                              }
                              for (int e = lo; e < hi; ++e) {
                                  const double dy = alpha(e) * (dz(e) - dot);
                                  dz(e) = y(e) > 0.0 ? dy : dy * (y(e) + 1.0);
                              }
                          }
                          if (t.needs(p)) {
                              Matrix &gp = t.grad(p.id);
                              for (Eigen::Index s = 0; s < segs; ++s)
                                  for (int e = offsets[s]; e < offsets[s + 1]; ++e)
                                      gp.row(source[e]) += alpha(e) * g.row(s);
                          }
                          if (t.needs(lt)) {
                              Matrix &gl = t.grad(lt.id);
                              for (Eigen::Index s = 0; s < segs; ++s)
                                  for (int e = offsets[s]; e < offsets[s + 1]; ++e) gl(s, 0) += dz(e);
                          }
                          if (t.needs(ls)) {
                              Matrix &gl = t.grad(ls.id);
                              for (Eigen::Index e = 0; e < edges; ++e) gl(source[e], 0) += dz(e);
                          }
                          if (t.needs(ce)) t.grad(ce.id).noalias() += dz.transpose() * feat;
                      });
    }

    Var mean_rows(Var a) {
        const Matrix &x = value(a);
        const double n = static_cast<double>(x.rows());
        Matrix out = x.colwise().sum() / n;
        return record(std::move(out), {a}, [a, n](Tape &t, int self) {
            t.grad(a.id).rowwise() += t.grad(self).row(0) / n;
        });
    }

    Var sum(Var a) {
        Matrix out = Matrix::Constant(1, 1, value(a).sum());
        return record(std::move(out), {a}, [a](Tape &t, int self) { t.grad(a.id).array() += t.grad(self)(0, 0); });
    }

    /// Log-softmax of a column vector.
    Var log_softmax(Var a) {
        const Matrix &x = value(a);
        const double m = x.maxCoeff();
        const double lse = m + std::log((x.array() - m).exp().sum());
        Matrix out = x.array() - lse;
        return record(std::move(out), {a}, [a](Tape &t, int self) {
            const Matrix &g = t.grad(self);
            const double gs = g.sum();
            t.grad(a.id).array() += g.array() - t.value(Var{self}).array().exp() * gs;
        });
    }

    /// Element (r, c) as a 1x1 variable.
    Var pick(Var a, Eigen::Index r, Eigen::Index c = 0) {
        Matrix out = Matrix::Constant(1, 1, value(a)(r, c));
        return record(std::move(out), {a}, [a, r, c](Tape &t, int self) { t.grad(a.id)(r, c) += t.grad(self)(0, 0); });
    }

private:
    using Backward = std::function<void(Tape &, int)>;

    struct Node {
        Matrix own;
        const Matrix *ref = nullptr;
        Matrix grad;
        Matrix *sink = nullptr;
        bool needs_grad = false;
        Backward back;
    };

    static Error shape_error(const char *op, const Matrix &a, const Matrix &b) {
        return Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                                   std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                                   "x" + std::to_string(b.cols()));
    }

    [[nodiscard]] bool needs(Var v) const { return nodes_[v.id].needs_grad; }

    // Parameters accumulate straight into their sink.
    Matrix &grad(int id) {
        Node &n = nodes_[id];
        if (n.sink) return *n.sink;
        if (n.grad.size() == 0) {
            const Matrix &v = n.ref ? *n.ref : n.own;
            n.grad = Matrix::Zero(v.rows(), v.cols());
        }
        return n.grad;
    }

    Var push(Matrix m) {
        Node n;
        n.own = std::move(m);
        nodes_.push_back(std::move(n));
        return {static_cast<int>(nodes_.size()) - 1};
    }

    Var record(Matrix out, const std::vector<Var> &parents, Backward back) {
        Var v = push(std::move(out));
        if (!record_) return v;
        bool any = false;
        for (Var p : parents) any = any || nodes_[p.id].needs_grad;
        if (any) {
            nodes_[v.id].needs_grad = true;
            nodes_[v.id].back = std::move(back);
        }
        return v;
    }

    bool record_;
    std::vector<Node> nodes_;
};

/// Adam over a list of tensors.
class Adam {
public:
    struct Config {
        double lr = 2e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam() = default;
    explicit Adam(Config cfg) : cfg_(cfg) {}

    void step(std::vector<Matrix> &params, const std::vector<Matrix> &grads) {
        if (m_.empty())
            for (const auto &p : params) {
                m_.push_back(Matrix::Zero(p.rows(), p.cols()));
                v_.push_back(Matrix::Zero(p.rows(), p.cols()));
            }
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i].cwiseProduct(grads[i]);
            params[i].array() -=
                cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
        }
    }

    [[nodiscard]] int steps() const { return t_; }

private:
    Config cfg_;
    std::vector<Matrix> m_, v_;
    int t_ = 0;
};

}  // namespace dmalab::ad
