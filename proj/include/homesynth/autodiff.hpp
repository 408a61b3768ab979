// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation over a static node graph.
//
// A Graph is built once with the builder methods (which only record nodes),
// then evaluated with forward() against named input bindings and
// differentiated with backward(). Nodes are appended in construction order,
// so the node list is always a topological order and the graph is acyclic.
//
// Shape conventions:
//   dense   x[B,In]  W[Out,In]  b[Out]       -> [B,Out]
//   conv1d  x[B,Cin,T] (or [Cin,T])  W[Cout,Cin,K]  b[Cout] -> [B,Cout,T]
//   reshape keeps dimension 0 and replaces the rest with the given tail.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "homesynth/error.hpp"
#include "homesynth/tensor.hpp"

namespace homesynth::ad {

enum class OpKind {
    Input,
    Param,
    Constant,
    Dense,
    Conv1d,
    LeakyRelu,
    Sigmoid,
    Tanh,
    Add,
    Mul,
    Affine,
    Reshape,
    Clamp,
    Mse,
    Bce,
    Sum,
    Mean,
    Reparameterize,
    GaussianKl,
};

inline const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Input: return "input";
        case OpKind::Param: return "param";
        case OpKind::Constant: return "constant";
        case OpKind::Dense: return "dense";
        case OpKind::Conv1d: return "dilated-causal-conv1d";
        case OpKind::LeakyRelu: return "leaky-relu";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Tanh: return "tanh";
        case OpKind::Add: return "add";
        case OpKind::Mul: return "mul";
        case OpKind::Affine: return "affine";
        case OpKind::Reshape: return "reshape";
        case OpKind::Clamp: return "clamp";
        case OpKind::Mse: return "mse";
        case OpKind::Bce: return "bce";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::Reparameterize: return "reparameterize";
        case OpKind::GaussianKl: return "gaussian-kl";
    }
    return "?";
}

struct NodeRef {
    std::size_t id = 0;
    bool operator==(const NodeRef&) const = default;
};

using Bindings = std::map<std::string, Tensor>;

namespace detail {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

struct ConvDims {
    std::size_t batch, cin, cout, len, kernel;
};

}  // namespace detail

class Graph {
public:
    NodeRef input(std::string name) {
        Node n{OpKind::Input};
        n.label = std::move(name);
        return push(std::move(n));
    }

    /// Leaf bound to a trainable parameter. Repeated calls with the same
    /// Param return the same node.
    NodeRef param(Param& p) {
        if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return NodeRef{it->second};
        Node n{OpKind::Param};
        n.param = &p;
        n.label = p.name;
        NodeRef ref = push(std::move(n));
        param_nodes_.emplace(&p, ref.id);
        return ref;
    }

    NodeRef constant(Tensor t) {
        Node n{OpKind::Constant};
        n.constant = std::move(t);
        return push(std::move(n));
    }

    NodeRef dense(NodeRef x, NodeRef weight, NodeRef bias) { return push_op(OpKind::Dense, {x, weight, bias}); }

    NodeRef conv1d(NodeRef x, NodeRef weight, NodeRef bias, std::size_t dilation) {
        if (dilation < 1) throw GraphError("dilated-causal-conv1d: dilation must be positive");
        NodeRef r = push_op(OpKind::Conv1d, {x, weight, bias});
        nodes_[r.id].dilation = dilation;
        return r;
    }

    NodeRef leaky_relu(NodeRef x, double slope) {
        NodeRef r = push_op(OpKind::LeakyRelu, {x});
        nodes_[r.id].a = slope;
        return r;
    }

    NodeRef sigmoid(NodeRef x) { return push_op(OpKind::Sigmoid, {x}); }
    NodeRef tanh(NodeRef x) { return push_op(OpKind::Tanh, {x}); }
    NodeRef add(NodeRef lhs, NodeRef rhs) { return push_op(OpKind::Add, {lhs, rhs}); }
    NodeRef mul(NodeRef lhs, NodeRef rhs) { return push_op(OpKind::Mul, {lhs, rhs}); }

    /// scale * x + shift
    NodeRef affine(NodeRef x, double scale, double shift) {
        NodeRef r = push_op(OpKind::Affine, {x});
        nodes_[r.id].a = scale;
        nodes_[r.id].b = shift;
        return r;
    }

    NodeRef reshape(NodeRef x, Shape tail) {
        NodeRef r = push_op(OpKind::Reshape, {x});
        nodes_[r.id].tail = std::move(tail);
        return r;
    }

    /// Forward clamps to [lo, hi]; gradient is zero where the clamp is active.
    NodeRef clamp(NodeRef x, double lo, double hi) {
        NodeRef r = push_op(OpKind::Clamp, {x});
        nodes_[r.id].a = lo;
        nodes_[r.id].b = hi;
        return r;
    }

    /// Mean over all elements of (lhs - rhs)^2.
    NodeRef mse(NodeRef lhs, NodeRef rhs) { return push_op(OpKind::Mse, {lhs, rhs}); }

    /// Mean binary cross-entropy of sigmoid(logits) against a constant label.
    NodeRef bce_with_logits(NodeRef logits, double label) {
        NodeRef r = push_op(OpKind::Bce, {logits});
        nodes_[r.id].a = label;
        return r;
    }

    NodeRef sum(NodeRef x) { return push_op(OpKind::Sum, {x}); }
    NodeRef mean(NodeRef x) { return push_op(OpKind::Mean, {x}); }

    /// mean + exp(0.5 * logvar) * epsilon
    NodeRef reparameterize(NodeRef mean, NodeRef logvar, NodeRef epsilon) {
        return push_op(OpKind::Reparameterize, {mean, logvar, epsilon});
    }

    /// KL(N(mean, exp(logvar)) || N(0, I)) summed over the last dimension and
    /// averaged over rows.
    NodeRef gaussian_kl(NodeRef mean, NodeRef logvar) { return push_op(OpKind::GaussianKl, {mean, logvar}); }

    void label(NodeRef r, std::string name) { node(r).label = std::move(name); }

    std::size_t size() const noexcept { return nodes_.size(); }
    OpKind kind(NodeRef r) const { return node(r).kind; }
    NodeRef root() const {
        if (nodes_.empty()) throw GraphError("empty graph");
        return NodeRef{nodes_.size() - 1};
    }

    const Tensor& value(NodeRef r) const {
        if (!forwarded_) throw GraphError("value() requested before forward()");
        return node(r).value;
    }

    const Tensor& grad(NodeRef r) const {
        if (!backwarded_) throw GraphError("grad() requested before backward()");
        return node(r).grad;
    }

    /// Evaluates every node and returns the value of the last one.
    const Tensor& forward(Bindings bindings) {
        bindings_ = std::move(bindings);
        return forward();
    }

    /// Re-evaluates with the most recent bindings (parameter values are read
    /// afresh, which is what finite-difference checks rely on).
    const Tensor& forward() {
        forwarded_ = false;
        backwarded_ = false;
        for (std::size_t i = 0; i < nodes_.size(); ++i) eval(i);
        forwarded_ = true;
        return nodes_.back().value;
    }

    /// Back-propagates from the scalar `root` (the last node by default).
    /// Node gradients are recomputed from scratch; parameter gradients are
    /// added to Param::grad, so callers zero them between steps.
    void backward() { backward(root()); }

    void backward(NodeRef from) {
        if (!forwarded_) throw GraphError("backward() called before forward()");
        Node& r = node(from);
        if (r.value.size() != 1) {
            throw GraphError("backward() needs a scalar root, got " + describe(from.id) + " with shape " +
                             shape_str(r.value.shape()));
        }
        for (std::size_t i = 0; i <= from.id; ++i) nodes_[i].grad = Tensor(nodes_[i].value.shape());
        r.grad[0] = 1.0;
        for (std::size_t i = from.id + 1; i-- > 0;) propagate(i);
        backwarded_ = true;
    }

private:
    struct Node {
        OpKind kind;
        std::vector<std::size_t> inputs{};
        std::string label{};
        Param* param = nullptr;
        Tensor constant{};
        std::size_t dilation = 1;
        double a = 0.0;
        double b = 0.0;
        Shape tail{};
        Tensor value{};
        Tensor grad{};
    };

    Node& node(NodeRef r) {
        if (r.id >= nodes_.size()) throw GraphError("node reference out of range");
        return nodes_[r.id];
    }
    const Node& node(NodeRef r) const {
        if (r.id >= nodes_.size()) throw GraphError("node reference out of range");
        return nodes_[r.id];
    }

    NodeRef push(Node n) {
        nodes_.push_back(std::move(n));
        forwarded_ = false;
        backwarded_ = false;
        return NodeRef{nodes_.size() - 1};
    }

    NodeRef push_op(OpKind kind, std::initializer_list<NodeRef> inputs) {
        Node n{kind};
        for (NodeRef r : inputs) {
            if (r.id >= nodes_.size()) throw GraphError(std::string(op_name(kind)) + ": input refers to a later node");
            n.inputs.push_back(r.id);
        }
        return push(std::move(n));
    }

    std::string describe(std::size_t id) const {
        const Node& n = nodes_[id];
        std::string s = std::string(op_name(n.kind)) + " node #" + std::to_string(id);
        if (!n.label.empty()) s += " '" + n.label + "'";
        return s;
    }

    [[noreturn]] void shape_error(std::size_t id, const std::string& what) const {
        throw GraphError("shape mismatch at " + describe(id) + ": " + what);
    }

    const Tensor& in(const Node& n, std::size_t k) const { return nodes_[n.inputs[k]].value; }

    detail::ConvDims conv_dims(std::size_t id) const {
        const Node& n = nodes_[id];
        const Tensor& x = in(n, 0);
        const Tensor& w = in(n, 1);
        const Tensor& bias = in(n, 2);
        if (w.rank() != 3) shape_error(id, "weights must be [Cout,Cin,K], got " + shape_str(w.shape()));
        detail::ConvDims d{};
        if (x.rank() == 3) {
            d = {x.dim(0), x.dim(1), w.dim(0), x.dim(2), w.dim(2)};
        } else if (x.rank() == 2) {
            d = {1, x.dim(0), w.dim(0), x.dim(1), w.dim(2)};
        } else {
            shape_error(id, "input must be [B,C,T] or [C,T], got " + shape_str(x.shape()));
        }
        if (w.dim(1) != d.cin) {
            shape_error(id, "channel mismatch: input has " + std::to_string(d.cin) + " channels, weights expect " +
                                std::to_string(w.dim(1)));
        }
        if (d.kernel < 1) shape_error(id, "kernel size must be at least 1");
        if (bias.size() != d.cout) shape_error(id, "bias must have " + std::to_string(d.cout) + " entries");
        return d;
    }

    void eval(std::size_t id) {
        Node& n = nodes_[id];
        switch (n.kind) {
            case OpKind::Input: {
                auto it = bindings_.find(n.label);
                if (it == bindings_.end()) throw GraphError("unbound input '" + n.label + "'");
                n.value = it->second;
                break;
            }
            case OpKind::Param: n.value = n.param->value; break;
            case OpKind::Constant: n.value = n.constant; break;
            case OpKind::Dense: {
                const Tensor& x = in(n, 0);
                const Tensor& w = in(n, 1);
                const Tensor& bias = in(n, 2);
                if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1) || bias.size() != w.dim(0)) {
                    shape_error(id, "x " + shape_str(x.shape()) + " W " + shape_str(w.shape()) + " b " +
                                        shape_str(bias.shape()));
                }
                const std::size_t rows = x.dim(0), fin = x.dim(1), fout = w.dim(0);
                Tensor out(Shape{rows, fout});
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* xr = x.data() + r * fin;
                    for (std::size_t o = 0; o < fout; ++o) {
                        const double* wo = w.data() + o * fin;
                        double acc = bias[o];
                        for (std::size_t i = 0; i < fin; ++i) acc += xr[i] * wo[i];
                        out[r * fout + o] = acc;
                    }
                }
                n.value = std::move(out);
                break;
            }
            case OpKind::Conv1d: {
                const auto d = conv_dims(id);
                const Tensor& x = in(n, 0);
                const Tensor& w = in(n, 1);
                const Tensor& bias = in(n, 2);
                Tensor out(x.rank() == 3 ? Shape{d.batch, d.cout, d.len} : Shape{d.cout, d.len});
                for (std::size_t b = 0; b < d.batch; ++b) {
                    for (std::size_t c = 0; c < d.cout; ++c) {
                        double* o = out.data() + (b * d.cout + c) * d.len;
                        std::fill(o, o + d.len, bias[c]);
                        for (std::size_t i = 0; i < d.cin; ++i) {
                            const double* xi = x.data() + (b * d.cin + i) * d.len;
                            for (std::size_t k = 0; k < d.kernel; ++k) {
                                const double wk = w[(c * d.cin + i) * d.kernel + k];
                                const std::size_t shift = (d.kernel - 1 - k) * n.dilation;
                                for (std::size_t t = shift; t < d.len; ++t) o[t] += wk * xi[t - shift];
                            }
                        }
                    }
                }
                n.value = std::move(out);
                break;
            }
            case OpKind::LeakyRelu: {
                n.value = in(n, 0);
                for (double& v : n.value.values()) v = v > 0.0 ? v : n.a * v;
                break;
            }
            case OpKind::Sigmoid: {
                n.value = in(n, 0);
                for (double& v : n.value.values()) v = detail::sigmoid(v);
                break;
            }
            case OpKind::Tanh: {
                n.value = in(n, 0);
                for (double& v : n.value.values()) v = std::tanh(v);
                break;
            }
            case OpKind::Add:
            case OpKind::Mul: {
                const Tensor& l = in(n, 0);
                const Tensor& r = in(n, 1);
                if (l.shape() != r.shape()) shape_error(id, shape_str(l.shape()) + " vs " + shape_str(r.shape()));
                n.value = l;
                for (std::size_t i = 0; i < l.size(); ++i) {
                    n.value[i] = n.kind == OpKind::Add ? l[i] + r[i] : l[i] * r[i];
                }
                break;
            }
            case OpKind::Affine: {
                n.value = in(n, 0);
                for (double& v : n.value.values()) v = n.a * v + n.b;
                break;
            }
            case OpKind::Reshape: {
                const Tensor& x = in(n, 0);
                if (x.rank() < 1) shape_error(id, "cannot reshape a rank-0 tensor");
                Shape s{x.dim(0)};
                s.insert(s.end(), n.tail.begin(), n.tail.end());
                if (shape_numel(s) != x.size()) shape_error(id, shape_str(x.shape()) + " -> " + shape_str(s));
                n.value = x.reshaped(std::move(s));
                break;
            }
            case OpKind::Clamp: {
                n.value = in(n, 0);
                for (double& v : n.value.values()) v = std::clamp(v, n.a, n.b);
                break;
            }
            case OpKind::Mse: {
                const Tensor& l = in(n, 0);
                const Tensor& r = in(n, 1);
                if (l.size() != r.size() || l.empty()) {
                    shape_error(id, shape_str(l.shape()) + " vs " + shape_str(r.shape()));
                }
                double acc = 0.0;
                for (std::size_t i = 0; i < l.size(); ++i) acc += (l[i] - r[i]) * (l[i] - r[i]);
                n.value = Tensor::scalar(acc / static_cast<double>(l.size()));
                break;
            }
            case OpKind::Bce: {
                const Tensor& x = in(n, 0);
                if (x.empty()) shape_error(id, "empty logits");
                double acc = 0.0;
                for (double v : x.values()) acc += detail::softplus(v) - n.a * v;
                n.value = Tensor::scalar(acc / static_cast<double>(x.size()));
                break;
            }
            case OpKind::Sum:
            case OpKind::Mean: {
                const Tensor& x = in(n, 0);
                if (x.empty()) shape_error(id, "empty input");
                double acc = 0.0;
                for (double v : x.values()) acc += v;
                if (n.kind == OpKind::Mean) acc /= static_cast<double>(x.size());
                n.value = Tensor::scalar(acc);
                break;
            }
            case OpKind::Reparameterize: {
                const Tensor& mu = in(n, 0);
                const Tensor& lv = in(n, 1);
                const Tensor& eps = in(n, 2);
                if (mu.shape() != lv.shape() || mu.shape() != eps.shape()) {
                    shape_error(id, "mean " + shape_str(mu.shape()) + " logvar " + shape_str(lv.shape()) +
                                        " epsilon " + shape_str(eps.shape()));
                }
                n.value = mu;
                for (std::size_t i = 0; i < mu.size(); ++i) n.value[i] = mu[i] + std::exp(0.5 * lv[i]) * eps[i];
                break;
            }
            case OpKind::GaussianKl: {
                const Tensor& mu = in(n, 0);
                const Tensor& lv = in(n, 1);
                if (mu.shape() != lv.shape() || mu.empty()) {
                    shape_error(id, "mean " + shape_str(mu.shape()) + " logvar " + shape_str(lv.shape()));
                }
                double acc = 0.0;
                for (std::size_t i = 0; i < mu.size(); ++i) acc += mu[i] * mu[i] + std::exp(lv[i]) - 1.0 - lv[i];
                n.value = Tensor::scalar(0.5 * acc / static_cast<double>(kl_rows(mu)));
                break;
            }
        }
    }

    static std::size_t kl_rows(const Tensor& t) { return t.rank() >= 2 ? t.dim(0) : 1; }

    void accumulate(std::size_t target, const Tensor& g) {
        Tensor& dst = nodes_[target].grad;
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }

    void propagate(std::size_t id) {
        Node& n = nodes_[id];
        const Tensor& g = n.grad;
        switch (n.kind) {
            case OpKind::Input:
            case OpKind::Constant: break;
            case OpKind::Param: {
                Tensor& pg = n.param->grad;
                for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
                break;
            }
            case OpKind::Dense: {
                const Tensor& x = in(n, 0);
                const Tensor& w = in(n, 1);
                Tensor& gx = nodes_[n.inputs[0]].grad;
                Tensor& gw = nodes_[n.inputs[1]].grad;
                Tensor& gb = nodes_[n.inputs[2]].grad;
                const std::size_t rows = x.dim(0), fin = x.dim(1), fout = w.dim(0);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* xr = x.data() + r * fin;
                    double* gxr = gx.data() + r * fin;
                    for (std::size_t o = 0; o < fout; ++o) {
                        const double go = g[r * fout + o];
                        if (go == 0.0) continue;
                        const double* wo = w.data() + o * fin;
                        double* gwo = gw.data() + o * fin;
                        for (std::size_t i = 0; i < fin; ++i) {
                            gxr[i] += go * wo[i];
                            gwo[i] += go * xr[i];
                        }
                        gb[o] += go;
                    }
                }
                break;
            }
            case OpKind::Conv1d: {
                const auto d = conv_dims(id);
                const Tensor& x = in(n, 0);
                const Tensor& w = in(n, 1);
                Tensor& gx = nodes_[n.inputs[0]].grad;
                Tensor& gw = nodes_[n.inputs[1]].grad;
                Tensor& gb = nodes_[n.inputs[2]].grad;
                for (std::size_t b = 0; b < d.batch; ++b) {
                    for (std::size_t c = 0; c < d.cout; ++c) {
                        const double* go = g.data() + (b * d.cout + c) * d.len;
                        double bsum = 0.0;
                        for (std::size_t t = 0; t < d.len; ++t) bsum += go[t];
                        gb[c] += bsum;
                        for (std::size_t i = 0; i < d.cin; ++i) {
                            const double* xi = x.data() + (b * d.cin + i) * d.len;
                            double* gxi = gx.data() + (b * d.cin + i) * d.len;
                            for (std::size_t k = 0; k < d.kernel; ++k) {
                                const std::size_t widx = (c * d.cin + i) * d.kernel + k;
                                const double wk = w[widx];
                                const std::size_t shift = (d.kernel - 1 - k) * n.dilation;
                                double wacc = 0.0;
                                for (std::size_t t = shift; t < d.len; ++t) {
                                    gxi[t - shift] += wk * go[t];
                                    wacc += go[t] * xi[t - shift];
                                }
                                gw[widx] += wacc;
                            }
                        }
                    }
                }
                break;
            }
            case OpKind::LeakyRelu: {
                const Tensor& x = in(n, 0);
                Tensor& gx = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += x[i] > 0.0 ? g[i] : n.a * g[i];
                break;
            }
            case OpKind::Sigmoid: {
                Tensor& gx = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
                break;
            }
            case OpKind::Tanh: {
                Tensor& gx = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
                break;
            }
            case OpKind::Add: {
                accumulate(n.inputs[0], g);
                accumulate(n.inputs[1], g);
                break;
            }
            case OpKind::Mul: {
                const Tensor& l = in(n, 0);
                const Tensor& r = in(n, 1);
                Tensor& gl = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gl[i] += g[i] * r[i];
                Tensor& gr = nodes_[n.inputs[1]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gr[i] += g[i] * l[i];
                break;
            }
            case OpKind::Affine: {
                Tensor& gx = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.a * g[i];
                break;
            }
            case OpKind::Reshape: accumulate(n.inputs[0], g); break;
            case OpKind::Clamp: {
                const Tensor& x = in(n, 0);
                Tensor& gx = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (x[i] >= n.a && x[i] <= n.b) gx[i] += g[i];
                }
                break;
            }
            case OpKind::Mse: {
                const Tensor& l = in(n, 0);
                const Tensor& r = in(n, 1);
                const double scale = 2.0 * g[0] / static_cast<double>(l.size());
                Tensor& gl = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < l.size(); ++i) gl[i] += scale * (l[i] - r[i]);
                Tensor& gr = nodes_[n.inputs[1]].grad;
                for (std::size_t i = 0; i < l.size(); ++i) gr[i] -= scale * (l[i] - r[i]);
                break;
            }
            case OpKind::Bce: {
                const Tensor& x = in(n, 0);
                const double scale = g[0] / static_cast<double>(x.size());
                Tensor& gx = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < x.size(); ++i) gx[i] += scale * (detail::sigmoid(x[i]) - n.a);
                break;
            }
            case OpKind::Sum:
            case OpKind::Mean: {
                Tensor& gx = nodes_[n.inputs[0]].grad;
                const double v = n.kind == OpKind::Mean ? g[0] / static_cast<double>(gx.size()) : g[0];
                for (double& e : gx.values()) e += v;
                break;
            }
            case OpKind::Reparameterize: {
                const Tensor& lv = in(n, 1);
                const Tensor& eps = in(n, 2);
                Tensor& gmu = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gmu[i] += g[i];
                Tensor& glv = nodes_[n.inputs[1]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) glv[i] += g[i] * 0.5 * std::exp(0.5 * lv[i]) * eps[i];
                Tensor& geps = nodes_[n.inputs[2]].grad;
                for (std::size_t i = 0; i < g.size(); ++i) geps[i] += g[i] * std::exp(0.5 * lv[i]);
                break;
            }
            case OpKind::GaussianKl: {
                const Tensor& mu = in(n, 0);
                const Tensor& lv = in(n, 1);
                const double scale = g[0] / static_cast<double>(kl_rows(mu));
                Tensor& gmu = nodes_[n.inputs[0]].grad;
                for (std::size_t i = 0; i < mu.size(); ++i) gmu[i] += scale * mu[i];
                Tensor& glv = nodes_[n.inputs[1]].grad;
                for (std::size_t i = 0; i < mu.size(); ++i) glv[i] += scale * 0.5 * (std::exp(lv[i]) - 1.0);
                break;
            }
        }
    }

    std::vector<Node> nodes_;
    std::unordered_map<const Param*, std::size_t> param_nodes_;
    Bindings bindings_;
    bool forwarded_ = false;
    bool backwarded_ = false;
};

/// Largest |analytic - central difference| / max(1, |analytic|) over the
/// components of `param`, evaluated at the graph's current bindings.
inline double grad_check(Graph& graph, Param& param, double step) {
    if (!(step >= 1e-6 && step <= 1e-3)) throw std::invalid_argument("grad_check: step must lie in [1e-6, 1e-3]");
    graph.forward();
    param.zero_grad();
    graph.backward();
    const Tensor analytic = param.grad;

    double worst = 0.0;
    for (std::size_t i = 0; i < param.value.size(); ++i) {
        const double saved = param.value[i];
        param.value[i] = saved + step;
        const double up = graph.forward().item();
        param.value[i] = saved - step;
        const double down = graph.forward().item();
        param.value[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
    }
    graph.forward();
    return worst;
}

}  // namespace homesynth::ad
