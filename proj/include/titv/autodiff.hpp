// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode automatic differentiation over Tensor values.
//
// Nodes are appended in creation order, which is a valid topological order,
// so backward() is a single reverse sweep. A Tape can be cleared and reused;
// cleared nodes keep their buffers so per-sample graphs do not reallocate.
// One Tape belongs to one thread at a time.

#pragma once

#include <cstdint>
#include <deque>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "titv/ops.hpp"

namespace titv {

class Tape;

/// Handle to a node on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t index = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
};

enum class OpTag : std::uint8_t {
    leaf,     // differentiable input (model parameter)
    constant, // non-differentiable input
    matvec,
    add,
    sub,
    hadamard,
    scale,
    sigmoid,
    tanh,
    identity,
    mean_pool,
    sum,
    concat,
    dot,
    cross_entropy,
    squared_error,
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void clear() {
        count_ = 0;
        operands_.clear();
    }

    std::size_t size() const { return count_; }

    /// Differentiable leaf whose value is borrowed; `value` must outlive the tape contents.
    Var leaf(const Tensor& value) { return borrow(OpTag::leaf, value); }
    /// Non-differentiable input, borrowed.
    Var input(const Tensor& value) { return borrow(OpTag::constant, value); }
    /// Non-differentiable input, copied onto the tape.
    Var constant(const Tensor& value) {
        Node& n = push(OpTag::constant, value.shape());
        n.value = value;
        return {this, last()};
    }
    Var constant(std::span<const double> data) {
        Node& n = push(OpTag::constant, Shape::vector(data.size()));
        std::copy(data.begin(), data.end(), n.value.values().begin());
        return {this, last()};
    }
    Var constant_filled(std::size_t n, double fill) {
        Node& node = push(OpTag::constant, Shape::vector(n));
        node.value.fill(fill);
        return {this, last()};
    }

    const Tensor& value(Var v) const {
        const Node& n = nodes_[v.index];
        return n.external ? *n.external : n.value;
    }
    const Tensor& grad(Var v) const { return nodes_[v.index].grad; }
    OpTag tag(Var v) const { return nodes_[v.index].tag; }

    Var matvec(Var w, Var x) {
        kernel::check_matvec(value(w), value(x));
        Node& n = push(OpTag::matvec, Shape::vector(value(w).rows()), {w, x});
        kernel::matvec(value(w), value(x), n.value);
        return {this, last()};
    }

    Var elementwise(Elementwise op, Var a, Var b) {
        check_elementwise(op, value(a), value(b));
        static constexpr OpTag tags[] = {OpTag::add, OpTag::sub, OpTag::hadamard, OpTag::scale};
        Node& n = push(tags[static_cast<int>(op)], value(a).shape(), {a, b});
        kernel::elementwise(op, value(a), value(b), n.value);
        return {this, last()};
    }

    Var activate(Activation kind, Var x) {
        static constexpr OpTag tags[] = {OpTag::sigmoid, OpTag::tanh, OpTag::identity};
        Node& n = push(tags[static_cast<int>(kind)], value(x).shape(), {x});
        kernel::activate(kind, value(x), n.value);
        return {this, last()};
    }

    Var mean_pool(std::span<const Var> xs) { return reduce(OpTag::mean_pool, xs); }
    Var sum(std::span<const Var> xs) { return reduce(OpTag::sum, xs); }

    /// Vector concatenation [a; b].
    Var concat(Var a, Var b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        if (!av.is_vector() || !bv.is_vector()) {
            throw DimensionError("concat: expected vectors, got " + av.shape().str() + " and " + bv.shape().str());
        }
        Node& n = push(OpTag::concat, Shape::vector(av.size() + bv.size()), {a, b});
        std::copy(av.values().begin(), av.values().end(), n.value.values().begin());
        std::copy(bv.values().begin(), bv.values().end(), n.value.values().begin() + av.size());
        return {this, last()};
    }

    /// Inner product, producing a scalar.
    Var dot(Var a, Var b) {
        const double d = titv::dot(value(a), value(b));
        Node& n = push(OpTag::dot, Shape::scalar(), {a, b});
        n.value[0] = d;
        return {this, last()};
    }

    /// Binary cross-entropy of a probability against a {0,1} label; the
    /// probability is clamped to [1e-12, 1 - 1e-12] before the log.
    Var cross_entropy(Var prob, double label, double positive_weight = 1.0) {
        if (label != 0.0 && label != 1.0) {
            throw ContractViolation("cross_entropy: label must be 0 or 1, got " + std::to_string(label));
        }
        const double p = value(prob).item();
        const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
        Node& n = push(OpTag::cross_entropy, Shape::scalar(), {prob});
        n.aux[0] = label;
        n.aux[1] = positive_weight;
        n.value[0] = label == 1.0 ? -positive_weight * std::log(pc) : -std::log(1.0 - pc);
        return {this, last()};
    }

    Var squared_error(Var pred, double target) {
        const double diff = value(pred).item() - target;
        Node& n = push(OpTag::squared_error, Shape::scalar(), {pred});
        n.aux[0] = target;
        n.value[0] = diff * diff;
        return {this, last()};
    }

    /// Reverse sweep from a scalar root. Every accumulator is zeroed first,
    /// then the root is seeded with 1.
    void backward(Var root) {
        if (root.tape != this) throw ContractViolation("backward: root belongs to another tape");
        if (value(root).size() != 1) {
            throw ContractViolation("backward: root must be scalar, got shape " + value(root).shape().str());
        }
        for (std::size_t i = 0; i < count_; ++i) {
            Node& n = nodes_[i];
            n.grad.reset(shape_of(n));
        }
        nodes_[root.index].grad[0] = 1.0;
        for (std::size_t i = root.index + 1; i-- > 0;) {
            if (nodes_[i].needs_grad) propagate(nodes_[i]);
        }
    }

    static constexpr double kProbFloor = 1e-12;

private:
    struct Node {
        OpTag tag = OpTag::constant;
        bool needs_grad = false;
        std::uint32_t first = 0; // offset into operands_
        std::uint32_t arity = 0;
        double aux[2] = {0.0, 0.0};
        const Tensor* external = nullptr;
        Tensor value;
        Tensor grad;
    };

    std::uint32_t last() const { return static_cast<std::uint32_t>(count_ - 1); }

    const Shape& shape_of(const Node& n) const { return n.external ? n.external->shape() : n.value.shape(); }
    const Tensor& value_of(const Node& n) const { return n.external ? *n.external : n.value; }

    Node& next_node() {
        if (count_ == nodes_.size()) nodes_.emplace_back();
        Node& n = nodes_[count_++];
        n.external = nullptr;
        n.aux[0] = n.aux[1] = 0.0;
        return n;
    }

    Var borrow(OpTag tag, const Tensor& value) {
        Node& n = next_node();
        n.tag = tag;
        n.needs_grad = tag == OpTag::leaf;
        n.first = 0;
        n.arity = 0;
        n.external = &value;
        return {this, last()};
    }

    Node& push(OpTag tag, Shape shape, std::initializer_list<Var> parents = {}) {
        return push_span(tag, shape, std::span<const Var>(parents.begin(), parents.size()));
    }

    Node& push_span(OpTag tag, Shape shape, std::span<const Var> parents) {
        bool needs = false;
        for (Var p : parents) {
            if (p.tape != this) throw ContractViolation("autodiff: operands belong to different tapes");
            needs = needs || nodes_[p.index].needs_grad;
        }
        const auto first = static_cast<std::uint32_t>(operands_.size());
        for (Var p : parents) operands_.push_back(p.index);
        Node& n = next_node();
        n.tag = tag;
        n.needs_grad = needs;
        n.first = first;
        n.arity = static_cast<std::uint32_t>(parents.size());
        n.value.reset(shape);
        return n;
    }

    Var reduce(OpTag tag, std::span<const Var> xs) {
        if (xs.empty()) throw ContractViolation("reduce: empty sequence");
        const Tensor& first = value(xs.front());
        for (Var x : xs) require_same_shape(first, value(x), tag == OpTag::mean_pool ? "mean_pool" : "sum");
        Node& n = push_span(tag, first.shape(), xs);
        Tensor& out = n.value;
        for (Var x : xs) {
            const Tensor& v = value(x);
            for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
        }
        if (tag == OpTag::mean_pool) {
            const double count = static_cast<double>(xs.size());
            for (std::size_t i = 0; i < out.size(); ++i) out[i] /= count;
        }
        return {this, last()};
    }

    Node& operand(const Node& n, std::uint32_t k) { return nodes_[operands_[n.first + k]]; }

    void propagate(const Node& n) {
        const Tensor& g = n.grad;
        switch (n.tag) {
        case OpTag::leaf:
        case OpTag::constant:
            return;
        case OpTag::matvec: {
            Node& wn = operand(n, 0);
            Node& xn = operand(n, 1);
            const Tensor& w = value_of(wn);
            const Tensor& x = value_of(xn);
            const std::size_t rows = w.rows(), cols = w.cols();
            if (wn.needs_grad) {
                double* gw = wn.grad.values().data();
                for (std::size_t r = 0; r < rows; ++r) {
                    const double gr = g[r];
                    if (gr == 0.0) continue;
                    double* row = gw + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
                }
            }
            if (xn.needs_grad) {
                const double* wp = w.values().data();
                for (std::size_t r = 0; r < rows; ++r) {
                    const double gr = g[r];
                    const double* row = wp + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) xn.grad[c] += gr * row[c];
                }
            }
            return;
        }
        case OpTag::add:
        case OpTag::sub: {
            Node& a = operand(n, 0);
            Node& b = operand(n, 1);
            const double sign = n.tag == OpTag::add ? 1.0 : -1.0;
            if (a.needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
            if (b.needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) b.grad[i] += sign * g[i];
            return;
        }
        case OpTag::hadamard: {
            Node& a = operand(n, 0);
            Node& b = operand(n, 1);
            const Tensor& av = value_of(a);
            const Tensor& bv = value_of(b);
            if (a.needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * bv[i];
            if (b.needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) b.grad[i] += g[i] * av[i];
            return;
        }
        case OpTag::scale: {
            Node& a = operand(n, 0);
            Node& s = operand(n, 1);
            const Tensor& av = value_of(a);
            const double sv = value_of(s)[0];
            if (a.needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * sv;
            if (s.needs_grad) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
                s.grad[0] += acc;
            }
            return;
        }
        case OpTag::sigmoid: {
            Node& a = operand(n, 0);
            if (a.needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
            return;
        }
        case OpTag::tanh: {
            Node& a = operand(n, 0);
            if (a.needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
            return;
        }
        case OpTag::identity: {
            Node& a = operand(n, 0);
            if (a.needs_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
            return;
        }
        case OpTag::mean_pool:
        case OpTag::sum: {
            const double factor = n.tag == OpTag::mean_pool ? 1.0 / static_cast<double>(n.arity) : 1.0;
            for (std::uint32_t k = 0; k < n.arity; ++k) {
                Node& a = operand(n, k);
                if (!a.needs_grad) continue;
                for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * factor;
            }
            return;
        }
        case OpTag::concat: {
            Node& a = operand(n, 0);
            Node& b = operand(n, 1);
            const std::size_t na = shape_of(a).size();
            if (a.needs_grad)
                for (std::size_t i = 0; i < na; ++i) a.grad[i] += g[i];
            if (b.needs_grad)
                for (std::size_t i = 0; i < shape_of(b).size(); ++i) b.grad[i] += g[na + i];
            return;
        }
        case OpTag::dot: {
            Node& a = operand(n, 0);
            Node& b = operand(n, 1);
            const Tensor& av = value_of(a);
            const Tensor& bv = value_of(b);
            if (a.needs_grad)
                for (std::size_t i = 0; i < av.size(); ++i) a.grad[i] += g[0] * bv[i];
            if (b.needs_grad)
                for (std::size_t i = 0; i < av.size(); ++i) b.grad[i] += g[0] * av[i];
            return;
        }
        case OpTag::cross_entropy: {
            Node& a = operand(n, 0);
            const double p = value_of(a)[0];
            if (p < kProbFloor || p > 1.0 - kProbFloor) return; // clamped: flat
            const double label = n.aux[0];
            const double d = label == 1.0 ? -n.aux[1] / p : 1.0 / (1.0 - p);
            a.grad[0] += g[0] * d;
            return;
        }
        case OpTag::squared_error: {
            Node& a = operand(n, 0);
            a.grad[0] += g[0] * 2.0 * (value_of(a)[0] - n.aux[0]);
            return;
        }
        }
    }

    std::deque<Node> nodes_;
    std::size_t count_ = 0;
    std::vector<std::uint32_t> operands_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }
inline const Tensor& Var::grad() const { return tape->grad(*this); }

// Free-function spellings used by model code.

inline Var matvec(Var w, Var x) { return w.tape->matvec(w, x); }
inline Var add(Var a, Var b) { return a.tape->elementwise(Elementwise::add, a, b); }
inline Var sub(Var a, Var b) { return a.tape->elementwise(Elementwise::sub, a, b); }
inline Var hadamard(Var a, Var b) { return a.tape->elementwise(Elementwise::hadamard, a, b); }
inline Var scale(Var a, Var s) { return a.tape->elementwise(Elementwise::scale, a, s); }
inline Var activate(Activation kind, Var x) { return x.tape->activate(kind, x); }
inline Var sigmoid(Var x) { return activate(Activation::sigmoid, x); }
inline Var tanh(Var x) { return activate(Activation::tanh, x); }
inline Var concat(Var a, Var b) { return a.tape->concat(a, b); }
inline Var dot(Var a, Var b) { return a.tape->dot(a, b); }

} // namespace titv
