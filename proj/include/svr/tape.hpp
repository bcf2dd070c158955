// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/tensor.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace svr::ad {

template <typename T> class Tape;

// Handle to a node on a tape. Cheap to copy; the tape owns all storage.
template <typename T>
class Var {
public:
    Var() = default;
    Var(Tape<T>* tape, int32_t id) : tape_(tape), id_(id) {}

    Tape<T>* tape() const { return tape_; }
    int32_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

    const Tensor<T>& value() const { return tape_->node_value(id_); }
    const Shape& shape() const { return value().shape; }

    // Gradient of the last backward() root with respect to this node.
    Tensor<T> grad() const { return tape_->grad_of(id_); }

private:
    Tape<T>* tape_ = nullptr;
    int32_t id_ = -1;
};

struct TapeError : std::runtime_error {
    explicit TapeError(const std::string& m) : std::runtime_error("tape error: " + m) {}
};

// Reverse-mode tape. Node creation order is a topological order of the
// recorded graph, so backward() is a single reverse sweep visiting each node
// exactly once. A tape can be differentiated once; reuse raises TapeError.
template <typename T>
class Tape {
public:
    using PullFn = std::function<void(Tape&)>;

    Var<T> leaf(Tensor<T> v) {
        return Var<T>(this, push(std::move(v), "leaf", nullptr));
    }

    Var<T> leaf_scalar(T v) { return leaf(Tensor<T>::scalar(v)); }

    int32_t next_id() const { return int32_t(nodes_.size()); }

    int32_t push(Tensor<T> value, const char* op, PullFn pull) {
        nodes_.push_back(Node{std::move(value), Tensor<T>(), std::move(pull), op});
        return int32_t(nodes_.size() - 1);
    }

    const Tensor<T>& node_value(int32_t id) const { return nodes_[size_t(id)].value; }
    const Tensor<T>& node_grad(int32_t id) const { return nodes_[size_t(id)].grad; }

    void accumulate(int32_t id, Tensor<T> delta) {
        Node& n = nodes_[size_t(id)];
        if (n.grad.data.empty()) {
            n.grad = std::move(delta);
        } else {
            for (size_t i = 0; i < n.grad.data.size(); ++i) n.grad.data[i] += delta.data[i];
        }
    }

    void backward(const Var<T>& root) {
        if (root.tape() != this) throw TapeError("backward: root from another tape");
        if (consumed_) throw TapeError("backward: graph already consumed");
        if (node_value(root.id()).numel() != 1)
            throw TapeError("backward: root is not scalar, shape " +
                            shape_str(node_value(root.id()).shape));
        consumed_ = true;
        Node& r = nodes_[size_t(root.id())];
        r.grad = Tensor<T>(r.value.shape, T(1));
        for (int32_t id = root.id(); id >= 0; --id) {
            Node& n = nodes_[size_t(id)];
            if (!n.grad.data.empty() && n.pull) n.pull(*this);
        }
    }

    // Gradient of a node; zeros if backward never reached it.
    Tensor<T> grad_of(int32_t id) const {
        const Node& n = nodes_[size_t(id)];
        if (n.grad.data.empty()) return Tensor<T>(n.value.shape, T(0));
        return n.grad;
    }

    bool consumed() const { return consumed_; }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad; // empty until backward touches it
        PullFn pull;    // null for leaves
        const char* op;
    };

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// recorded ops (Var overloads)
//
// Each op computes the primal with the tensor kernel, rejects non-finite
// results naming the op, and registers the adjoint.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
inline Tape<T>& same_tape(const Var<T>& a, const Var<T>& b) {
    if (a.tape() != b.tape()) throw TapeError("operands recorded on different tapes");
    return *a.tape();
}

} // namespace detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tp = detail::same_tape(a, b);
    Tensor<T> v = k_add(a.value(), b.value());
    check_finite(v, "add");
    const int32_t ia = a.id(), ib = b.id(), self = tp.next_id();
    tp.push(std::move(v), "add", [ia, ib, self](Tape<T>& t) {
        t.accumulate(ia, t.node_grad(self));
        t.accumulate(ib, t.node_grad(self));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tp = detail::same_tape(a, b);
    Tensor<T> v = k_sub(a.value(), b.value());
    check_finite(v, "sub");
    const int32_t ia = a.id(), ib = b.id(), self = tp.next_id();
    tp.push(std::move(v), "sub", [ia, ib, self](Tape<T>& t) {
        t.accumulate(ia, t.node_grad(self));
        t.accumulate(ib, k_neg(t.node_grad(self)));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tp = detail::same_tape(a, b);
    Tensor<T> v = k_mul(a.value(), b.value());
    check_finite(v, "mul");
    const int32_t ia = a.id(), ib = b.id(), self = tp.next_id();
    tp.push(std::move(v), "mul", [ia, ib, self](Tape<T>& t) {
        t.accumulate(ia, k_mul(t.node_grad(self), t.node_value(ib)));
        t.accumulate(ib, k_mul(t.node_grad(self), t.node_value(ia)));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tp = detail::same_tape(a, b);
    Tensor<T> v = k_div(a.value(), b.value());
    check_finite(v, "div");
    const int32_t ia = a.id(), ib = b.id(), self = tp.next_id();
    tp.push(std::move(v), "div", [ia, ib, self](Tape<T>& t) {
        const Tensor<T>& g = t.node_grad(self);
        const Tensor<T>& bv = t.node_value(ib);
        t.accumulate(ia, k_div(g, bv));
        // d/db (a/b) = -a / b^2 = -out / b
        t.accumulate(ib, k_neg(k_div(k_mul(g, t.node_value(self)), bv)));
    });
    return Var<T>(&tp, self);
}

// multiply by a compile-time constant; no second operand node
template <typename T>
Var<T> scale(const Var<T>& a, T c) {
    Tape<T>& tp = *a.tape();
    Tensor<T> v = k_scale(a.value(), c);
    check_finite(v, "scale");
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "scale", [ia, self, c](Tape<T>& t) {
        t.accumulate(ia, k_scale(t.node_grad(self), c));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> offset(const Var<T>& a, T c) {
    Tape<T>& tp = *a.tape();
    Tensor<T> v = k_offset(a.value(), c);
    check_finite(v, "offset");
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "offset", [ia, self](Tape<T>& t) {
        t.accumulate(ia, t.node_grad(self));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    Tape<T>& tp = detail::same_tape(a, b);
    Tensor<T> v = k_matmul(a.value(), b.value());
    check_finite(v, "matmul");
    const int32_t ia = a.id(), ib = b.id(), self = tp.next_id();
    tp.push(std::move(v), "matmul", [ia, ib, self](Tape<T>& t) {
        const Tensor<T>& g = t.node_grad(self);
        t.accumulate(ia, k_matmul_abt(g, t.node_value(ib)));
        t.accumulate(ib, k_matmul_atb(t.node_value(ia), g));
    });
    return Var<T>(&tp, self);
}

namespace detail {

template <typename T, typename Fwd, typename Bwd>
Var<T> unary_op(const Var<T>& a, const char* name, Fwd fwd, Bwd bwd) {
    Tape<T>& tp = *a.tape();
    Tensor<T> v = fwd(a.value());
    check_finite(v, name);
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), name, [ia, self, bwd](Tape<T>& t) {
        t.accumulate(ia, bwd(t.node_grad(self), t.node_value(ia), t.node_value(self)));
    });
    return Var<T>(&tp, self);
}

} // namespace detail

template <typename T>
Var<T> neg(const Var<T>& a) {
    return detail::unary_op(a, "neg", k_neg<T>,
        [](const Tensor<T>& g, const Tensor<T>&, const Tensor<T>&) { return k_neg(g); });
}

template <typename T>
Var<T> sin(const Var<T>& a) {
    return detail::unary_op(a, "sin", k_sin<T>,
        [](const Tensor<T>& g, const Tensor<T>& x, const Tensor<T>&) { return k_mul(g, k_cos(x)); });
}

template <typename T>
Var<T> cos(const Var<T>& a) {
    return detail::unary_op(a, "cos", k_cos<T>,
        [](const Tensor<T>& g, const Tensor<T>& x, const Tensor<T>&) {
            return k_neg(k_mul(g, k_sin(x)));
        });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
    return detail::unary_op(a, "exp", k_exp<T>,
        [](const Tensor<T>& g, const Tensor<T>&, const Tensor<T>& out) { return k_mul(g, out); });
}

template <typename T>
Var<T> log(const Var<T>& a) {
    return detail::unary_op(a, "log", k_log<T>,
        [](const Tensor<T>& g, const Tensor<T>& x, const Tensor<T>&) { return k_div(g, x); });
}

// relu'(0) = 0 by convention
template <typename T>
Var<T> relu(const Var<T>& a) {
    return detail::unary_op(a, "relu", k_relu<T>,
        [](const Tensor<T>& g, const Tensor<T>& x, const Tensor<T>&) {
            return map_binary(g, x, "relu_bwd", [](T gv, T xv) { return xv > T(0) ? gv : T(0); });
        });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
    return detail::unary_op(a, "sigmoid", k_sigmoid<T>,
        [](const Tensor<T>& g, const Tensor<T>&, const Tensor<T>& out) {
            return map_binary(g, out, "sigmoid_bwd",
                              [](T gv, T ov) { return gv * ov * (T(1) - ov); });
        });
}

// abs'(0) = 0 by convention
template <typename T>
Var<T> abs(const Var<T>& a) {
    return detail::unary_op(a, "abs", k_abs<T>,
        [](const Tensor<T>& g, const Tensor<T>& x, const Tensor<T>&) {
            return map_binary(g, x, "abs_bwd",
                              [](T gv, T xv) { return xv > T(0) ? gv : (xv < T(0) ? -gv : T(0)); });
        });
}

template <typename T>
Var<T> square(const Var<T>& a) {
    return detail::unary_op(a, "square", k_square<T>,
        [](const Tensor<T>& g, const Tensor<T>& x, const Tensor<T>&) {
            return map_binary(g, x, "square_bwd", [](T gv, T xv) { return T(2) * xv * gv; });
        });
}

template <typename T>
Var<T> sqrt(const Var<T>& a) {
    return detail::unary_op(a, "sqrt", k_sqrt<T>,
        [](const Tensor<T>& g, const Tensor<T>&, const Tensor<T>& out) {
            return map_binary(g, out, "sqrt_bwd", [](T gv, T ov) { return gv / (T(2) * ov); });
        });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
    Tape<T>& tp = *a.tape();
    Tensor<T> v = k_sum_all(a.value());
    check_finite(v, "sum");
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "sum", [ia, self](Tape<T>& t) {
        const T g = t.node_grad(self).item();
        t.accumulate(ia, Tensor<T>(t.node_value(ia).shape, g));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> sum(const Var<T>& a, int axis) {
    Tape<T>& tp = *a.tape();
    Tensor<T> v = k_sum_axis(a.value(), axis);
    check_finite(v, "sum_axis");
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "sum_axis", [ia, self, axis](Tape<T>& t) {
        const Shape& in_shape = t.node_value(ia).shape;
        Tensor<T> g = t.node_grad(self);
        Shape keep = in_shape;
        keep[size_t(axis)] = 1;
        g.shape = keep;
        t.accumulate(ia, k_broadcast_to(g, in_shape));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> mean(const Var<T>& a) {
    Tape<T>& tp = *a.tape();
    Tensor<T> v = k_mean_all(a.value());
    check_finite(v, "mean");
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "mean", [ia, self](Tape<T>& t) {
        const Shape& in_shape = t.node_value(ia).shape;
        const T g = t.node_grad(self).item() / T(shape_numel(in_shape));
        t.accumulate(ia, Tensor<T>(in_shape, g));
    });
    return Var<T>(&tp, self);
}

// Full reductions; ties resolve to the first extremum in row-major order.
template <typename T>
Var<T> reduce_max(const Var<T>& a) {
    Tape<T>& tp = *a.tape();
    int64_t arg = 0;
    Tensor<T> v = k_max_all(a.value(), &arg);
    check_finite(v, "max");
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "max", [ia, self, arg](Tape<T>& t) {
        Tensor<T> g(t.node_value(ia).shape, T(0));
        g.data[size_t(arg)] = t.node_grad(self).item();
        t.accumulate(ia, std::move(g));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> reduce_min(const Var<T>& a) {
    Tape<T>& tp = *a.tape();
    int64_t arg = 0;
    Tensor<T> v = k_min_all(a.value(), &arg);
    check_finite(v, "min");
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "min", [ia, self, arg](Tape<T>& t) {
        Tensor<T> g(t.node_value(ia).shape, T(0));
        g.data[size_t(arg)] = t.node_grad(self).item();
        t.accumulate(ia, std::move(g));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> broadcast_to(const Var<T>& a, const Shape& target) {
    Tape<T>& tp = *a.tape();
    Tensor<T> v = k_broadcast_to(a.value(), target);
    check_finite(v, "broadcast");
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "broadcast", [ia, self](Tape<T>& t) {
        t.accumulate(ia, k_reduce_to(t.node_grad(self), t.node_value(ia).shape));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> reshape(const Var<T>& a, const Shape& s) {
    Tape<T>& tp = *a.tape();
    Tensor<T> v = k_reshape(a.value(), s);
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "reshape", [ia, self](Tape<T>& t) {
        Tensor<T> g = t.node_grad(self);
        g.shape = t.node_value(ia).shape;
        t.accumulate(ia, std::move(g));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> slice(const Var<T>& a, int axis, int64_t start, int64_t len) {
    Tape<T>& tp = *a.tape();
    Tensor<T> v = k_slice(a.value(), axis, start, len);
    const int32_t ia = a.id(), self = tp.next_id();
    tp.push(std::move(v), "slice", [ia, self, axis, start](Tape<T>& t) {
        Tensor<T> g(t.node_value(ia).shape, T(0));
        k_slice_scatter_add(g, t.node_grad(self), axis, start);
        t.accumulate(ia, std::move(g));
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
    if (parts.empty()) throw TapeError("concat: no operands");
    Tape<T>& tp = *parts[0].tape();
    std::vector<const Tensor<T>*> vals;
    std::vector<int32_t> ids;
    for (const auto& p : parts) {
        if (p.tape() != &tp) throw TapeError("concat: operands recorded on different tapes");
        vals.push_back(&p.value());
        ids.push_back(p.id());
    }
    Tensor<T> v = k_concat(vals, axis);
    check_finite(v, "concat");
    const int32_t self = tp.next_id();
    tp.push(std::move(v), "concat", [ids, self, axis](Tape<T>& t) {
        const Tensor<T>& g = t.node_grad(self);
        int64_t off = 0;
        for (int32_t id : ids) {
            const int64_t len = t.node_value(id).shape[size_t(axis)];
            t.accumulate(id, k_slice(g, axis, off, len));
            off += len;
        }
    });
    return Var<T>(&tp, self);
}

template <typename T>
Var<T> concat(std::initializer_list<Var<T>> parts, int axis) {
    return concat(std::vector<Var<T>>(parts), axis);
}

// ---------------------------------------------------------------------------
// primal overloads
//
// The same vocabulary on bare tensors, so numeric code can be written once
// and run either recorded (Var) or eagerly (Tensor). Eager calls still
// surface non-finite results.
// ---------------------------------------------------------------------------

#define SVR_PRIMAL_BINARY(name, kernel)                                            \
    template <typename T>                                                          \
    Tensor<T> name(const Tensor<T>& a, const Tensor<T>& b) {                       \
        Tensor<T> v = kernel(a, b);                                                \
        check_finite(v, #name);                                                    \
        return v;                                                                  \
    }

SVR_PRIMAL_BINARY(add, k_add)
SVR_PRIMAL_BINARY(sub, k_sub)
SVR_PRIMAL_BINARY(mul, k_mul)
SVR_PRIMAL_BINARY(div, k_div)
SVR_PRIMAL_BINARY(matmul, k_matmul)
#undef SVR_PRIMAL_BINARY

#define SVR_PRIMAL_UNARY(name, kernel)                                             \
    template <typename T>                                                          \
    Tensor<T> name(const Tensor<T>& a) {                                           \
        Tensor<T> v = kernel(a);                                                   \
        check_finite(v, #name);                                                    \
        return v;                                                                  \
    }

SVR_PRIMAL_UNARY(neg, k_neg)
SVR_PRIMAL_UNARY(sin, k_sin)
SVR_PRIMAL_UNARY(cos, k_cos)
SVR_PRIMAL_UNARY(exp, k_exp)
SVR_PRIMAL_UNARY(log, k_log)
SVR_PRIMAL_UNARY(relu, k_relu)
SVR_PRIMAL_UNARY(sigmoid, k_sigmoid)
SVR_PRIMAL_UNARY(abs, k_abs)
SVR_PRIMAL_UNARY(square, k_square)
SVR_PRIMAL_UNARY(sqrt, k_sqrt)
#undef SVR_PRIMAL_UNARY

template <typename T> Tensor<T> scale(const Tensor<T>& a, T c) {
    Tensor<T> v = k_scale(a, c);
    check_finite(v, "scale");
    return v;
}
template <typename T> Tensor<T> offset(const Tensor<T>& a, T c) {
    Tensor<T> v = k_offset(a, c);
    check_finite(v, "offset");
    return v;
}
template <typename T> Tensor<T> sum(const Tensor<T>& a) { return k_sum_all(a); }
template <typename T> Tensor<T> sum(const Tensor<T>& a, int axis) { return k_sum_axis(a, axis); }
template <typename T> Tensor<T> mean(const Tensor<T>& a) { return k_mean_all(a); }
template <typename T> Tensor<T> reduce_max(const Tensor<T>& a) { return k_max_all(a); }
template <typename T> Tensor<T> reduce_min(const Tensor<T>& a) { return k_min_all(a); }
template <typename T> Tensor<T> broadcast_to(const Tensor<T>& a, const Shape& s) {
    return k_broadcast_to(a, s);
}
template <typename T> Tensor<T> reshape(const Tensor<T>& a, const Shape& s) {
    return k_reshape(a, s);
}
template <typename T> Tensor<T> slice(const Tensor<T>& a, int axis, int64_t start, int64_t len) {
    return k_slice(a, axis, start, len);
}
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    std::vector<const Tensor<T>*> ptrs;
    ptrs.reserve(parts.size());
    for (const auto& p : parts) ptrs.push_back(&p);
    return k_concat(ptrs, axis);
}
template <typename T> Tensor<T> concat(std::initializer_list<Tensor<T>> parts, int axis) {
    return concat(std::vector<Tensor<T>>(parts), axis);
}

// ---------------------------------------------------------------------------
// traits and lifting helpers for code generic over Var<T> / Tensor<T>
// ---------------------------------------------------------------------------

template <class V> struct scalar_of;
template <typename T> struct scalar_of<Var<T>> { using type = T; };
template <typename T> struct scalar_of<Tensor<T>> { using type = T; };
template <class V> using scalar_of_t = typename scalar_of<V>::type;

template <typename T>
inline const Tensor<T>& value_of(const Var<T>& v) { return v.value(); }
template <typename T>
inline const Tensor<T>& value_of(const Tensor<T>& v) { return v; }

// Lift a constant tensor into the same evaluation context as `context`.
template <typename T>
inline Var<T> lift(const Var<T>& context, Tensor<T> c) { return context.tape()->leaf(std::move(c)); }
template <typename T>
inline Tensor<T> lift(const Tensor<T>&, Tensor<T> c) { return c; }

// Numerically stable softplus built from the primitive set:
// softplus(x) = relu(x) + log(1 + exp(-|x|)).
template <class V>
V softplus(const V& x) {
    using T = scalar_of_t<V>;
    return add(relu(x), log(offset(exp(scale(abs(x), T(-1))), T(1))));
}

} // namespace svr::ad
