// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace svr::ad {

using Shape = std::vector<int64_t>;

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

// Raised when a forward op produces a NaN or infinity from finite inputs.
struct NonFiniteError : std::runtime_error {
    explicit NonFiniteError(const std::string& op)
        : std::runtime_error("non-finite result in op '" + op + "'"), op_name(op) {}
    std::string op_name;
};

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = int(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
    return st;
}

// Dense row-major tensor. Scalars have shape {} and one element.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(size_t(shape_numel(shape)), T(0)) {}
    Tensor(Shape s, T fill) : shape(std::move(s)), data(size_t(shape_numel(shape)), fill) {}
    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (int64_t(data.size()) != shape_numel(shape))
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }

    static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

    int64_t numel() const { return int64_t(data.size()); }
    int rank() const { return int(shape.size()); }
    bool is_scalar() const { return shape.empty(); }
    bool empty() const { return data.empty() && shape.empty(); }

    T item() const {
        if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape));
        return data[0];
    }

    T& at(std::initializer_list<int64_t> idx) {
        return data[size_t(flat_index(idx))];
    }
    T at(std::initializer_list<int64_t> idx) const {
        return data[size_t(flat_index(idx))];
    }

    int64_t flat_index(std::initializer_list<int64_t> idx) const {
        if (int(idx.size()) != rank()) throw ShapeError("index rank mismatch");
        auto st = row_major_strides(shape);
        int64_t f = 0;
        int i = 0;
        for (int64_t v : idx) f += v * st[size_t(i++)];
        return f;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
inline bool all_finite(const Tensor<T>& t) {
    for (T v : t.data)
        if (!std::isfinite(double(v))) return false;
    return true;
}

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* op) {
    if (!all_finite(t)) throw NonFiniteError(op);
}

// ---------------------------------------------------------------------------
// primal kernels
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": operands " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
}

} // namespace detail

template <typename T, typename F>
inline Tensor<T> map_unary(const Tensor<T>& a, F f) {
    Tensor<T> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = f(a.data[i]);
    return out;
}

template <typename T, typename F>
inline Tensor<T> map_binary(const Tensor<T>& a, const Tensor<T>& b, const char* op, F f) {
    detail::require_same_shape(a, b, op);
    Tensor<T> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
    return out;
}

template <typename T> inline Tensor<T> k_add(const Tensor<T>& a, const Tensor<T>& b) {
    return map_binary(a, b, "add", [](T x, T y) { return x + y; });
}
template <typename T> inline Tensor<T> k_sub(const Tensor<T>& a, const Tensor<T>& b) {
    return map_binary(a, b, "sub", [](T x, T y) { return x - y; });
}
template <typename T> inline Tensor<T> k_mul(const Tensor<T>& a, const Tensor<T>& b) {
    return map_binary(a, b, "mul", [](T x, T y) { return x * y; });
}
template <typename T> inline Tensor<T> k_div(const Tensor<T>& a, const Tensor<T>& b) {
    return map_binary(a, b, "div", [](T x, T y) { return x / y; });
}

template <typename T> inline Tensor<T> k_scale(const Tensor<T>& a, T s) {
    return map_unary(a, [s](T x) { return x * s; });
}
template <typename T> inline Tensor<T> k_offset(const Tensor<T>& a, T s) {
    return map_unary(a, [s](T x) { return x + s; });
}

template <typename T>
inline Tensor<T> k_matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: operands must be rank 2, got " + shape_str(a.shape) + " x " +
                         shape_str(b.shape));
    if (a.shape[1] != b.shape[0])
        throw ShapeError("matmul: inner dims " + shape_str(a.shape) + " x " + shape_str(b.shape));
    const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor<T> out(Shape{m, n});
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> ma(a.data.data(), m, k);
    Eigen::Map<const Mat> mb(b.data.data(), k, n);
    Eigen::Map<Mat> mo(out.data.data(), m, n);
    mo.noalias() = ma * mb;
    return out;
}

// b transposed variants used by matmul backward; avoids materializing transposes.
template <typename T>
inline Tensor<T> k_matmul_abt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape[1] != b.shape[1]) throw ShapeError("matmul_abt: inner dims");
    const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    Tensor<T> out(Shape{m, n});
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> ma(a.data.data(), m, k);
    Eigen::Map<const Mat> mb(b.data.data(), n, k);
    Eigen::Map<Mat> mo(out.data.data(), m, n);
    mo.noalias() = ma * mb.transpose();
    return out;
}

template <typename T>
inline Tensor<T> k_matmul_atb(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape[0] != b.shape[0]) throw ShapeError("matmul_atb: inner dims");
    const int64_t m = a.shape[1], k = a.shape[0], n = b.shape[1];
    Tensor<T> out(Shape{m, n});
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> ma(a.data.data(), k, m);
    Eigen::Map<const Mat> mb(b.data.data(), k, n);
    Eigen::Map<Mat> mo(out.data.data(), m, n);
    mo.noalias() = ma.transpose() * mb;
    return out;
}

template <typename T> inline Tensor<T> k_neg(const Tensor<T>& a) {
    return map_unary(a, [](T x) { return -x; });
}
template <typename T> inline Tensor<T> k_sin(const Tensor<T>& a) {
    return map_unary(a, [](T x) { return std::sin(x); });
}
template <typename T> inline Tensor<T> k_cos(const Tensor<T>& a) {
    return map_unary(a, [](T x) { return std::cos(x); });
}
template <typename T> inline Tensor<T> k_exp(const Tensor<T>& a) {
    return map_unary(a, [](T x) { return std::exp(x); });
}
template <typename T> inline Tensor<T> k_log(const Tensor<T>& a) {
    return map_unary(a, [](T x) { return std::log(x); });
}
template <typename T> inline Tensor<T> k_relu(const Tensor<T>& a) {
    return map_unary(a, [](T x) { return x > T(0) ? x : T(0); });
}
template <typename T> inline Tensor<T> k_sigmoid(const Tensor<T>& a) {
    return map_unary(a, [](T x) {
        // split on sign so exp never overflows
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        T e = std::exp(x);
        return e / (T(1) + e);
    });
}
template <typename T> inline Tensor<T> k_abs(const Tensor<T>& a) {
    return map_unary(a, [](T x) { return std::abs(x); });
}
template <typename T> inline Tensor<T> k_square(const Tensor<T>& a) {
    return map_unary(a, [](T x) { return x * x; });
}
template <typename T> inline Tensor<T> k_sqrt(const Tensor<T>& a) {
    return map_unary(a, [](T x) { return std::sqrt(x); });
}

template <typename T>
inline Tensor<T> k_sum_all(const Tensor<T>& a) {
    T acc = 0;
    for (T v : a.data) acc += v;
    return Tensor<T>::scalar(acc);
}

template <typename T>
inline Tensor<T> k_mean_all(const Tensor<T>& a) {
    if (a.numel() == 0) throw ShapeError("mean of empty tensor");
    return Tensor<T>::scalar(k_sum_all(a).item() / T(a.numel()));
}

// Reduces one axis away (numpy sum without keepdims).
template <typename T>
inline Tensor<T> k_sum_axis(const Tensor<T>& a, int axis) {
    if (axis < 0 || axis >= a.rank()) throw ShapeError("sum: bad axis");
    Shape out_shape;
    for (int i = 0; i < a.rank(); ++i)
        if (i != axis) out_shape.push_back(a.shape[size_t(i)]);
    Tensor<T> out(out_shape);
    int64_t outer = 1, inner = 1;
    const int64_t n = a.shape[size_t(axis)];
    for (int i = 0; i < axis; ++i) outer *= a.shape[size_t(i)];
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.shape[size_t(i)];
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t j = 0; j < n; ++j) {
            const T* src = a.data.data() + (o * n + j) * inner;
            T* dst = out.data.data() + o * inner;
            for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    return out;
}

template <typename T>
inline Tensor<T> k_max_all(const Tensor<T>& a, int64_t* arg = nullptr) {
    if (a.numel() == 0) throw ShapeError("max of empty tensor");
    int64_t best = 0;
    for (int64_t i = 1; i < a.numel(); ++i)
        if (a.data[size_t(i)] > a.data[size_t(best)]) best = i;
    if (arg) *arg = best;
    return Tensor<T>::scalar(a.data[size_t(best)]);
}

template <typename T>
inline Tensor<T> k_min_all(const Tensor<T>& a, int64_t* arg = nullptr) {
    if (a.numel() == 0) throw ShapeError("min of empty tensor");
    int64_t best = 0;
    for (int64_t i = 1; i < a.numel(); ++i)
        if (a.data[size_t(i)] < a.data[size_t(best)]) best = i;
    if (arg) *arg = best;
    return Tensor<T>::scalar(a.data[size_t(best)]);
}

// numpy-style broadcast: shapes aligned on trailing axes, source dims must be
// equal to the target or 1 (missing leading dims count as 1).
template <typename T>
inline Tensor<T> k_broadcast_to(const Tensor<T>& a, const Shape& target) {
    const int ra = a.rank(), rt = int(target.size());
    if (ra > rt)
        throw ShapeError("broadcast: source rank exceeds target " + shape_str(a.shape) + " -> " +
                         shape_str(target));
    Shape padded(size_t(rt), 1);
    for (int i = 0; i < ra; ++i) padded[size_t(rt - ra + i)] = a.shape[size_t(i)];
    for (int i = 0; i < rt; ++i)
        if (padded[size_t(i)] != target[size_t(i)] && padded[size_t(i)] != 1)
            throw ShapeError("broadcast: " + shape_str(a.shape) + " -> " + shape_str(target));

    Tensor<T> out(target);
    auto tstr = row_major_strides(target);
    auto pstr = row_major_strides(padded);
    std::vector<int64_t> src_stride(size_t(rt), 0);
    for (int i = 0; i < rt; ++i)
        src_stride[size_t(i)] = (padded[size_t(i)] == 1) ? 0 : pstr[size_t(i)];

    const int64_t n = out.numel();
    std::vector<int64_t> idx(size_t(rt), 0);
    int64_t src = 0;
    for (int64_t f = 0; f < n; ++f) {
        out.data[size_t(f)] = a.data[size_t(src)];
        for (int d = rt - 1; d >= 0; --d) {
            idx[size_t(d)]++;
            src += src_stride[size_t(d)];
            if (idx[size_t(d)] < target[size_t(d)]) break;
            idx[size_t(d)] = 0;
            src -= src_stride[size_t(d)] * target[size_t(d)];
        }
    }
    return out;
}

// Sum `a` down to `target` shape; adjoint of k_broadcast_to.
template <typename T>
inline Tensor<T> k_reduce_to(const Tensor<T>& a, const Shape& target) {
    if (a.shape == target) return a;
    const int ra = a.rank(), rt = int(target.size());
    Shape padded(size_t(ra), 1);
    for (int i = 0; i < rt; ++i) padded[size_t(ra - rt + i)] = target[size_t(i)];

    Tensor<T> out(padded);
    auto pstr = row_major_strides(padded);
    std::vector<int64_t> dst_stride(size_t(ra), 0);
    for (int i = 0; i < ra; ++i)
        dst_stride[size_t(i)] = (padded[size_t(i)] == 1) ? 0 : pstr[size_t(i)];

    std::vector<int64_t> idx(size_t(ra), 0);
    int64_t dst = 0;
    for (int64_t f = 0; f < a.numel(); ++f) {
        out.data[size_t(dst)] += a.data[size_t(f)];
        for (int d = ra - 1; d >= 0; --d) {
            idx[size_t(d)]++;
            dst += dst_stride[size_t(d)];
            if (idx[size_t(d)] < a.shape[size_t(d)]) break;
            idx[size_t(d)] = 0;
            dst -= dst_stride[size_t(d)] * a.shape[size_t(d)];
        }
    }
    out.shape = target;
    return out;
}

template <typename T>
inline Tensor<T> k_reshape(const Tensor<T>& a, const Shape& s) {
    if (shape_numel(s) != a.numel())
        throw ShapeError("reshape: " + shape_str(a.shape) + " -> " + shape_str(s));
    Tensor<T> out = a;
    out.shape = s;
    return out;
}

template <typename T>
inline Tensor<T> k_slice(const Tensor<T>& a, int axis, int64_t start, int64_t len) {
    if (axis < 0 || axis >= a.rank()) throw ShapeError("slice: bad axis");
    if (start < 0 || len < 0 || start + len > a.shape[size_t(axis)])
        throw ShapeError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of bounds for " +
                         shape_str(a.shape));
    Shape out_shape = a.shape;
    out_shape[size_t(axis)] = len;
    Tensor<T> out(out_shape);
    int64_t outer = 1, inner = 1;
    const int64_t n = a.shape[size_t(axis)];
    for (int i = 0; i < axis; ++i) outer *= a.shape[size_t(i)];
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.shape[size_t(i)];
    for (int64_t o = 0; o < outer; ++o)
        std::copy_n(a.data.data() + (o * n + start) * inner, len * inner,
                    out.data.data() + o * len * inner);
    return out;
}

// Adds `g` (a slice-shaped tensor) back into `acc` at the slice position.
template <typename T>
inline void k_slice_scatter_add(Tensor<T>& acc, const Tensor<T>& g, int axis, int64_t start) {
    const int64_t len = g.shape[size_t(axis)];
    int64_t outer = 1, inner = 1;
    const int64_t n = acc.shape[size_t(axis)];
    for (int i = 0; i < axis; ++i) outer *= acc.shape[size_t(i)];
    for (int i = axis + 1; i < acc.rank(); ++i) inner *= acc.shape[size_t(i)];
    for (int64_t o = 0; o < outer; ++o) {
        const T* src = g.data.data() + o * len * inner;
        T* dst = acc.data.data() + (o * n + start) * inner;
        for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
}

template <typename T>
inline Tensor<T> k_concat(const std::vector<const Tensor<T>*>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    const int r = parts[0]->rank();
    if (axis < 0 || axis >= r) throw ShapeError("concat: bad axis");
    Shape out_shape = parts[0]->shape;
    int64_t total = 0;
    for (const auto* p : parts) {
        if (p->rank() != r) throw ShapeError("concat: rank mismatch");
        for (int i = 0; i < r; ++i)
            if (i != axis && p->shape[size_t(i)] != out_shape[size_t(i)])
                throw ShapeError("concat: shape mismatch " + shape_str(p->shape) + " vs " +
                                 shape_str(out_shape));
        total += p->shape[size_t(axis)];
    }
    out_shape[size_t(axis)] = total;
    Tensor<T> out(out_shape);
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= out_shape[size_t(i)];
    for (int i = axis + 1; i < r; ++i) inner *= out_shape[size_t(i)];
    for (int64_t o = 0; o < outer; ++o) {
        int64_t off = 0;
        for (const auto* p : parts) {
            const int64_t len = p->shape[size_t(axis)];
            std::copy_n(p->data.data() + o * len * inner, len * inner,
                        out.data.data() + (o * total + off) * inner);
            off += len;
        }
    }
    return out;
}

template <typename To, typename From>
inline Tensor<To> cast_tensor(const Tensor<From>& a) {
    Tensor<To> out(a.shape);
    for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = To(a.data[i]);
    return out;
}

} // namespace svr::ad
