#pragma once

// Differentiable dense kernels. Every kernel parallelizes over output rows;
// each output element is accumulated by exactly one thread in ascending
// reduction order, so results are bit-identical for any thread count.
// Reference loops without OpenMP live in fuselab::kernels::serial.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fuselab/errors.hpp"
#include "fuselab/matrix.hpp"
#include "fuselab/parallel.hpp"

namespace fuselab::kernels {

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw DimensionError(what);
}

template <class T>
std::string shapes(const char* op, const Matrix<T>& a, const Matrix<T>& b) {
    return std::string(op) + ": incompatible shapes " + a.shape() + " and " + b.shape();
}

/// Softmax of one row in place, stabilized by the row maximum.
template <class T>
void softmax_inplace(T* row, std::size_t n) {
    if (n == 0) return;
    T peak = *std::max_element(row, row + n);
    T total{0};
    for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - peak);
        total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
}

/// Attention for one block of queries over one block of keys.
/// weights: nq×nk, out: nq×dv.
template <class T>
void attend_block(const T* q, std::size_t nq, const T* k, const T* v, std::size_t nk,
                  std::size_t d, std::size_t dv, T scale, T* weights, T* out) {
    for (std::size_t i = 0; i < nq; ++i) {
        T* w = weights + i * nk;
        for (std::size_t j = 0; j < nk; ++j) {
            T dot{0};
            for (std::size_t c = 0; c < d; ++c) dot += q[i * d + c] * k[j * d + c];
            w[j] = dot * scale;
        }
        softmax_inplace(w, nk);
        T* o = out + i * dv;
        std::fill(o, o + dv, T{0});
        for (std::size_t j = 0; j < nk; ++j) {
            const T wij = w[j];
            for (std::size_t c = 0; c < dv; ++c) o[c] += wij * v[j * dv + c];
        }
    }
}

/// Gradients for one attention block; dq/dk/dv are overwritten.
template <class T>
void attend_block_backward(const T* q, std::size_t nq, const T* k, const T* v, std::size_t nk,
                           std::size_t d, std::size_t dv, T scale, const T* weights,
                           const T* d_out, T* dq, T* dk, T* dvv) {
    std::fill(dq, dq + nq * d, T{0});
    std::fill(dk, dk + nk * d, T{0});
    std::fill(dvv, dvv + nk * dv, T{0});
    std::vector<T> d_scores(nk);
    for (std::size_t i = 0; i < nq; ++i) {
        const T* w = weights + i * nk;
        const T* go = d_out + i * dv;
        T weighted{0};
        for (std::size_t j = 0; j < nk; ++j) {
            T dp{0};
            for (std::size_t c = 0; c < dv; ++c) {
                dp += go[c] * v[j * dv + c];
                dvv[j * dv + c] += w[j] * go[c];
            }
            d_scores[j] = dp;
            weighted += w[j] * dp;
        }
        for (std::size_t j = 0; j < nk; ++j) {
            const T ds = w[j] * (d_scores[j] - weighted) * scale;
            for (std::size_t c = 0; c < d; ++c) {
                dq[i * d + c] += ds * k[j * d + c];
                dk[j * d + c] += ds * q[i * d + c];
            }
        }
    }
}

}  // namespace detail

/// Attention weights and attended values.
template <class T>
struct AttentionOutput {
    Matrix<T> output;   // n_queries × d_v
    Matrix<T> weights;  // n_queries × n_keys (grouped: n_queries × group)
};

template <class T>
struct AttentionGrads {
    Matrix<T> query;
    Matrix<T> key;
    Matrix<T> value;
};

template <class T>
struct LinearGrads {
    Matrix<T> input;   // empty when not requested
    Matrix<T> weight;
    Matrix<T> bias;    // 1 × d_out
};

/// a · b
template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    detail::require(a.cols() == b.rows(), detail::shapes("matmul", a, b));
    const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
    Matrix<T> out(n, m);
    const int nt = parallel::threads_for(n * inner * m);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        T* o = out.data() + i * m;
        for (std::size_t k = 0; k < inner; ++k) {
            const T aik = a(i, k);
            const T* br = b.data() + k * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += aik * br[j];
        }
    }
    return out;
}

/// aᵀ · b
template <class T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
    detail::require(a.rows() == b.rows(), detail::shapes("matmul_tn", a, b));
    const std::size_t n = a.cols(), inner = a.rows(), m = b.cols();
    Matrix<T> out(n, m);
    const int nt = parallel::threads_for(n * inner * m);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        T* o = out.data() + i * m;
        for (std::size_t k = 0; k < inner; ++k) {
            const T aki = a(k, i);
            const T* br = b.data() + k * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += aki * br[j];
        }
    }
    return out;
}

/// a · bᵀ
template <class T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
    detail::require(a.cols() == b.cols(), detail::shapes("matmul_nt", a, b));
    const std::size_t n = a.rows(), inner = a.cols(), m = b.rows();
    Matrix<T> out(n, m);
    const int nt = parallel::threads_for(n * inner * m);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const T* ar = a.data() + i * inner;
        for (std::size_t j = 0; j < m; ++j) {
            const T* br = b.data() + j * inner;
            T acc{0};
            for (std::size_t k = 0; k < inner; ++k) acc += ar[k] * br[k];
            out(i, j) = acc;
        }
    }
    return out;
}

/// x · w + b, with w stored input-dim × output-dim.
template <class T>
Matrix<T> linear(const Matrix<T>& x, const Matrix<T>& w, std::span<const T> b) {
    detail::require(x.cols() == w.rows(), detail::shapes("linear", x, w));
    detail::require(b.size() == w.cols(), "linear: bias length " + std::to_string(b.size()) +
                                              " does not match weight " + w.shape());
    Matrix<T> out = matmul(x, w);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
    }
    return out;
}

template <class T>
Matrix<T> linear(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b) {
    return linear(x, w, b.values());
}

template <class T>
LinearGrads<T> linear_backward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& d_out,
                               bool need_input_grad = true) {
    detail::require(x.rows() == d_out.rows() && w.cols() == d_out.cols(),
                    detail::shapes("linear_backward", x, d_out));
    LinearGrads<T> g;
    g.weight = matmul_tn(x, d_out);
    g.bias = Matrix<T>(1, d_out.cols());
    for (std::size_t i = 0; i < d_out.rows(); ++i) {
        auto r = d_out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) g.bias(0, j) += r[j];
    }
    if (need_input_grad) g.input = matmul_nt(d_out, w);
    return g;
}

/// Row-wise softmax with row-max subtraction.
template <class T>
Matrix<T> softmax_rows(Matrix<T> x) {
    for (std::size_t i = 0; i < x.rows(); ++i) detail::softmax_inplace(x.row(i).data(), x.cols());
    return x;
}

/// Gradient through softmax given its output y and upstream dy.
template <class T>
Matrix<T> softmax_rows_backward(const Matrix<T>& y, const Matrix<T>& dy) {
    detail::require(y.same_shape(dy), detail::shapes("softmax_rows_backward", y, dy));
    Matrix<T> dx(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i) {
        T dot{0};
        for (std::size_t j = 0; j < y.cols(); ++j) dot += y(i, j) * dy(i, j);
        for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (dy(i, j) - dot);
    }
    return dx;
}

template <class T>
Matrix<T> relu(Matrix<T> x) {
    for (auto& e : x.values()) e = e > T{0} ? e : T{0};
    return x;
}

/// Subgradient 0 at the kink.
template <class T>
Matrix<T> relu_backward(const Matrix<T>& pre, Matrix<T> dy) {
    detail::require(pre.same_shape(dy), detail::shapes("relu_backward", pre, dy));
    auto p = pre.values();
    auto g = dy.values();
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(p[i] > T{0})) g[i] = T{0};
    return dy;
}

/// Element-wise product.
template <class T>
Matrix<T> hadamard(Matrix<T> a, const Matrix<T>& b) {
    detail::require(a.same_shape(b), detail::shapes("hadamard", a, b));
    auto x = a.values();
    auto y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= y[i];
    return a;
}

template <class T>
void add_inplace(Matrix<T>& acc, const Matrix<T>& x) {
    detail::require(acc.same_shape(x), detail::shapes("add_inplace", acc, x));
    auto a = acc.values();
    auto b = x.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <class T>
void check_attention_args(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                          std::size_t d_k) {
    if (d_k == 0) throw DomainError("scaled_dot_attention: d_k must be positive");
    detail::require(q.cols() == d_k && k.cols() == d_k,
                    "scaled_dot_attention: query " + q.shape() + " and key " + k.shape() +
                        " must both have d_k=" + std::to_string(d_k) + " columns");
    detail::require(k.rows() == v.rows(), detail::shapes("scaled_dot_attention (key/value)", k, v));
}

/// softmax(q·kᵀ/√d_k)·v over all queries and keys.
template <class T>
AttentionOutput<T> scaled_dot_attention(const Matrix<T>& q, const Matrix<T>& k,
                                        const Matrix<T>& v, std::size_t d_k) {
    check_attention_args(q, k, v, d_k);
    const T scale = T{1} / std::sqrt(static_cast<T>(d_k));
    AttentionOutput<T> r{Matrix<T>(q.rows(), v.cols()), Matrix<T>(q.rows(), k.rows())};
    detail::attend_block(q.data(), q.rows(), k.data(), v.data(), k.rows(), d_k, v.cols(), scale,
                         r.weights.data(), r.output.data());
    return r;
}

template <class T>
AttentionGrads<T> scaled_dot_attention_backward(const Matrix<T>& q, const Matrix<T>& k,
                                                const Matrix<T>& v, const Matrix<T>& weights,
                                                const Matrix<T>& d_out, std::size_t d_k) {
    check_attention_args(q, k, v, d_k);
    detail::require(d_out.rows() == q.rows() && d_out.cols() == v.cols(),
                    detail::shapes("scaled_dot_attention_backward", d_out, v));
    const T scale = T{1} / std::sqrt(static_cast<T>(d_k));
    AttentionGrads<T> g{Matrix<T>(q.rows(), q.cols()), Matrix<T>(k.rows(), k.cols()),
                        Matrix<T>(v.rows(), v.cols())};
    detail::attend_block_backward(q.data(), q.rows(), k.data(), v.data(), k.rows(), d_k,
                                  v.cols(), scale, weights.data(), d_out.data(), g.query.data(),
                                  g.key.data(), g.value.data());
    return g;
}

/// Independent attention per consecutive block of `group` rows: rows
/// [s·group, (s+1)·group) of q attend over the same rows of k and v.
/// Weights come back as n × group.
template <class T>
AttentionOutput<T> grouped_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                     std::size_t group, std::size_t d_k) {
    check_attention_args(q, k, v, d_k);
    detail::require(group > 0 && q.rows() == k.rows() && q.rows() % group == 0,
                    "grouped_attention: " + std::to_string(q.rows()) +
                        " rows do not split into groups of " + std::to_string(group));
    const std::size_t n = q.rows(), dv = v.cols(), blocks = n / group;
    const T scale = T{1} / std::sqrt(static_cast<T>(d_k));
    AttentionOutput<T> r{Matrix<T>(n, dv), Matrix<T>(n, group)};
    const int nt = parallel::threads_for(n * group * (d_k + dv));
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(blocks); ++bb) {
        const std::size_t r0 = static_cast<std::size_t>(bb) * group;
        detail::attend_block(q.data() + r0 * d_k, group, k.data() + r0 * d_k, v.data() + r0 * dv,
                             group, d_k, dv, scale, r.weights.data() + r0 * group,
                             r.output.data() + r0 * dv);
    }
    return r;
}

template <class T>
AttentionGrads<T> grouped_attention_backward(const Matrix<T>& q, const Matrix<T>& k,
                                             const Matrix<T>& v, const Matrix<T>& weights,
                                             const Matrix<T>& d_out, std::size_t group,
                                             std::size_t d_k) {
    check_attention_args(q, k, v, d_k);
    detail::require(group > 0 && q.rows() == k.rows() && q.rows() % group == 0 &&
                        weights.rows() == q.rows() && weights.cols() == group &&
                        d_out.rows() == q.rows() && d_out.cols() == v.cols(),
                    "grouped_attention_backward: inconsistent shapes");
    const std::size_t n = q.rows(), dv = v.cols(), blocks = n / group;
    const T scale = T{1} / std::sqrt(static_cast<T>(d_k));
    AttentionGrads<T> g{Matrix<T>(n, d_k), Matrix<T>(n, d_k), Matrix<T>(n, dv)};
    const int nt = parallel::threads_for(n * group * (d_k + dv));
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
    for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(blocks); ++bb) {
        const std::size_t r0 = static_cast<std::size_t>(bb) * group;
        detail::attend_block_backward(q.data() + r0 * d_k, group, k.data() + r0 * d_k,
                                      v.data() + r0 * dv, group, d_k, dv, scale,
                                      weights.data() + r0 * group, d_out.data() + r0 * dv,
                                      g.query.data() + r0 * d_k, g.key.data() + r0 * d_k,
                                      g.value.data() + r0 * dv);
    }
    return g;
}

namespace serial {

// Textbook loops used as test oracles and benchmark baselines.

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    detail::require(a.cols() == b.rows(), detail::shapes("matmul", a, b));
    Matrix<T> out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            T acc{0};
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

template <class T>
Matrix<T> transpose(const Matrix<T>& a) {
    Matrix<T> t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

template <class T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
    return matmul(transpose(a), b);
}

template <class T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
    return matmul(a, transpose(b));
}

template <class T>
AttentionOutput<T> grouped_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                     std::size_t group, std::size_t d_k) {
    check_attention_args(q, k, v, d_k);
    detail::require(group > 0 && q.rows() == k.rows() && q.rows() % group == 0,
                    "grouped_attention: rows do not split into groups");
    const std::size_t n = q.rows(), dv = v.cols();
    AttentionOutput<T> r{Matrix<T>(n, dv), Matrix<T>(n, group)};
    const T scale = T{1} / std::sqrt(static_cast<T>(d_k));
    for (std::size_t r0 = 0; r0 < n; r0 += group)
        detail::attend_block(q.data() + r0 * d_k, group, k.data() + r0 * d_k, v.data() + r0 * dv,
                             group, d_k, dv, scale, r.weights.data() + r0 * group,
                             r.output.data() + r0 * dv);
    return r;
}

template <class T>
AttentionGrads<T> grouped_attention_backward(const Matrix<T>& q, const Matrix<T>& k,
                                             const Matrix<T>& v, const Matrix<T>& weights,
                                             const Matrix<T>& d_out, std::size_t group,
                                             std::size_t d_k) {
    const std::size_t n = q.rows(), dv = v.cols();
    const T scale = T{1} / std::sqrt(static_cast<T>(d_k));
    AttentionGrads<T> g{Matrix<T>(n, d_k), Matrix<T>(n, d_k), Matrix<T>(n, dv)};
    for (std::size_t r0 = 0; r0 < n; r0 += group)
        detail::attend_block_backward(q.data() + r0 * d_k, group, k.data() + r0 * d_k,
                                      v.data() + r0 * dv, group, d_k, dv, scale,
                                      weights.data() + r0 * group, d_out.data() + r0 * dv,
                                      g.query.data() + r0 * d_k, g.key.data() + r0 * d_k,
                                      g.value.data() + r0 * dv);
    return g;
}

}  // namespace serial

}  // namespace fuselab::kernels
