#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "srlgnn/tensor/tape.hpp"

namespace srlgnn::ops {

namespace detail {

inline void require_rank2(const Shape& s, const char* op) {
  if (s.size() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(s));
}

inline void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[m x n] += A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T, typename F, typename DF>
Var<T> unary(Var<T> a, const char* op, F f, DF df) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape->record(
      std::move(y), {a},
      [a, df](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& x = tape.value(a.id);
        const Tensor<T>& y = tape.value(self);
        const Tensor<T> g = tape.grad_slot(self);
        Tensor<T>& gx = tape.grad_slot(a.id);
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * df(x[i], y[i]);
      },
      op);
}

}  // namespace detail

/// a[m x k] * b[k x n]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  detail::require_rank2(A.shape(), "matmul");
  detail::require_rank2(B.shape(), "matmul");
  if (A.cols() != B.rows()) detail::mismatch("matmul", A.shape(), B.shape());
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor<T> c = Tensor<T>::matrix(m, n);
  detail::gemm_nn(A.data(), B.data(), c.data(), m, k, n);
  return a.tape->record(
      std::move(c), {a, b},
      [a, b, m, k, n](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        if (tape.requires_grad(a)) {
          detail::gemm_nt(g.data(), tape.value(b).data(), tape.grad_slot(a.id).data(), m, n, k);
        }
        if (tape.requires_grad(b)) {
          detail::gemm_tn(tape.value(a).data(), g.data(), tape.grad_slot(b.id).data(), m, k, n);
        }
      },
      "matmul");
}

/// a[m x k] * b[n x k]^T
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  detail::require_rank2(A.shape(), "matmul_nt");
  detail::require_rank2(B.shape(), "matmul_nt");
  if (A.cols() != B.cols()) detail::mismatch("matmul_nt", A.shape(), B.shape());
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor<T> c = Tensor<T>::matrix(m, n);
  detail::gemm_nt(A.data(), B.data(), c.data(), m, k, n);
  return a.tape->record(
      std::move(c), {a, b},
      [a, b, m, k, n](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        if (tape.requires_grad(a)) {
          detail::gemm_nn(g.data(), tape.value(b).data(), tape.grad_slot(a.id).data(), m, n, k);
        }
        if (tape.requires_grad(b)) {
          detail::gemm_tn(g.data(), tape.value(a).data(), tape.grad_slot(b.id).data(), m, n, k);
        }
      },
      "matmul_nt");
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const auto& A = a.value();
  detail::require_rank2(A.shape(), "transpose");
  const std::size_t m = A.rows(), n = A.cols();
  Tensor<T> t = Tensor<T>::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t(j, i) = A(i, j);
  return a.tape->record(
      std::move(t), {a},
      [a, m, n](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        Tensor<T>& ga = tape.grad_slot(a.id);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) ga(i, j) += g(j, i);
      },
      "transpose");
}

/// Elementwise sum. `b` may also be a [1 x cols] row added to every row
/// of `a` (bias); no other broadcasting is supported.
template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  const bool same = A.shape() == B.shape();
  const bool row_bias = !same && A.rank() == 2 && B.rank() == 2 && B.rows() == 1 &&
                        B.cols() == A.cols();
  if (!same && !row_bias) detail::mismatch("add", A.shape(), B.shape());
  Tensor<T> c = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += same ? B[i] : B[i % cols];
  return a.tape->record(
      std::move(c), {a, b},
      [a, b, same, cols](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        if (tape.requires_grad(a)) {
          Tensor<T>& ga = tape.grad_slot(a.id);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (tape.requires_grad(b)) {
          Tensor<T>& gb = tape.grad_slot(b.id);
          for (std::size_t i = 0; i < g.size(); ++i) gb[same ? i : i % cols] += g[i];
        }
      },
      "add");
}

/// Elementwise product of equal shapes.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.shape() != B.shape()) detail::mismatch("mul", A.shape(), B.shape());
  Tensor<T> c = A;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= B[i];
  return a.tape->record(
      std::move(c), {a, b},
      [a, b](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        const Tensor<T>& A = tape.value(a);
        const Tensor<T>& B = tape.value(b);
        if (tape.requires_grad(a)) {
          Tensor<T>& ga = tape.grad_slot(a.id);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
        }
        if (tape.requires_grad(b)) {
          Tensor<T>& gb = tape.grad_slot(b.id);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
        }
      },
      "mul");
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  Tensor<T> c = a.value();
  for (auto& v : c.values()) v *= s;
  return a.tape->record(
      std::move(c), {a},
      [a, s](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        Tensor<T>& ga = tape.grad_slot(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
      },
      "scale");
}

/// Concatenation along the last (column) axis.
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    detail::require_rank2(p.shape(), "concat");
    if (p.rows() != rows) detail::mismatch("concat", parts.front().shape(), p.shape());
    cols += p.cols();
    tracked = tracked || p.tape->requires_grad(p);
  }
  Tensor<T> c = Tensor<T>::matrix(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& P = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(P.data() + i * P.cols(), P.cols(), c.data() + i * cols + offset);
    offset += P.cols();
  }
  Tape<T>* tape = parts.front().tape;
  return tape->record_tracked(
      std::move(c), tracked,
      [parts, rows, cols](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        std::size_t offset = 0;
        for (const auto& p : parts) {
          const std::size_t pc = tape.value(p).cols();
          if (tape.requires_grad(p)) {
            Tensor<T>& gp = tape.grad_slot(p.id);
            for (std::size_t i = 0; i < rows; ++i)
              for (std::size_t j = 0; j < pc; ++j) gp(i, j) += g[i * cols + offset + j];
          }
          offset += pc;
        }
      },
      "concat");
}

/// Columns [begin, end) of a matrix.
template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end) {
  const auto& A = a.value();
  detail::require_rank2(A.shape(), "slice_cols");
  if (begin >= end || end > A.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + shape_string(A.shape()));
  }
  const std::size_t rows = A.rows(), width = end - begin, cols = A.cols();
  Tensor<T> c = Tensor<T>::matrix(rows, width);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < width; ++j) c(i, j) = A(i, begin + j);
  return a.tape->record(
      std::move(c), {a},
      [a, begin, rows, width, cols](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        Tensor<T>& ga = tape.grad_slot(a.id);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < width; ++j) ga[i * cols + begin + j] += g(i, j);
      },
      "slice_cols");
}

/// Row lookup: result row r is table row indices[r].
template <typename T>
Var<T> gather_rows(Var<T> table, std::vector<std::size_t> indices) {
  const auto& W = table.value();
  detail::require_rank2(W.shape(), "gather_rows");
  const std::size_t cols = W.cols();
  Tensor<T> c = Tensor<T>::matrix(indices.size(), cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= W.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[r]) + " outside " +
                       shape_string(W.shape()));
    }
    std::copy_n(W.data() + indices[r] * cols, cols, c.data() + r * cols);
  }
  return table.tape->record(
      std::move(c), {table},
      [table, indices = std::move(indices), cols](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        Tensor<T>& gw = tape.grad_slot(table.id);
        for (std::size_t r = 0; r < indices.size(); ++r)
          for (std::size_t j = 0; j < cols; ++j) gw(indices[r], j) += g(r, j);
      },
      "gather_rows");
}

/// Mean over rows: [m x n] -> [1 x n].
template <typename T>
Var<T> row_mean(Var<T> a) {
  const auto& A = a.value();
  detail::require_rank2(A.shape(), "row_mean");
  const std::size_t m = A.rows(), n = A.cols();
  if (m == 0) throw ShapeError("row_mean: no rows");
  Tensor<T> c = Tensor<T>::matrix(1, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[j] += A(i, j);
  for (auto& v : c.values()) v /= static_cast<T>(m);
  return a.tape->record(
      std::move(c), {a},
      [a, m, n](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_slot(self);
        Tensor<T>& ga = tape.grad_slot(a.id);
        const T w = T(1) / static_cast<T>(m);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) ga(i, j) += g[j] * w;
      },
      "row_mean");
}

/// Sum of every element, as a [1 x 1] tensor.
template <typename T>
Var<T> sum(Var<T> a) {
  T total = T(0);
  for (T v : a.value().values()) total += v;
  return a.tape->record(
      Tensor<T>({1, 1}, {total}), {a},
      [a](Tape<T>& tape, std::size_t self) {
        const T g = tape.grad_slot(self)[0];
        for (auto& v : tape.grad_slot(a.id).values()) v += g;
      },
      "sum");
}

template <typename T>
Var<T> relu(Var<T> a) {
  return detail::unary(
      a, "relu", [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return detail::unary(
      a, "tanh", [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return detail::unary(
      a, "sigmoid",
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

/// Softmax along the last axis (per row).
template <typename T>
Var<T> softmax(Var<T> a) {
  const auto& A = a.value();
  detail::require_rank2(A.shape(), "softmax");
  const std::size_t m = A.rows(), n = A.cols();
  Tensor<T> y = Tensor<T>::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    T hi = A(i, 0);
    for (std::size_t j = 1; j < n; ++j) hi = std::max(hi, A(i, j));
    T z = T(0);
    for (std::size_t j = 0; j < n; ++j) z += (y(i, j) = std::exp(A(i, j) - hi));
    for (std::size_t j = 0; j < n; ++j) y(i, j) /= z;
  }
  return a.tape->record(
      std::move(y), {a},
      [a, m, n](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& y = tape.value(self);
        const Tensor<T>& g = tape.grad_slot(self);
        Tensor<T>& ga = tape.grad_slot(a.id);
        for (std::size_t i = 0; i < m; ++i) {
          T dot = T(0);
          for (std::size_t j = 0; j < n; ++j) dot += g(i, j) * y(i, j);
          for (std::size_t j = 0; j < n; ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
        }
      },
      "softmax");
}

/// x / sum(x). Fails when the sum is within 1e-8 of zero.
template <typename T>
Var<T> normalize_sum(Var<T> a) {
  const auto& A = a.value();
  T total = T(0);
  for (T v : A.values()) total += v;
  if (std::abs(total) < T(1e-8)) {
    throw NumericError("normalize_sum: denominator " + std::to_string(total) + " vanishes");
  }
  Tensor<T> y = A;
  for (auto& v : y.values()) v /= total;
  return a.tape->record(
      std::move(y), {a},
      [a, total](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& y = tape.value(self);
        const Tensor<T>& g = tape.grad_slot(self);
        Tensor<T>& ga = tape.grad_slot(a.id);
        T dot = T(0);
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += (g[i] - dot) / total;
      },
      "normalize_sum");
}

/// Per-row layer normalization with learned [1 x n] gain and bias.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5)) {
  const auto& X = x.value();
  detail::require_rank2(X.shape(), "layer_norm");
  const std::size_t m = X.rows(), n = X.cols();
  if (gain.value().shape() != Shape{1, n}) detail::mismatch("layer_norm", X.shape(), gain.shape());
  if (bias.value().shape() != Shape{1, n}) detail::mismatch("layer_norm", X.shape(), bias.shape());
  Tensor<T> xhat = Tensor<T>::matrix(m, n);
  std::vector<T> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    T mean = T(0);
    for (std::size_t j = 0; j < n; ++j) mean += X(i, j);
    mean /= static_cast<T>(n);
    T var = T(0);
    for (std::size_t j = 0; j < n; ++j) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= static_cast<T>(n);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) xhat(i, j) = (X(i, j) - mean) * inv_std[i];
  }
  Tensor<T> y = xhat;
  const auto& G = gain.value();
  const auto& B = bias.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y(i, j) = xhat(i, j) * G[j] + B[j];
  return x.tape->record(
      std::move(y), {x, gain, bias},
      [x, gain, bias, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape<T>& tape, std::size_t self) {
        const Tensor<T> g = tape.grad_slot(self);
        const Tensor<T>& G = tape.value(gain);
        if (tape.requires_grad(gain)) {
          Tensor<T>& gg = tape.grad_slot(gain.id);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += g(i, j) * xhat(i, j);
        }
        if (tape.requires_grad(bias)) {
          Tensor<T>& gb = tape.grad_slot(bias.id);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g(i, j);
        }
        if (tape.requires_grad(x)) {
          Tensor<T>& gx = tape.grad_slot(x.id);
          for (std::size_t i = 0; i < m; ++i) {
            T mean_d = T(0), mean_dx = T(0);
            for (std::size_t j = 0; j < n; ++j) {
              const T d = g(i, j) * G[j];
              mean_d += d;
              mean_dx += d * xhat(i, j);
            }
            mean_d /= static_cast<T>(n);
            mean_dx /= static_cast<T>(n);
            for (std::size_t j = 0; j < n; ++j) {
              const T d = g(i, j) * G[j];
              gx(i, j) += inv_std[i] * (d - mean_d - xhat(i, j) * mean_dx);
            }
          }
        }
      },
      "layer_norm");
}

/// Numerically stable binary cross-entropy on a [1 x 1] logit.
template <typename T>
Var<T> bce_with_logits(Var<T> logit, T target) {
  if (logit.value().size() != 1) {
    throw ShapeError("bce_with_logits: expected a single logit, got " +
                     shape_string(logit.shape()));
  }
  const T z = logit.value()[0];
  const T loss = std::max(z, T(0)) - z * target + std::log1p(std::exp(-std::abs(z)));
  return logit.tape->record(
      Tensor<T>({1, 1}, {loss}), {logit},
      [logit, target, z](Tape<T>& tape, std::size_t self) {
        const T g = tape.grad_slot(self)[0];
        const T p = z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
        tape.grad_slot(logit.id)[0] += g * (p - target);
      },
      "bce_with_logits");
}

}  // namespace srlgnn::ops
