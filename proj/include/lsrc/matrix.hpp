#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lsrc/types.hpp"

// Dense row-major double-precision matrices and the handful of kernels the
// rest of the library is built on. All training and evaluation numerics are
// 64-bit; the checkpoint format depends on this exact storage layout.

namespace lsrc {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, length rows*cols

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c); }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }

  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double* row(std::size_t r) { return data.data() + r * cols; }

  std::size_t size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  void set_zero() { std::fill(data.begin(), data.end(), 0.0); }
};

inline std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) +
                         " vs " + shape_str(b));
}

// c += a * b
inline void matmul_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a) +
                         " vs " + shape_str(b));
  if (c.rows != a.rows || c.cols != b.cols)
    throw DimensionError("matmul: output shape " + shape_str(c) +
                         " does not fit " + shape_str(a) + "*" + shape_str(b));
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* cr = c.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = ar[k];
      const double* br = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) cr[j] += aik * br[j];
    }
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a) +
                         " vs " + shape_str(b));
  Matrix c(a.rows, b.cols);
  matmul_acc(c, a, b);
  return c;
}

// c += a^T * b (both operands stored untransposed)
inline void matmul_tn_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw DimensionError("matmul_tn: row counts differ " + shape_str(a) +
                         " vs " + shape_str(b));
  if (c.rows != a.cols || c.cols != b.cols)
    throw DimensionError("matmul_tn: output shape " + shape_str(c) +
                         " does not fit " + shape_str(a) + "^T*" + shape_str(b));
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    const double* br = b.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = ar[k];
      double* cr = c.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) cr[j] += aik * br[j];
    }
  }
}

inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw DimensionError("matmul_tn: row counts differ " + shape_str(a) +
                         " vs " + shape_str(b));
  Matrix c(a.cols, b.cols);
  matmul_tn_acc(c, a, b);
  return c;
}

// c += a * b^T
inline void matmul_nt_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw DimensionError("matmul_nt: column counts differ " + shape_str(a) +
                         " vs " + shape_str(b));
  if (c.rows != a.rows || c.cols != b.rows)
    throw DimensionError("matmul_nt: output shape " + shape_str(c) +
                         " does not fit " + shape_str(a) + "*" + shape_str(b) + "^T");
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* cr = c.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* br = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += ar[k] * br[k];
      cr[j] += s;
    }
  }
}

inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw DimensionError("matmul_nt: column counts differ " + shape_str(a) +
                         " vs " + shape_str(b));
  Matrix c(a.rows, b.rows);
  matmul_nt_acc(c, a, b);
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

enum class Binary { add, sub, hadamard };

inline Matrix ewise(const Matrix& a, const Matrix& b, Binary op) {
  require_same_shape(a, b, "ewise");
  Matrix c(a.rows, a.cols);
  const std::size_t n = a.size();
  switch (op) {
    case Binary::add:
      for (std::size_t i = 0; i < n; ++i) c.data[i] = a.data[i] + b.data[i];
      break;
    case Binary::sub:
      for (std::size_t i = 0; i < n; ++i) c.data[i] = a.data[i] - b.data[i];
      break;
    case Binary::hadamard:
      for (std::size_t i = 0; i < n; ++i) c.data[i] = a.data[i] * b.data[i];
      break;
  }
  return c;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

// y += alpha * x
inline void add_scaled(Matrix& y, const Matrix& x, double alpha) {
  require_same_shape(y, x, "add_scaled");
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += alpha * x.data[i];
}

// Elementwise maps. Derivative variants take the FORWARD OUTPUT, not the
// pre-activation: dtanh(y) = 1 - y^2, dsigmoid(y) = y(1 - y),
// drelu(y) = [y > 0]. relu'(0) is 0.
enum class Unary { tanh, sigmoid, relu, dtanh, dsigmoid, drelu };

namespace detail {
template <class F>
Matrix map_impl(const Matrix& a, F f) {
  Matrix c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = f(a.data[i]);
  return c;
}
}  // namespace detail

inline Matrix map(const Matrix& a, Unary f) {
  switch (f) {
    case Unary::tanh:
      return detail::map_impl(a, [](double v) { return std::tanh(v); });
    case Unary::sigmoid:
      return detail::map_impl(a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    case Unary::relu:
      return detail::map_impl(a, [](double v) { return v > 0.0 ? v : 0.0; });
    case Unary::dtanh:
      return detail::map_impl(a, [](double y) { return 1.0 - y * y; });
    case Unary::dsigmoid:
      return detail::map_impl(a, [](double y) { return y * (1.0 - y); });
    case Unary::drelu:
      return detail::map_impl(a, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
  }
  return Matrix();  // unreachable
}

// Row-wise softmax with per-row max subtraction.
inline Matrix softmax_rows(const Matrix& a) {
  Matrix c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* cr = c.row(i);
    double mx = ar[0];
    for (std::size_t j = 1; j < a.cols; ++j) mx = std::max(mx, ar[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      cr[j] = std::exp(ar[j] - mx);
      sum += cr[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < a.cols; ++j) cr[j] *= inv;
  }
  return c;
}

inline bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace lsrc
