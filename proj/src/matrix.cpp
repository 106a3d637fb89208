#include "measurenet/matrix.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace measurenet {

namespace {

void check_mul_shapes(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: inner dimensions differ (" +
                                std::to_string(a.cols) + " vs " +
                                std::to_string(b.rows) + ")");
  }
}

}  // namespace

void gemm_acc(const double* a, std::size_t m, std::size_t k, const double* b,
              std::size_t n, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = arow[l];
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  check_mul_shapes(a, b);
  if (c.rows != a.rows || c.cols != b.cols) {
    throw std::invalid_argument("matmul_acc: output shape mismatch");
  }
  gemm_acc(a.data.data(), a.rows, a.cols, b.data.data(), b.cols, c.data.data());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_mul_shapes(a, b);
  Matrix c(a.rows, b.cols);
  matmul_acc(a, b, c);
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

void transpose_into(const Matrix& a, Matrix& out) {
  out.rows = a.cols;
  out.cols = a.rows;
  out.data.resize(a.data.size());
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out.data[j * a.rows + i] = a(i, j);
}

std::vector<double> row_sq_norms(const Matrix& a) {
  std::vector<double> out(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* r = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) s += r[j] * r[j];
    out[i] = s;
  }
  return out;
}

bool all_finite(const Matrix& a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

void add_scaled(Matrix& y, double alpha, const Matrix& x) {
  if (!y.same_shape(x)) throw std::invalid_argument("add_scaled: shape mismatch");
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
  if (a.rows != a.cols) throw std::invalid_argument("solve_linear: matrix not square");
  if (b.size() != a.rows) throw std::invalid_argument("solve_linear: rhs size mismatch");
  const std::size_t n = a.rows;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(piv, col))) piv = r;
    if (std::fabs(a(piv, col)) < 1e-300) {
      throw std::domain_error("solve_linear: singular system (pivot ~ 0 at column " +
                              std::to_string(col) + ")");
    }
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
      std::swap(b[piv], b[col]);
    }
    const double inv = 1.0 / a(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) * inv;
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

}  // namespace measurenet
