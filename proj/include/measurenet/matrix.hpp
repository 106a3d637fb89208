#pragma once

#include <cstddef>
#include <vector>

namespace measurenet {

// Dense row-major matrix of doubles. Shape is fixed at construction and all
// exported operations check shapes up front, throwing std::invalid_argument
// on a mismatch.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
  std::size_t size() const { return data.size(); }
  void set_zero() { std::fill(data.begin(), data.end(), 0.0); }
};

// Raw row-major kernel: c (m x n) += a (m x k) * b (k x n). The inner loop
// runs over b's rows so the compiler can vectorize the contiguous j sweep;
// accumulation order is fixed (k ascending), so results are bit-reproducible
// across calls and across the batched/per-set code paths built on it.
void gemm_acc(const double* a, std::size_t m, std::size_t k, const double* b,
              std::size_t n, double* c);

// c = a * b.
Matrix matmul(const Matrix& a, const Matrix& b);

// c += a * b, same kernel as matmul without the intermediate allocation.
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c);

Matrix transpose(const Matrix& a);

// Transpose into a reusable buffer (resized as needed).
void transpose_into(const Matrix& a, Matrix& out);

// Per-row squared Euclidean norms (the K(.) map used by the path norms).
std::vector<double> row_sq_norms(const Matrix& a);

bool all_finite(const Matrix& a);

// In-place axpy on the flat storage: y += alpha * x. Shapes must match.
void add_scaled(Matrix& y, double alpha, const Matrix& x);

// Solves a * x = b by Gaussian elimination with partial pivoting. Throws
// std::domain_error when a pivot underflows (singular system).
std::vector<double> solve_linear(Matrix a, std::vector<double> b);

}  // namespace measurenet
