// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace loranoise {

// Thrown when two operands have incompatible shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when an iterative computation produces non-finite values.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles.
//
// Deliberately minimal: predictable memory layout and predictable
// accumulation order in every operation, so that results are bitwise
// reproducible across runs and machines with the same FP environment.
class Matrix {
 public:
  // Empty sentinel (0x0), useful for containers and moved-from slots.
  Matrix() = default;

  // Zero-initialised rows x cols matrix. Dimensions must be positive.
  Matrix(std::size_t rows, std::size_t cols);

  // Takes ownership of `data` (row-major, size must equal rows*cols).
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double scalar);

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double scalar, Matrix m);

// C = A * B with a fixed i-k-j loop order (deterministic accumulation).
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// sqrt(sum of squared entries); pairwise-summed, non-negative, exact zero
// only for the zero matrix.
double frobenius_norm(const Matrix& m);

// Euclidean norm of each row; satisfies
// frobenius_norm(m)^2 == pairwise sum of squared row norms.
std::vector<double> row_l2_norms(const Matrix& m);

// Flattened inner product <a, b> = sum_ij a_ij * b_ij (pairwise-summed).
double frobenius_inner(const Matrix& a, const Matrix& b);

// Largest absolute entry (0 for an empty matrix).
double max_abs(const Matrix& m);

// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

// Entrywise pairwise (cascade) sum / mean over equally shaped matrices.
// The combination tree depends only on the sequence length, so a batch
// containing two identical halves sums to exactly twice the half.
Matrix pairwise_matrix_sum(std::span<const Matrix> items);
Matrix pairwise_matrix_mean(std::span<const Matrix> items);

}  // namespace loranoise
