// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "loranoise/matrix.hpp"

#include <cmath>
#include <cstring>

#include "loranoise/stats.hpp"

namespace loranoise {

namespace {

void require_positive(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("matrix dimensions must be positive, got " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
}

[[noreturn]] void throw_shape(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) +
                   "x" + std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                   std::to_string(b.cols()));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
  require_positive(rows, cols);
  data_.assign(rows * cols, 0.0);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_positive(rows, cols);
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("matrix data size " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r > 0 ? rows.begin()->size() : 0;
  require_positive(r, c);
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw std::invalid_argument("ragged initialiser: expected " + std::to_string(c) +
                                  " columns");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw_shape("add", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw_shape("subtract", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double scalar) {
  for (double& v : data_) v *= scalar;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) {
  a += b;
  return a;
}

Matrix operator-(Matrix a, const Matrix& b) {
  a -= b;
  return a;
}

Matrix operator*(double scalar, Matrix m) {
  m *= scalar;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw_shape("matmul", a, b);
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c.row_ptr(i);
    const double* ai = a.row_ptr(i);
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = ai[l];
      const double* bl = b.row_ptr(l);
      for (std::size_t j = 0; j < m; ++j) ci[j] += ail * bl[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* mi = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = mi[j];
  }
  return t;
}

double frobenius_norm(const Matrix& m) {
  if (m.empty()) return 0.0;
  std::vector<double> sq(m.size());
  std::span<const double> d = m.data();
  for (std::size_t i = 0; i < d.size(); ++i) sq[i] = d[i] * d[i];
  return std::sqrt(pairwise_sum(sq));
}

std::vector<double> row_l2_norms(const Matrix& m) {
  std::vector<double> norms(m.rows());
  std::vector<double> sq(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) sq[j] = row[j] * row[j];
    norms[i] = std::sqrt(pairwise_sum(sq));
  }
  return norms;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw_shape("frobenius_inner", a, b);
  std::vector<double> prod(a.size());
  std::span<const double> da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) prod[i] = da[i] * db[i];
  return pairwise_sum(prod);
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.data()) best = std::max(best, std::fabs(v));
  return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw_shape("max_abs_diff", a, b);
  double best = 0.0;
  std::span<const double> da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) best = std::max(best, std::fabs(da[i] - db[i]));
  return best;
}

namespace {

Matrix matrix_sum_impl(const Matrix* items, std::size_t n) {
  if (n == 1) return items[0];
  const std::size_t half = n / 2;
  Matrix left = matrix_sum_impl(items, half);
  left += matrix_sum_impl(items + half, n - half);
  return left;
}

}  // namespace

Matrix pairwise_matrix_sum(std::span<const Matrix> items) {
  if (items.empty()) throw std::invalid_argument("pairwise_matrix_sum: empty sequence");
  return matrix_sum_impl(items.data(), items.size());
}

Matrix pairwise_matrix_mean(std::span<const Matrix> items) {
  Matrix sum = pairwise_matrix_sum(items);
  sum *= 1.0 / static_cast<double>(items.size());
  return sum;
}

}  // namespace loranoise
