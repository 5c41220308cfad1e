#pragma once

// Small dense row-major matrices. Sizes here are tiny (n <= 8 states, a few
// hundred constraint rows, 64-wide MLP layers), so there is no expression
// templating: plain value types with the hot loops routed through kernels.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgpg {

using Vector = std::vector<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  Vector row_vector(std::size_t i) const;
  Vector col_vector(std::size_t j) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void append_row(std::span<const double> r);
  Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Vector operator*(const Matrix& a, std::span<const double> x);

// y = A^T x
Vector transpose_times(const Matrix& a, std::span<const double> x);

Vector add(std::span<const double> a, std::span<const double> b);
Vector sub(std::span<const double> a, std::span<const double> b);
Vector scaled(double s, std::span<const double> a);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double max_abs(std::span<const double> a);
bool all_finite(std::span<const double> a);

Matrix hstack(const Matrix& a, const Matrix& b);
Matrix vstack(const Matrix& a, const Matrix& b);
Matrix power(const Matrix& a, unsigned k);

// In-place Cholesky of the lower triangle of a symmetric positive definite
// matrix stored row-major with leading dimension lda. Returns false if a
// pivot falls below `min_pivot`.
bool cholesky_lower(double* a, std::size_t n, std::size_t lda, double min_pivot);
// Solves L L^T x = b in place given the factor from cholesky_lower.
void cholesky_solve(const double* l, std::size_t n, std::size_t lda, double* b);

// Solves the square system A x = b by Gaussian elimination with partial
// pivoting. Returns false if A is singular to within `tol`.
bool solve_square(Matrix a, Vector& b, double tol = 1e-12);

std::string to_string(const Matrix& m);

}  // namespace sgpg
