#include "sgpg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sgpg/kernels.hpp"

namespace sgpg {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows, std::size_t cols) {
  Matrix m(0, cols);
  for (const auto& r : rows) m.append_row(r);
  return m;
}

Vector Matrix::row_vector(std::size_t i) const {
  auto r = row(i);
  return Vector(r.begin(), r.end());
}

Vector Matrix::col_vector(std::size_t j) const {
  Vector c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

void Matrix::append_row(std::span<const double> r) {
  if (r.size() != cols_) throw DimensionError("append_row: width mismatch");
  data_.insert(data_.end(), r.begin(), r.end());
  ++rows_;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matrix product: inner dims differ");
  Matrix c(a.rows(), b.cols());
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double s = a(i, p);
      if (s != 0.0) k.axpy(s, b.data() + p * b.cols(), c.data() + i * c.cols(), b.cols());
    }
  }
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix sum");
  Matrix c = a;
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) c.data()[i] += b.data()[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix difference");
  Matrix c = a;
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) c.data()[i] *= s;
  return c;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionError("matrix-vector product");
  Vector y(a.rows(), 0.0);
  kernels::active().gemv(a.data(), a.rows(), a.cols(), a.cols(), x.data(), y.data());
  return y;
}

Vector transpose_times(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw DimensionError("transpose-vector product");
  Vector y(a.cols(), 0.0);
  kernels::active().gemv_t(a.data(), a.rows(), a.cols(), a.cols(), x.data(), y.data());
  return y;
}

Vector add(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("vector sum");
  Vector c(a.begin(), a.end());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Vector sub(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("vector difference");
  Vector c(a.begin(), a.end());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Vector scaled(double s, std::span<const double> a) {
  Vector c(a.begin(), a.end());
  for (double& x : c) x *= s;
  return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot product");
  return kernels::dot(a, b);
}

double norm2(std::span<const double> a) { return std::sqrt(kernels::dot(a, a)); }

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("hstack: row counts differ");
  Matrix c(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), c.row(i).begin());
    std::copy(b.row(i).begin(), b.row(i).end(), c.row(i).begin() + a.cols());
  }
  return c;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("vstack: column counts differ");
  Matrix c = a;
  for (std::size_t i = 0; i < b.rows(); ++i) c.append_row(b.row(i));
  return c;
}

Matrix power(const Matrix& a, unsigned k) {
  if (a.rows() != a.cols()) throw DimensionError("power of non-square matrix");
  Matrix r = Matrix::identity(a.rows());
  for (unsigned i = 0; i < k; ++i) r = a * r;
  return r;
}

bool cholesky_lower(double* a, std::size_t n, std::size_t lda, double min_pivot) {
  const auto& k = kernels::active();
  for (std::size_t j = 0; j < n; ++j) {
    double* rj = a + j * lda;
    const double d = rj[j] - k.dot(rj, rj, j);
    if (!(d > min_pivot)) return false;
    const double ljj = std::sqrt(d);
    rj[j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double* ri = a + i * lda;
      ri[j] = (ri[j] - k.dot(ri, rj, j)) / ljj;
    }
  }
  return true;
}

void cholesky_solve(const double* l, std::size_t n, std::size_t lda, double* b) {
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = l + i * lda;
    b[i] = (b[i] - k.dot(ri, b, i)) / ri[i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= l[j * lda + ii] * b[j];
    b[ii] = s / l[ii * lda + ii];
  }
}

bool solve_square(Matrix a, Vector& b, double tol) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw DimensionError("solve_square");
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (std::abs(a(piv, c)) <= tol) return false;
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(c, j), a(piv, j));
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      if (f == 0.0) continue;
      for (std::size_t j = c; j < n; ++j) a(r, j) -= f * a(c, j);
      b[r] -= f * b[c];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * b[j];
    b[i] = s / a(i, i);
  }
  return true;
}

std::string to_string(const Matrix& m) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    os << '\n';
  }
  return os.str();
}

}  // namespace sgpg
