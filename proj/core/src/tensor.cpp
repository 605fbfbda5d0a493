#include "bier/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bier/errors.hpp"

namespace bier {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidArgument("matrix data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidArgument("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.dim()) {
    throw InvalidArgument("matvec: matrix has " + std::to_string(m.cols()) +
                          " columns but vector has dim " + std::to_string(v.dim()));
  }
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), v.span());
  return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& v) {
  if (m.rows() != v.dim()) {
    throw InvalidArgument("matvec_transposed: matrix has " + std::to_string(m.rows()) +
                          " rows but vector has dim " + std::to_string(v.dim()));
  }
  Vector out(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) axpy(v[r], m.row(r), out.span());
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

Vector l2_normalize(const Vector& v) {
  const double n = norm(v.span());
  if (!(n > 0.0)) throw DegenerateInput("l2_normalize: zero-norm vector");
  Vector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = v[i] / n;
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("pearson: length mismatch");
  if (a.size() < 2) throw InvalidArgument("pearson: need at least two values");
  const auto n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedCorrelation("pearson: constant sequence");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_outer(Matrix& m, double a, std::span<const double> u, std::span<const double> v) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double s = a * u[r];
    if (s == 0.0) continue;
    axpy(s, v, m.row(r));
  }
}

}  // namespace bier
