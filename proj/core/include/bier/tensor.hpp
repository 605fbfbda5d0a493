#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace bier {

// Dense real vector. Plain value type; copies are deep.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}
  explicit Vector(std::span<const double> values) : data_(values.begin(), values.end()) {}

  std::size_t dim() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  // Throws InvalidArgument unless values.size() == rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// m · v. Throws InvalidArgument when m.cols() != v.dim().
Vector matvec(const Matrix& m, const Vector& v);
// mᵀ · v, i.e. the row vector vᵀm. Throws InvalidArgument when m.rows() != v.dim().
Vector matvec_transposed(const Matrix& m, const Vector& v);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);
double norm(std::span<const double> v);

// Throws DegenerateInput on a zero vector.
[[nodiscard]] Vector l2_normalize(const Vector& v);

// Sample Pearson correlation. Throws InvalidArgument on length mismatch or
// fewer than two values, UndefinedCorrelation when either side is constant.
double pearson(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> values);

// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
// m += a * u vᵀ
void add_outer(Matrix& m, double a, std::span<const double> u, std::span<const double> v);

}  // namespace bier
