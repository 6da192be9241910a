#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace rd2v {

// All numerics run at 64-bit precision.
using Real = double;

using EigenRowMatrix =
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigenMap = Eigen::Map<EigenRowMatrix>;
using ConstEigenMap = Eigen::Map<const EigenRowMatrix>;

/// Dense row-major real matrix with value semantics.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = 0.0);

  /// Takes ownership of `data`; rejects length mismatches and non-finite
  /// entries.
  static Matrix from_data(std::size_t rows, std::size_t cols, std::vector<Real> data);
  static Matrix from_rows(std::initializer_list<std::initializer_list<Real>> rows);
  static Matrix row_vector(std::span<const Real> values);
  static Matrix scalar(Real v) { return Matrix(1, 1, v); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  EigenMap eigen() { return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)}; }
  ConstEigenMap eigen() const {
    return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)};
  }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;
  Real item() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator*=(Real s);

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(Real s, Matrix a);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> rows);
Matrix stack_rows(std::span<const std::vector<Real>> rows);

Real max_abs(const Matrix& a);
Real max_abs_diff(const Matrix& a, const Matrix& b);

/// Throws ShapeError with `what` in the message when shapes differ.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

} // namespace rd2v
