#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace agla {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transposed() const;
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& m, double factor);
Matrix add(const Matrix& a, const Matrix& b);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& m);
/// Softmax of a single vector with max subtraction.
Vector softmax(std::span<const double> logits);

double sigmoid(double x);
/// Derivative of the logistic function, σ(x)(1 − σ(x)).
double sigmoid_prime(double x);

double dot(std::span<const double> a, std::span<const double> b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// All indices attaining the maximum, ascending.
std::vector<std::size_t> argmax_ties(std::span<const double> v);

/// Solve A x = B for square A by Gaussian elimination with partial pivoting.
Matrix solve(const Matrix& a, const Matrix& b);

// Plain-text matrix format: "rows cols" line, then one line per row.
// Values are written with 17 significant digits so reading back is exact.
void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);
std::string format_real(double x, int significant_digits = 17);

}  // namespace agla
