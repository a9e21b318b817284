#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace came::diff {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Raised when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs);
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Dense row-major array of doubles. Rank 0 (scalar), 1 and 2 are used in
/// practice; nothing here assumes a maximum rank.
class NumArray {
 public:
  NumArray() = default;
  explicit NumArray(Shape shape, double fill = 0.0);
  NumArray(Shape shape, std::vector<double> values);

  static NumArray scalar(double v) { return NumArray(Shape{}, std::vector<double>{v}); }
  static NumArray vector(std::vector<double> v);
  static NumArray matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  /// Rows/cols of a rank-2 array. A rank-1 array is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }
  const std::vector<double>& storage() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }

  /// Scalar value of a one-element array.
  double item() const;

  void fill(double v);
  void reshape(Shape shape);
  bool all_finite() const;

  /// Element-wise `*this += other` (shapes must match).
  void add_inplace(const NumArray& other);

  friend bool operator==(const NumArray& a, const NumArray& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
};

namespace kernels {

// Row-major dense products. Every output element is accumulated over the
// inner dimension in ascending order, so a row's result never depends on how
// many other rows share the call.

/// C(n x m) (+)= A(n x k) * B(k x m)
void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c,
             bool accumulate);
/// C(k x m) (+)= A(n x k)^T * B(n x m)
void gemm_tn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c,
             bool accumulate);
/// C(n x m) (+)= A(n x k) * B(m x k)^T
void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c,
             bool accumulate);

double dot(const double* a, const double* b, std::size_t n);

}  // namespace kernels

}  // namespace came::diff
