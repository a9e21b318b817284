#include "came/diff/num_array.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace came::diff {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ShapeError::ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs)
    : std::invalid_argument(op + ": incompatible shapes " + shape_to_string(lhs) + " and " + shape_to_string(rhs)) {}

NumArray::NumArray(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

NumArray::NumArray(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw ShapeError("NumArray: shape " + shape_to_string(shape_) + " does not hold " +
                     std::to_string(values_.size()) + " values");
  }
}

NumArray NumArray::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return NumArray(Shape{n}, std::move(v));
}

NumArray NumArray::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return NumArray(Shape{rows, cols}, std::move(v));
}

std::size_t NumArray::rows() const {
  if (shape_.size() == 2) return shape_[0];
  return shape_.empty() ? 1 : 1;
}

std::size_t NumArray::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double NumArray::item() const {
  if (values_.size() != 1) {
    throw ShapeError("item: expected a single element, got shape " + shape_to_string(shape_));
  }
  return values_[0];
}

void NumArray::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void NumArray::reshape(Shape shape) {
  if (shape_size(shape) != values_.size()) throw ShapeError("reshape", shape_, shape);
  shape_ = std::move(shape);
}

bool NumArray::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void NumArray::add_inplace(const NumArray& other) {
  if (other.values_.size() != values_.size()) throw ShapeError("add_inplace", shape_, other.shape_);
  double* dst = values_.data();
  const double* src = other.values_.data();
  for (std::size_t i = 0, n = values_.size(); i < n; ++i) dst[i] += src[i];
}

namespace kernels {

void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_tn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + k * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += av * bi[j];
    }
  }
}

void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b, double* c,
             bool accumulate) {
  std::vector<double> bt(k * m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * m + j] = b[j * k + p];
  }
  gemm_nn(n, k, m, a, bt.data(), c, accumulate);
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace kernels

}  // namespace came::diff
