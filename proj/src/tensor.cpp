#include "fqgan/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace fqgan {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto extent : shape_)
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + to_string(shape_));
  values_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto extent : shape_)
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + to_string(shape_));
  if (values_.size() != element_count(shape_))
    throw DimensionError("value count " + std::to_string(values_.size()) +
                         " does not match shape " + to_string(shape_));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

std::size_t Tensor::rows() const noexcept { return shape_.empty() ? 1 : shape_.front(); }

std::size_t Tensor::cols() const noexcept {
  if (shape_.empty()) return 1;
  return values_.size() / shape_.front();
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != values_.size())
    throw DimensionError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(double value) noexcept { std::fill(values_.begin(), values_.end(), value); }

}  // namespace fqgan
