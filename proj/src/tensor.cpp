#include "naslab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "naslab/errors.hpp"

namespace naslab {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw StructuralError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::rows(std::size_t begin, std::size_t count) const {
  if (shape_.empty() || begin + count > shape_[0]) {
    throw PreconditionError("row slice out of range for shape " + shape_to_string(shape_));
  }
  const std::size_t stride = shape_[0] == 0 ? 0 : data_.size() / shape_[0];
  Shape s = shape_;
  s[0] = count;
  std::vector<double> d(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                        data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * stride));
  return Tensor(std::move(s), std::move(d));
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace naslab
