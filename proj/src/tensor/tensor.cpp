// SPDX-License-Identifier: Apache-2.0
#include "kanli/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "kanli/binary_io.hpp"
#include "kanli/errors.hpp"

namespace kanli {

namespace {
constexpr std::string_view kTensorMagic = "KAT1";
// Guards against absurd allocations when reading a corrupt header.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape_) +
                         " does not hold " + std::to_string(data_.size()) +
                         " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(n_rows * n_cols);
  for (const auto& row : rows) {
    if (row.size() != n_cols) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{n_rows, n_cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_to_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " +
                         shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void write_tensor(std::ostream& out, const Tensor& tensor) {
  io::write_magic(out, kTensorMagic);
  io::write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t d : tensor.shape()) io::write_u64(out, d);
  for (double v : tensor.data()) io::write_f64(out, v);
}

Tensor read_tensor(std::istream& in) {
  io::expect_magic(in, kTensorMagic);
  const std::uint32_t rank = io::read_u32(in);
  if (rank > 16) throw FormatError("tensor rank " + std::to_string(rank) + " too large");
  Shape shape(rank);
  std::uint64_t total = 1;
  for (auto& d : shape) {
    const std::uint64_t dim = io::read_u64(in);
    if (dim != 0 && total > kMaxElements / dim) {
      throw FormatError("tensor dims overflow");
    }
    total *= dim;
    d = static_cast<std::size_t>(dim);
  }
  std::vector<double> data(static_cast<std::size_t>(total));
  for (auto& v : data) v = io::read_f64(in);
  return Tensor(std::move(shape), std::move(data));
}

std::string serialize_tensor(const Tensor& tensor) {
  std::ostringstream out(std::ios::binary);
  write_tensor(out, tensor);
  return out.str();
}

Tensor deserialize_tensor(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  Tensor tensor = read_tensor(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after tensor");
  }
  return tensor;
}

}  // namespace kanli
