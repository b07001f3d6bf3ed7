// Copyright 2026 The cassnat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cassnat/nn/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cassnat/common/error.h"

namespace cassnat::nn {

std::size_t ShapeProduct(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(ShapeProduct(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  CASSNAT_CHECK(ShapeProduct(shape_) == data_.size(), ErrorKind::kShape,
                "tensor data length " + std::to_string(data_.size()) +
                    " does not match shape " + ShapeString(shape_));
}

std::size_t Tensor::rows() const {
  CASSNAT_CHECK(shape_.size() == 2, ErrorKind::kShape,
                "expected 2-D tensor, got " + ShapeString(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  CASSNAT_CHECK(shape_.size() == 2, ErrorKind::kShape,
                "expected 2-D tensor, got " + ShapeString(shape_));
  return shape_[1];
}

Tensor Tensor::Reshaped(std::vector<std::size_t> shape) const {
  return Tensor(std::move(shape), data_);
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor SoftmaxRows(const Tensor& logits) {
  Tensor out(logits.shape());
  const std::size_t n = logits.rows(), c = logits.cols();
  for (std::size_t i = 0; i < n; ++i) {
    auto in = logits.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= sum;
  }
  return out;
}

Tensor SinusoidalPositionalEncoding(std::size_t length, std::size_t width) {
  CASSNAT_CHECK(length >= 1, ErrorKind::kShape,
                "positional encoding length must be >= 1");
  CASSNAT_CHECK(width >= 1, ErrorKind::kShape,
                "positional encoding width must be >= 1");
  Tensor pe = Tensor::Zeros(length, width);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < width; i += 2) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(width));
      pe.at(pos, i) = std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < width) pe.at(pos, i + 1) = std::cos(static_cast<double>(pos) * freq);
    }
  }
  return pe;
}

}  // namespace cassnat::nn
