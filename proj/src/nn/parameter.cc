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

#include "cassnat/nn/parameter.h"

#include <cmath>

#include "cassnat/common/error.h"

namespace cassnat::nn {

Parameter& ParameterSet::Create(const std::string& name,
                                std::vector<std::size_t> shape) {
  CASSNAT_CHECK(Find(name) == nullptr, ErrorKind::kState,
                "duplicate parameter name: " + name);
  Parameter& p = params_.emplace_back();
  p.name = name;
  p.value = Tensor(shape);
  p.grad = Tensor(std::move(shape));
  return p;
}

Parameter* ParameterSet::Find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterSet::Find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterSet::NumScalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::ZeroGrad() {
  for (auto& p : params_) p.ZeroGrad();
}

std::size_t ParameterSet::CopyValuesFrom(const ParameterSet& other,
                                         const std::string& prefix) {
  std::size_t copied = 0;
  for (auto& p : params_) {
    if (!prefix.empty() && p.name.rfind(prefix, 0) != 0) continue;
    const Parameter* src = other.Find(p.name);
    if (src == nullptr) continue;
    CASSNAT_CHECK(src->value.shape() == p.value.shape(), ErrorKind::kShape,
                  "shape mismatch on load for " + p.name + ": " +
                      ShapeString(src->value.shape()) + " vs " +
                      ShapeString(p.value.shape()));
    p.value = src->value;
    ++copied;
  }
  return copied;
}

void XavierUniform(Tensor& w, Rng& rng) {
  const std::size_t fan_in = w.ndim() >= 2 ? w.size() / w.dim(w.ndim() - 1) : w.size();
  const std::size_t fan_out = w.ndim() >= 2 ? w.dim(w.ndim() - 1) : 1;
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.Uniform(-a, a);
}

}  // namespace cassnat::nn
