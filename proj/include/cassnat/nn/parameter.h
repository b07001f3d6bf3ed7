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

#ifndef CASSNAT_NN_PARAMETER_H_
#define CASSNAT_NN_PARAMETER_H_

#include <deque>
#include <string>
#include <vector>

#include "cassnat/common/random.h"
#include "cassnat/nn/tensor.h"

namespace cassnat::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value

  void ZeroGrad() { grad.Fill(0.0); }
};

// Ordered, name-addressable parameter store. Addresses are stable for the
// lifetime of the set, so layers hold raw Parameter pointers.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  Parameter& Create(const std::string& name, std::vector<std::size_t> shape);
  Parameter* Find(const std::string& name);
  const Parameter* Find(const std::string& name) const;

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t NumScalars() const;

  void ZeroGrad();
  // Copies values from `other` for every name present in both. When
  // `prefix` is non-empty only names starting with it are considered.
  // Shape mismatch on a shared name is an error. Returns the copy count.
  std::size_t CopyValuesFrom(const ParameterSet& other,
                             const std::string& prefix = "");

 private:
  std::deque<Parameter> params_;
};

// Glorot-uniform fill for a fan_in x fan_out weight.
void XavierUniform(Tensor& w, Rng& rng);

}  // namespace cassnat::nn

#endif  // CASSNAT_NN_PARAMETER_H_
