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

#ifndef CASSNAT_NN_LAYERS_H_
#define CASSNAT_NN_LAYERS_H_

#include <string>
#include <vector>

#include "cassnat/common/random.h"
#include "cassnat/nn/attention_mask.h"
#include "cassnat/nn/parameter.h"
#include "cassnat/nn/tape.h"

namespace cassnat::nn {

// Per-forward switches. Dropout is active only when `train` is set and an
// rng is supplied.
struct ForwardContext {
  bool train = false;
  Rng* rng = nullptr;
  double dropout = 0.0;
  MaskMode mask_mode = MaskMode::kPreSoftmax;

  Var Dropout(Tape& tape, Var x) const {
    if (!train || rng == nullptr || dropout <= 0.0) return x;
    return tape.Dropout(x, dropout, *rng);
  }
};

struct LinearLayer {
  Parameter* weight = nullptr;  // [in, out]
  Parameter* bias = nullptr;    // [out]

  static LinearLayer Create(ParameterSet& params, const std::string& name,
                            std::size_t in, std::size_t out, Rng& init);
  Var Forward(Tape& tape, Var x) const {
    return tape.Linear(x, tape.Leaf(*weight), tape.Leaf(*bias));
  }
};

struct LayerNormLayer {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;

  static LayerNormLayer Create(ParameterSet& params, const std::string& name,
                               std::size_t width);
  Var Forward(Tape& tape, Var x) const {
    return tape.LayerNorm(x, tape.Leaf(*gamma), tape.Leaf(*beta));
  }
};

// Position-wise relu MLP.
struct FeedForwardLayer {
  LinearLayer inner;
  LinearLayer outer;

  static FeedForwardLayer Create(ParameterSet& params, const std::string& name,
                                 std::size_t width, std::size_t hidden,
                                 Rng& init);
  Var Forward(Tape& tape, Var x, const ForwardContext& ctx) const;
};

// Key/value projections of a memory, reusable across many query sets.
// With more than one head the per-head column slices are cut once here.
struct ProjectedMemory {
  Var keys;
  Var values;
  std::vector<Var> head_keys;
  std::vector<Var> head_values;
};

// H heads of masked scaled dot-product attention followed by an output
// projection. Head h uses columns [h*d/H, (h+1)*d/H) of the projections.
struct MultiHeadAttention {
  std::size_t heads = 1;
  std::size_t width = 0;
  LinearLayer query, key, value, output;

  static MultiHeadAttention Create(ParameterSet& params, const std::string& name,
                                   std::size_t width, std::size_t heads,
                                   Rng& init);

  ProjectedMemory Project(Tape& tape, Var memory) const;
  Var Attend(Tape& tape, Var x_q, const ProjectedMemory& memory,
             const AttentionMask& mask, const ForwardContext& ctx) const;
  Var Forward(Tape& tape, Var x_q, Var x_kv, const AttentionMask& mask,
              const ForwardContext& ctx) const {
    return Attend(tape, x_q, Project(tape, x_kv), mask, ctx);
  }
};

}  // namespace cassnat::nn

#endif  // CASSNAT_NN_LAYERS_H_
