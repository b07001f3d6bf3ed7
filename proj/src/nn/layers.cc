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

#include "cassnat/nn/layers.h"

#include <vector>

#include "cassnat/common/error.h"

namespace cassnat::nn {

LinearLayer LinearLayer::Create(ParameterSet& params, const std::string& name,
                                std::size_t in, std::size_t out, Rng& init) {
  LinearLayer l;
  l.weight = &params.Create(name + ".weight", {in, out});
  l.bias = &params.Create(name + ".bias", {out});
  XavierUniform(l.weight->value, init);
  return l;
}

LayerNormLayer LayerNormLayer::Create(ParameterSet& params,
                                      const std::string& name,
                                      std::size_t width) {
  LayerNormLayer l;
  l.gamma = &params.Create(name + ".gamma", {width});
  l.beta = &params.Create(name + ".beta", {width});
  l.gamma->value.Fill(1.0);
  return l;
}

FeedForwardLayer FeedForwardLayer::Create(ParameterSet& params,
                                          const std::string& name,
                                          std::size_t width, std::size_t hidden,
                                          Rng& init) {
  FeedForwardLayer f;
  f.inner = LinearLayer::Create(params, name + ".inner", width, hidden, init);
  f.outer = LinearLayer::Create(params, name + ".outer", hidden, width, init);
  return f;
}

Var FeedForwardLayer::Forward(Tape& tape, Var x,
                              const ForwardContext& ctx) const {
  Var h = tape.Relu(inner.Forward(tape, x));
  h = ctx.Dropout(tape, h);
  return outer.Forward(tape, h);
}

MultiHeadAttention MultiHeadAttention::Create(ParameterSet& params,
                                              const std::string& name,
                                              std::size_t width,
                                              std::size_t heads, Rng& init) {
  CASSNAT_CHECK(heads >= 1 && width % heads == 0, ErrorKind::kUsage,
                "head count " + std::to_string(heads) +
                    " does not divide model width " + std::to_string(width));
  MultiHeadAttention m;
  m.heads = heads;
  m.width = width;
  m.query = LinearLayer::Create(params, name + ".query", width, width, init);
  m.key = LinearLayer::Create(params, name + ".key", width, width, init);
  m.value = LinearLayer::Create(params, name + ".value", width, width, init);
  m.output = LinearLayer::Create(params, name + ".output", width, width, init);
  return m;
}

ProjectedMemory MultiHeadAttention::Project(Tape& tape, Var memory) const {
  ProjectedMemory m{key.Forward(tape, memory), value.Forward(tape, memory), {}, {}};
  if (heads > 1) {
    const std::size_t dh = width / heads;
    for (std::size_t h = 0; h < heads; ++h) {
      m.head_keys.push_back(tape.SliceCols(m.keys, h * dh, dh));
      m.head_values.push_back(tape.SliceCols(m.values, h * dh, dh));
    }
  }
  return m;
}

Var MultiHeadAttention::Attend(Tape& tape, Var x_q,
                               const ProjectedMemory& memory,
                               const AttentionMask& mask,
                               const ForwardContext& ctx) const {
  Var q = query.Forward(tape, x_q);
  Var ctx_out;
  if (heads == 1) {
    ctx_out = tape.MaskedAttention(q, memory.keys, memory.values, mask,
                                   ctx.mask_mode);
  } else {
    const std::size_t dh = width / heads;
    std::vector<Var> parts;
    parts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      Var qh = tape.SliceCols(q, h * dh, dh);
      parts.push_back(tape.MaskedAttention(qh, memory.head_keys[h],
                                           memory.head_values[h], mask,
                                           ctx.mask_mode));
    }
    ctx_out = tape.ConcatCols(parts);
  }
  return output.Forward(tape, ctx_out);
}

}  // namespace cassnat::nn
