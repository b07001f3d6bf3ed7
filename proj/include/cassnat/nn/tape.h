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

#ifndef CASSNAT_NN_TAPE_H_
#define CASSNAT_NN_TAPE_H_

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "cassnat/common/random.h"
#include "cassnat/nn/attention_mask.h"
#include "cassnat/nn/parameter.h"
#include "cassnat/nn/tensor.h"

namespace cassnat::nn {

// Handle to a node on a Tape.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

enum class Reduction { kMean, kSum };

// Reverse-mode autodiff tape. Every op evaluates eagerly and, when gradients
// are enabled, records a closure that pushes the node's gradient into its
// inputs. Backward() runs the closures in reverse creation order and then
// accumulates leaf gradients into the owning Parameters.
//
// One tape per thread; parameters are only read during the forward pass.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var Constant(Tensor value);
  // Leaf bound to a parameter. Repeated calls for the same parameter return
  // the same node.
  Var Leaf(Parameter& p);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of the last Backward() loss w.r.t. v (zeros if unreachable).
  const Tensor& grad(Var v);

  // --- ops ---------------------------------------------------------------
  Var MatMul(Var a, Var b);                 // [n x k] * [k x m]
  Var Linear(Var x, Var w, Var b);          // x * w + b (b broadcast per row)
  Var Add(Var a, Var b);                    // same shape
  Var AddScaled(Var a, Var b, double s);    // a + s * b
  Var Scale(Var a, double s);
  Var Relu(Var a);
  Var Softmax(Var a);                       // row-wise, 2-D
  Var LayerNorm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var MaskedAttention(Var q, Var k, Var v, const AttentionMask& mask,
                      MaskMode mode = MaskMode::kPreSoftmax);
  Var SliceCols(Var x, std::size_t begin, std::size_t width);
  Var ConcatCols(std::span<const Var> parts);
  Var Gather(Var table, std::span<const int> ids);  // embedding lookup
  Var Reshape(Var x, std::vector<std::size_t> shape);
  Var PadRows(Var x, std::size_t rows);         // append zero rows, 2-D
  Var Dropout(Var x, double rate, Rng& rng);  // inverted dropout
  Var Sum(Var x);                             // -> shape [1]
  // Label-smoothed cross entropy against integer targets. Smoothing mass
  // `eps` is spread uniformly over all classes.
  Var CrossEntropy(Var logits, std::span<const int> targets, double eps,
                   Reduction reduction = Reduction::kMean);
  // Scalar loss computed by `fn` from a 2-D input; `fn` fills d(loss)/d(x).
  using LossFn = std::function<double(const Tensor& x, Tensor& dx)>;
  Var CustomLoss(Var x, const LossFn& fn);
  // 3x3 convolution, stride 2, zero padding 1. x: [C, H, W],
  // kernel: [O, C, 3, 3], bias: [O]  ->  [O, ceil(H/2), ceil(W/2)].
  Var Conv2dStride2(Var x, Var kernel, Var bias);
  // [C, H, W] -> [H, C * W]
  Var ChannelsToRows(Var x);

  // Requires a single-element loss. Throws kState when called twice.
  void Backward(Var loss);
  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void()> backward;
  };

  Var Push(Tensor value, bool requires_grad, std::function<void()> backward);
  bool Needs(Var v) const { return nodes_[v.id].requires_grad; }
  bool AnyNeeds(std::initializer_list<Var> vs) const;
  Tensor& G(std::size_t id);  // lazily zero-initialised gradient buffer

  bool grad_enabled_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> leaves_;
};

}  // namespace cassnat::nn

#endif  // CASSNAT_NN_TAPE_H_
