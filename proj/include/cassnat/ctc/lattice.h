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

#ifndef CASSNAT_CTC_LATTICE_H_
#define CASSNAT_CTC_LATTICE_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cassnat/ctc/posterior_grid.h"
#include "cassnat/nn/tape.h"
#include "cassnat/nn/tensor.h"

namespace cassnat::ctc {

// Fewest frames that can emit `ref`: one per token plus a blank between
// each adjacent repeated pair.
std::size_t MinFramesFor(std::span<const int> ref);
bool Feasible(std::size_t frames, std::span<const int> ref);

struct ForwardBackwardResult {
  double log_likelihood = 0.0;  // log of the summed path probability
  nn::Tensor occupancy;         // frames x vocab posterior label occupancy
};

// Standard 2U+1 state CTC recursion in log space. `log_probs` is
// frames x vocab. Throws kInfeasible when ref does not fit.
ForwardBackwardResult CtcForwardBackward(const nn::Tensor& log_probs,
                                         std::span<const int> ref,
                                         bool want_occupancy);

// Negative log-likelihood of `ref` summed over all alignments.
double CtcLoss(const PosteriorGrid& grid, std::span<const int> ref);

// Differentiable CTC loss on raw logits (log-softmax applied inside).
nn::Var CtcLossOp(nn::Tape& tape, nn::Var logits, std::span<const int> ref);

// Most probable frame path that collapses exactly to `ref`. On equal
// scores the backtrace prefers staying in the current lattice state, then
// the blank predecessor, then the skip; at the end the final blank wins.
Alignment ViterbiAlign(const PosteriorGrid& grid, std::span<const int> ref);

// Per-frame argmax, ties to the lower token id.
Alignment BestPathAlign(const PosteriorGrid& grid);

enum class BsaPath { kTracked, kRealigned };
BsaPath ParseBsaPath(const std::string& s);

struct BeamSearchResult {
  Alignment alignment;    // concrete frame path for the winning prefix
  TokenSeq prefix;        // winning collapsed sequence
  double prefix_logprob;  // log of the merged prefix probability
};

// CTC prefix beam search. Each surviving prefix carries its summed
// probability (split by blank / non-blank ending) and the best single frame
// path reaching it. kTracked returns that path; kRealigned forced-aligns
// the winning prefix with ViterbiAlign.
BeamSearchResult BeamSearchAlign(const PosteriorGrid& grid, std::size_t beam,
                                 BsaPath path = BsaPath::kTracked);

enum class EsaDistribution { kTop2Uniform, kTop2Renormalized };
EsaDistribution ParseEsaDistribution(const std::string& s);
std::string ToString(EsaDistribution d);

struct EsaConfig {
  double threshold = 0.7;
  std::size_t samples = 50;
  EsaDistribution distribution = EsaDistribution::kTop2Uniform;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Frames whose top-1 probability is strictly below `threshold`.
std::vector<std::size_t> SelectLowConfidenceFrames(const PosteriorGrid& grid,
                                                   double threshold);

// Error-based sampling: sample 0 is the best path; sample k >= 1 redraws
// every low-confidence frame from its top-2 tokens using a generator seeded
// from (seed, stream, k), so results do not depend on evaluation order.
std::vector<Alignment> EsaSample(const PosteriorGrid& grid, const EsaConfig& cfg,
                                 std::string_view stream = {});

}  // namespace cassnat::ctc

#endif  // CASSNAT_CTC_LATTICE_H_
