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

#ifndef CASSNAT_MODEL_LOSS_H_
#define CASSNAT_MODEL_LOSS_H_

#include <span>
#include <string>

#include "cassnat/ctc/posterior_grid.h"
#include "cassnat/model/model.h"

namespace cassnat::model {

struct LossTerms {
  Var total;                 // invalid when skipped
  double decoder = 0.0;      // label-smoothed CE, summed over positions
  double ctc = 0.0;          // CTC negative log-likelihood
  std::size_t tokens = 0;
  bool skipped = false;
  std::string reason;
  ctc::Alignment alignment;  // NAT only: the forced alignment used
};

// Training objective for one utterance.
//   encoder: ctc
//   nat:     CE(decode(extract(masks(viterbi(grid, Y)))), Y) + task_ratio * ctc
//   at:      CE(decode_at([sos] + Y), Y + [eos])           + task_ratio * ctc
// The NAT alignment is a hard latent taken from the current posteriors;
// pass `fixed_alignment` to reuse an earlier one instead. Utterances whose
// reference does not fit the encoder frames are skipped, not thrown.
LossTerms JointLoss(Tape& tape, const Model& model, const nn::Tensor& feats,
                    std::span<const int> tokens, const ForwardContext& ctx,
                    const ctc::Alignment* fixed_alignment = nullptr);

}  // namespace cassnat::model

#endif  // CASSNAT_MODEL_LOSS_H_
