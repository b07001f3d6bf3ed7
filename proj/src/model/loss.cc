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

#include "cassnat/model/loss.h"

#include <numeric>
#include <vector>

#include "cassnat/common/error.h"
#include "cassnat/ctc/lattice.h"

namespace cassnat::model {

LossTerms JointLoss(Tape& tape, const Model& model, const nn::Tensor& feats,
                    std::span<const int> tokens, const ForwardContext& ctx,
                    const ctc::Alignment* fixed_alignment) {
  const ModelConfig& cfg = model.config();
  LossTerms out;
  out.tokens = tokens.size();
  for (int y : tokens)
    CASSNAT_CHECK(y >= 1 && static_cast<std::size_t>(y) <= cfg.vocab, ErrorKind::kInfeasible,
                  "reference token " + std::to_string(y) + " outside 1.." +
                      std::to_string(cfg.vocab));
  const std::size_t frames = cfg.EncoderFrames(feats.rows());
  if (tokens.empty() || feats.rows() < cfg.subsample || !ctc::Feasible(frames, tokens)) {
    out.skipped = true;
    out.reason = "reference of " + std::to_string(tokens.size()) + " tokens does not fit " +
                 std::to_string(frames) + " encoder frames";
    return out;
  }

  const EncoderOutput enc = model.Encode(tape, feats, ctx);
  Var ctc_loss = ctc::CtcLossOp(tape, enc.ctc_logits, tokens);
  out.ctc = tape.value(ctc_loss)[0];
  if (model.kind() == ModelKind::kEncoder) {
    out.total = ctc_loss;
    return out;
  }

  Var ce;
  if (model.kind() == ModelKind::kNat) {
    out.alignment = fixed_alignment ? *fixed_alignment : ctc::ViterbiAlign(enc.grid, tokens);
    const align::TriggerMaskSet masks =
        align::TriggerMasks(out.alignment.labels, {.extend_last = cfg.extend_last});
    const NatMemory memory = model.PrepareNat(tape, enc);
    Var emb = model.ExtractTokens(tape, memory, masks, ctx);
    Var logits = model.DecodeNat(tape, emb, memory, ctx);
    ce = tape.CrossEntropy(logits, tokens, cfg.label_smooth, nn::Reduction::kSum);
  } else {
    std::vector<int> inputs{AtDecoder::kSos};
    inputs.insert(inputs.end(), tokens.begin(), tokens.end());
    std::vector<int> targets(tokens.begin(), tokens.end());
    targets.push_back(AtDecoder::kEos);
    const AtMemory memory = model.PrepareAt(tape, enc);
    Var logits = model.DecodeAt(tape, inputs, memory, ctx);
    ce = tape.CrossEntropy(logits, targets, cfg.label_smooth, nn::Reduction::kSum);
  }
  out.decoder = tape.value(ce)[0];
  out.total = cfg.task_ratio == 0.0 ? ce : tape.AddScaled(ce, ctc_loss, cfg.task_ratio);
  return out;
}

}  // namespace cassnat::model
