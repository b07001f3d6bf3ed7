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

#ifndef CASSNAT_MODEL_MODEL_H_
#define CASSNAT_MODEL_MODEL_H_

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cassnat/align/alignment_map.h"
#include "cassnat/ctc/posterior_grid.h"
#include "cassnat/model/config.h"
#include "cassnat/nn/layers.h"

namespace cassnat::model {

using nn::ForwardContext;
using nn::Tape;
using nn::Var;

// Pre-norm residual block with optional self- and source-attention
// sublayers followed by a feed-forward sublayer.
struct Block {
  bool has_self = false;
  bool has_src = false;
  nn::LayerNormLayer self_norm, src_norm, ff_norm;
  nn::MultiHeadAttention self_attn, src_attn;
  nn::FeedForwardLayer ff;

  static Block Create(nn::ParameterSet& params, const std::string& name,
                      const ModelConfig& cfg, bool self, bool src, Rng& init);
  // `src` must come from src_attn.Project().
  Var Forward(Tape& tape, Var x, const nn::AttentionMask* self_mask,
              const nn::ProjectedMemory* src, const nn::AttentionMask* src_mask,
              const ForwardContext& ctx) const;
};

struct EncoderOutput {
  Var hidden;              // frames x d_model
  Var ctc_logits;          // frames x (V+1)
  ctc::PosteriorGrid grid; // softmax of the CTC head over the valid frames
  std::size_t frames = 0;
  std::size_t valid_frames = 0;

  // rows x frames mask admitting the valid frames only.
  nn::AttentionMask KeyMask(std::size_t rows) const {
    return nn::AttentionMask::Prefix(rows, frames, valid_frames);
  }
};

class Encoder {
 public:
  static Encoder Create(nn::ParameterSet& params, const ModelConfig& cfg, Rng& init);

  // feats: raw_frames x d_feat. Rows from `valid_raw` on are padding and
  // never influence the valid outputs.
  EncoderOutput Forward(Tape& tape, const nn::Tensor& feats, const ForwardContext& ctx,
                        std::size_t valid_raw = std::numeric_limits<std::size_t>::max()) const;

 private:
  Var RunFrontend(Tape& tape, const nn::Tensor& feats, std::size_t valid_raw) const;

  ModelConfig cfg_;
  nn::LinearLayer stack_proj_;
  nn::Parameter* conv1_kernel_ = nullptr;
  nn::Parameter* conv1_bias_ = nullptr;
  nn::Parameter* conv2_kernel_ = nullptr;
  nn::Parameter* conv2_bias_ = nullptr;
  nn::LinearLayer conv_proj_;
  std::vector<Block> blocks_;
  nn::LayerNormLayer final_norm_;
  nn::LinearLayer ctc_proj_;
};

// Source-attention projections of one encoder output for the NAT path,
// shared by every candidate alignment of the utterance.
struct NatMemory {
  nn::ProjectedMemory extractor;
  std::vector<nn::ProjectedMemory> mix;
  std::size_t frames = 0;
  std::size_t valid_frames = 0;
};

// One-layer source attention from positional queries to encoder frames,
// restricted per token by the trigger mask, plus a feed-forward sublayer.
struct TokenExtractor {
  nn::LayerNormLayer query_norm, ff_norm;
  nn::MultiHeadAttention attn;
  nn::FeedForwardLayer ff;

  static TokenExtractor Create(nn::ParameterSet& params, const ModelConfig& cfg, Rng& init);
  Var Forward(Tape& tape, const NatMemory& memory, const align::TriggerMaskSet& masks,
              const ForwardContext& ctx) const;
};

struct NatDecoder {
  std::vector<Block> self_blocks;
  std::vector<Block> mix_blocks;
  nn::LayerNormLayer final_norm;
  nn::LinearLayer output;

  static NatDecoder Create(nn::ParameterSet& params, const ModelConfig& cfg, Rng& init);
  // All positions in one pass; no mask between positions.
  Var Forward(Tape& tape, Var token_embeddings, const NatMemory& memory,
              const ForwardContext& ctx) const;
};

struct AtMemory {
  std::vector<nn::ProjectedMemory> blocks;
  std::size_t frames = 0;
  std::size_t valid_frames = 0;
};

// Autoregressive baseline. Input ids start with kSos; position i predicts
// token i + 1 and never sees later inputs.
struct AtDecoder {
  static constexpr int kSos = 0;
  static constexpr int kEos = 0;

  nn::Parameter* embedding = nullptr;  // (V+1) x d_model
  std::vector<Block> blocks;
  nn::LayerNormLayer final_norm;
  nn::LinearLayer output;

  static AtDecoder Create(nn::ParameterSet& params, const ModelConfig& cfg, Rng& init);
  Var Forward(Tape& tape, std::span<const int> inputs, const AtMemory& memory,
              const ForwardContext& ctx) const;
};

enum class ModelKind { kEncoder, kNat, kAt };
ModelKind ParseModelKind(const std::string& s);
std::string ToString(ModelKind k);

// Parameters live under "encoder.", "extractor.", "decoder." (NAT) and
// "at_decoder." (AT). Encoder parameters are created first from the same
// seed for every kind, so a pretrained encoder loads into either model.
class Model {
 public:
  Model(ModelKind kind, const ModelConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return cfg_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  // Forward calls take train/rng from `ctx`; the dropout rate and mask
  // mode always come from the model config.
  EncoderOutput Encode(Tape& tape, const nn::Tensor& feats, const ForwardContext& ctx,
                       std::size_t valid_raw = std::numeric_limits<std::size_t>::max()) const {
    return encoder_.Forward(tape, feats, Resolve(ctx), valid_raw);
  }

  NatMemory PrepareNat(Tape& tape, const EncoderOutput& enc) const;
  Var ExtractTokens(Tape& tape, const NatMemory& memory, const align::TriggerMaskSet& masks,
                    const ForwardContext& ctx) const;
  Var DecodeNat(Tape& tape, Var token_embeddings, const NatMemory& memory,
                const ForwardContext& ctx) const;

  AtMemory PrepareAt(Tape& tape, const EncoderOutput& enc) const;
  // Logits for every input position (teacher forcing); the last row is
  // the next-token distribution after `inputs`.
  Var DecodeAt(Tape& tape, std::span<const int> inputs, const AtMemory& memory,
               const ForwardContext& ctx) const;

 private:
  void RequireKind(ModelKind k, const char* op) const;
  ForwardContext Resolve(ForwardContext ctx) const {
    ctx.dropout = cfg_.dropout;
    ctx.mask_mode = cfg_.mask_mode;
    return ctx;
  }

  ModelKind kind_;
  ModelConfig cfg_;
  nn::ParameterSet params_;
  Encoder encoder_;
  TokenExtractor extractor_;
  NatDecoder nat_;
  AtDecoder at_;
};

}  // namespace cassnat::model

#endif  // CASSNAT_MODEL_MODEL_H_
