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

#include "cassnat/model/model.h"

#include <algorithm>
#include <numeric>

#include "cassnat/common/error.h"

namespace cassnat::model {

using nn::AttentionMask;
using nn::Tensor;

Block Block::Create(nn::ParameterSet& params, const std::string& name,
                    const ModelConfig& cfg, bool self, bool src, Rng& init) {
  Block b;
  b.has_self = self;
  b.has_src = src;
  if (self) {
    b.self_norm = nn::LayerNormLayer::Create(params, name + ".self_norm", cfg.d_model);
    b.self_attn = nn::MultiHeadAttention::Create(params, name + ".self_attn", cfg.d_model,
                                                 cfg.heads, init);
  }
  if (src) {
    b.src_norm = nn::LayerNormLayer::Create(params, name + ".src_norm", cfg.d_model);
    b.src_attn = nn::MultiHeadAttention::Create(params, name + ".src_attn", cfg.d_model,
                                                cfg.heads, init);
  }
  b.ff_norm = nn::LayerNormLayer::Create(params, name + ".ff_norm", cfg.d_model);
  b.ff = nn::FeedForwardLayer::Create(params, name + ".ff", cfg.d_model, cfg.d_ff, init);
  return b;
}

Var Block::Forward(Tape& tape, Var x, const AttentionMask* self_mask,
                   const nn::ProjectedMemory* src, const AttentionMask* src_mask,
                   const ForwardContext& ctx) const {
  if (has_self) {
    Var h = self_norm.Forward(tape, x);
    x = tape.Add(x, ctx.Dropout(tape, self_attn.Forward(tape, h, h, *self_mask, ctx)));
  }
  if (has_src) {
    Var h = src_norm.Forward(tape, x);
    x = tape.Add(x, ctx.Dropout(tape, src_attn.Attend(tape, h, *src, *src_mask, ctx)));
  }
  Var h = ff_norm.Forward(tape, x);
  return tape.Add(x, ctx.Dropout(tape, ff.Forward(tape, h, ctx)));
}

Encoder Encoder::Create(nn::ParameterSet& params, const ModelConfig& cfg, Rng& init) {
  cfg.Validate();
  Encoder e;
  e.cfg_ = cfg;
  if (cfg.frontend == Frontend::kStackProject) {
    e.stack_proj_ = nn::LinearLayer::Create(params, "encoder.frontend.proj",
                                            cfg.subsample * cfg.d_feat, cfg.d_model, init);
  } else {
    const std::size_t c = cfg.conv_channels;
    auto kernel = [&](const std::string& name, std::size_t in) {
      nn::Parameter& k = params.Create(name, {c, in, 3, 3});
      const double bound = std::sqrt(6.0 / static_cast<double>(9 * (in + c)));
      for (std::size_t i = 0; i < k.value.size(); ++i) k.value[i] = init.Uniform(-bound, bound);
      return &k;
    };
    e.conv1_kernel_ = kernel("encoder.frontend.conv1.kernel", 1);
    e.conv1_bias_ = &params.Create("encoder.frontend.conv1.bias", {c});
    e.conv2_kernel_ = kernel("encoder.frontend.conv2.kernel", c);
    e.conv2_bias_ = &params.Create("encoder.frontend.conv2.bias", {c});
    const std::size_t width = (((cfg.d_feat + 1) / 2) + 1) / 2;
    e.conv_proj_ = nn::LinearLayer::Create(params, "encoder.frontend.proj", c * width,
                                           cfg.d_model, init);
  }
  for (std::size_t i = 0; i < cfg.n_enc; ++i)
    e.blocks_.push_back(Block::Create(params, "encoder.block" + std::to_string(i), cfg, true,
                                      false, init));
  e.final_norm_ = nn::LayerNormLayer::Create(params, "encoder.final_norm", cfg.d_model);
  e.ctc_proj_ = nn::LinearLayer::Create(params, "encoder.ctc", cfg.d_model, cfg.outputs(), init);
  return e;
}

Var Encoder::RunFrontend(Tape& tape, const Tensor& feats, std::size_t valid_raw) const {
  const std::size_t raw = feats.rows(), d = cfg_.d_feat;
  if (cfg_.frontend == Frontend::kStackProject) {
    const std::size_t frames = cfg_.EncoderFrames(raw), k = cfg_.subsample;
    Tensor stacked = Tensor::Zeros(frames, k * d);
    for (std::size_t t = 0; t < std::min(raw, valid_raw); ++t)
      std::copy_n(feats.data() + t * d, d, stacked.data() + (t / k) * k * d + (t % k) * d);
    return stack_proj_.Forward(tape, tape.Constant(std::move(stacked)));
  }
  // Convolve the valid frames only; padded outputs would otherwise see bias.
  const std::size_t valid = std::min(raw, valid_raw);
  Tensor image({1, valid, d});
  std::copy_n(feats.data(), valid * d, image.data());
  Var x = tape.Constant(std::move(image));
  x = tape.Relu(tape.Conv2dStride2(x, tape.Leaf(*conv1_kernel_), tape.Leaf(*conv1_bias_)));
  x = tape.Relu(tape.Conv2dStride2(x, tape.Leaf(*conv2_kernel_), tape.Leaf(*conv2_bias_)));
  return tape.PadRows(conv_proj_.Forward(tape, tape.ChannelsToRows(x)),
                      cfg_.EncoderFrames(raw));
}

EncoderOutput Encoder::Forward(Tape& tape, const Tensor& feats, const ForwardContext& ctx,
                               std::size_t valid_raw) const {
  CASSNAT_CHECK(feats.ndim() == 2 && feats.cols() == cfg_.d_feat, ErrorKind::kShape,
                "encoder input must be frames x " + std::to_string(cfg_.d_feat));
  valid_raw = std::min(valid_raw, feats.rows());
  CASSNAT_CHECK(valid_raw >= cfg_.subsample, ErrorKind::kInfeasible,
                "input of " + std::to_string(valid_raw) + " frames is shorter than the " +
                    std::to_string(cfg_.subsample) + "x subsampling");
  EncoderOutput out;
  out.frames = cfg_.EncoderFrames(feats.rows());
  out.valid_frames = cfg_.EncoderFrames(valid_raw);

  Var x = RunFrontend(tape, feats, valid_raw);
  x = tape.Add(x, tape.Constant(nn::SinusoidalPositionalEncoding(out.frames, cfg_.d_model)));
  x = ctx.Dropout(tape, x);
  const AttentionMask mask = out.KeyMask(out.frames);
  for (const Block& b : blocks_) x = b.Forward(tape, x, &mask, nullptr, nullptr, ctx);
  out.hidden = final_norm_.Forward(tape, x);
  out.ctc_logits = ctc_proj_.Forward(tape, out.hidden);

  const Tensor& logits = tape.value(out.ctc_logits);
  const std::size_t v = cfg_.outputs();
  Tensor valid({out.valid_frames, v},
               std::vector<double>(logits.data(), logits.data() + out.valid_frames * v));
  out.grid = ctc::PosteriorGrid::FromLogits(valid);
  return out;
}

TokenExtractor TokenExtractor::Create(nn::ParameterSet& params, const ModelConfig& cfg,
                                      Rng& init) {
  TokenExtractor e;
  e.query_norm = nn::LayerNormLayer::Create(params, "extractor.query_norm", cfg.d_model);
  e.attn = nn::MultiHeadAttention::Create(params, "extractor.attn", cfg.d_model, cfg.heads,
                                          init);
  e.ff_norm = nn::LayerNormLayer::Create(params, "extractor.ff_norm", cfg.d_model);
  e.ff = nn::FeedForwardLayer::Create(params, "extractor.ff", cfg.d_model, cfg.d_ff, init);
  return e;
}

Var TokenExtractor::Forward(Tape& tape, const NatMemory& memory,
                            const align::TriggerMaskSet& masks,
                            const ForwardContext& ctx) const {
  CASSNAT_CHECK(masks.token_count >= 1, ErrorKind::kInfeasible, "no tokens triggered");
  CASSNAT_CHECK(masks.frame_count == memory.valid_frames, ErrorKind::kShape,
                "trigger masks cover " + std::to_string(masks.frame_count) +
                    " frames, encoder has " + std::to_string(memory.valid_frames));
  const AttentionMask mask = masks.masks.PaddedTo(memory.frames);
  Var pe = tape.Constant(nn::SinusoidalPositionalEncoding(masks.token_count, attn.width));
  Var x = tape.Add(pe, ctx.Dropout(tape, attn.Attend(tape, query_norm.Forward(tape, pe),
                                                     memory.extractor, mask, ctx)));
  return tape.Add(x, ctx.Dropout(tape, ff.Forward(tape, ff_norm.Forward(tape, x), ctx)));
}

NatDecoder NatDecoder::Create(nn::ParameterSet& params, const ModelConfig& cfg, Rng& init) {
  NatDecoder d;
  for (std::size_t i = 0; i < cfg.n_self; ++i)
    d.self_blocks.push_back(
        Block::Create(params, "decoder.self" + std::to_string(i), cfg, true, false, init));
  for (std::size_t i = 0; i < cfg.n_mix; ++i)
    d.mix_blocks.push_back(
        Block::Create(params, "decoder.mix" + std::to_string(i), cfg, true, true, init));
  d.final_norm = nn::LayerNormLayer::Create(params, "decoder.final_norm", cfg.d_model);
  d.output = nn::LinearLayer::Create(params, "decoder.output", cfg.d_model, cfg.outputs(), init);
  return d;
}

Var NatDecoder::Forward(Tape& tape, Var x, const NatMemory& memory,
                        const ForwardContext& ctx) const {
  const std::size_t n = tape.value(x).rows();
  const AttentionMask full = AttentionMask::Full(n, n);
  const AttentionMask src = AttentionMask::Prefix(n, memory.frames, memory.valid_frames);
  for (const Block& b : self_blocks) x = b.Forward(tape, x, &full, nullptr, nullptr, ctx);
  for (std::size_t i = 0; i < mix_blocks.size(); ++i)
    x = mix_blocks[i].Forward(tape, x, &full, &memory.mix[i], &src, ctx);
  return output.Forward(tape, final_norm.Forward(tape, x));
}

AtDecoder AtDecoder::Create(nn::ParameterSet& params, const ModelConfig& cfg, Rng& init) {
  AtDecoder d;
  d.embedding = &params.Create("at_decoder.embedding", {cfg.outputs(), cfg.d_model});
  nn::XavierUniform(d.embedding->value, init);
  for (std::size_t i = 0; i < cfg.n_at; ++i)
    d.blocks.push_back(
        Block::Create(params, "at_decoder.block" + std::to_string(i), cfg, true, true, init));
  d.final_norm = nn::LayerNormLayer::Create(params, "at_decoder.final_norm", cfg.d_model);
  d.output =
      nn::LinearLayer::Create(params, "at_decoder.output", cfg.d_model, cfg.outputs(), init);
  return d;
}

Var AtDecoder::Forward(Tape& tape, std::span<const int> inputs, const AtMemory& memory,
                       const ForwardContext& ctx) const {
  CASSNAT_CHECK(!inputs.empty() && inputs[0] == kSos, ErrorKind::kUsage,
                "AT decoder input must start with the start symbol");
  const std::size_t n = inputs.size(), d = embedding->value.cols();
  Var x = tape.Gather(tape.Leaf(*embedding), inputs);
  x = tape.Add(tape.Scale(x, std::sqrt(static_cast<double>(d))),
               tape.Constant(nn::SinusoidalPositionalEncoding(n, d)));
  x = ctx.Dropout(tape, x);
  const AttentionMask causal = AttentionMask::Causal(n);
  const AttentionMask src = AttentionMask::Prefix(n, memory.frames, memory.valid_frames);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    x = blocks[i].Forward(tape, x, &causal, &memory.blocks[i], &src, ctx);
  return output.Forward(tape, final_norm.Forward(tape, x));
}

ModelKind ParseModelKind(const std::string& s) {
  if (s == "encoder") return ModelKind::kEncoder;
  if (s == "nat") return ModelKind::kNat;
  if (s == "at") return ModelKind::kAt;
  Fail(ErrorKind::kUsage, "unknown model kind: " + s);
}

std::string ToString(ModelKind k) {
  switch (k) {
    case ModelKind::kEncoder: return "encoder";
    case ModelKind::kNat: return "nat";
    case ModelKind::kAt: return "at";
  }
  return "?";
}

Model::Model(ModelKind kind, const ModelConfig& cfg, std::uint64_t seed)
    : kind_(kind), cfg_(cfg) {
  cfg_.Validate();
  Rng init(seed);
  encoder_ = Encoder::Create(params_, cfg_, init);
  if (kind_ == ModelKind::kNat) {
    extractor_ = TokenExtractor::Create(params_, cfg_, init);
    nat_ = NatDecoder::Create(params_, cfg_, init);
  } else if (kind_ == ModelKind::kAt) {
    at_ = AtDecoder::Create(params_, cfg_, init);
  }
}

void Model::RequireKind(ModelKind k, const char* op) const {
  CASSNAT_CHECK(kind_ == k, ErrorKind::kUsage,
                std::string(op) + " needs a " + ToString(k) + " model, got " + ToString(kind_));
}

NatMemory Model::PrepareNat(Tape& tape, const EncoderOutput& enc) const {
  RequireKind(ModelKind::kNat, "PrepareNat");
  NatMemory m;
  m.frames = enc.frames;
  m.valid_frames = enc.valid_frames;
  m.extractor = extractor_.attn.Project(tape, enc.hidden);
  for (const Block& b : nat_.mix_blocks) m.mix.push_back(b.src_attn.Project(tape, enc.hidden));
  return m;
}

Var Model::ExtractTokens(Tape& tape, const NatMemory& memory,
                         const align::TriggerMaskSet& masks, const ForwardContext& ctx) const {
  RequireKind(ModelKind::kNat, "ExtractTokens");
  return extractor_.Forward(tape, memory, masks, Resolve(ctx));
}

Var Model::DecodeNat(Tape& tape, Var token_embeddings, const NatMemory& memory,
                     const ForwardContext& ctx) const {
  RequireKind(ModelKind::kNat, "DecodeNat");
  return nat_.Forward(tape, token_embeddings, memory, Resolve(ctx));
}

AtMemory Model::PrepareAt(Tape& tape, const EncoderOutput& enc) const {
  RequireKind(ModelKind::kAt, "PrepareAt");
  AtMemory m;
  m.frames = enc.frames;
  m.valid_frames = enc.valid_frames;
  for (const Block& b : at_.blocks) m.blocks.push_back(b.src_attn.Project(tape, enc.hidden));
  return m;
}

Var Model::DecodeAt(Tape& tape, std::span<const int> inputs, const AtMemory& memory,
                    const ForwardContext& ctx) const {
  RequireKind(ModelKind::kAt, "DecodeAt");
  return at_.Forward(tape, inputs, memory, Resolve(ctx));
}

}  // namespace cassnat::model
