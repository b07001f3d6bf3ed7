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

#include <cmath>
#include <vector>

#include "gtest/gtest.h"

#include "cassnat/common/error.h"
#include "cassnat/ctc/lattice.h"
#include "cassnat/model/loss.h"
#include "cassnat/model/model.h"
#include "cassnat/nn/checkpoint.h"
#include "oracles.h"

namespace cassnat::model {
namespace {

using nn::Tensor;

ModelConfig TinyConfig() {
  ModelConfig c;
  c.n_enc = 1;
  c.n_self = 1;
  c.n_mix = 1;
  c.n_at = 1;
  c.heads = 2;
  c.d_model = 8;
  c.d_ff = 12;
  c.vocab = 4;
  c.d_feat = 3;
  c.subsample = 2;
  c.dropout = 0.0;
  return c;
}

Tensor RandomFeats(Rng& rng, std::size_t frames, std::size_t width) {
  Tensor t = Tensor::Zeros(frames, width);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.Normal();
  return t;
}

std::vector<double> Row(const Tensor& t, std::size_t r) {
  auto s = t.row(r);
  return {s.begin(), s.end()};
}

TEST(EncoderTest, ShapesAndGrid) {
  ModelConfig cfg;
  Model m(ModelKind::kEncoder, cfg, 1);
  Rng rng(2);
  Tape tape(false);
  EncoderOutput enc = m.Encode(tape, RandomFeats(rng, 8, cfg.d_feat), {});
  EXPECT_EQ(enc.frames, 2u);
  EXPECT_EQ(tape.value(enc.hidden).shape(), (std::vector<std::size_t>{2, cfg.d_model}));
  EXPECT_EQ(enc.grid.frames(), 2u);
  EXPECT_EQ(enc.grid.vocab(), cfg.vocab + 1);
  for (std::size_t t = 0; t < 2; ++t) {
    double s = 0.0;
    for (double p : enc.grid.row(t)) s += p;
    EXPECT_LT(std::abs(s - 1.0), 1e-9);
  }
  EXPECT_THROW(m.Encode(tape, RandomFeats(rng, 3, cfg.d_feat), {}), Error);
}

TEST(EncoderTest, FrontendsAgreeOnShape) {
  ModelConfig stack;
  ModelConfig conv;
  conv.frontend = Frontend::kConv;
  conv.conv_channels = 4;
  Model a(ModelKind::kEncoder, stack, 3);
  Model b(ModelKind::kEncoder, conv, 3);
  Rng rng(4);
  for (std::size_t raw : {4u, 9u, 37u}) {
    Tensor f = RandomFeats(rng, raw, stack.d_feat);
    Tape tape(false);
    const auto sa = tape.value(a.Encode(tape, f, {}).hidden).shape();
    const auto sb = tape.value(b.Encode(tape, f, {}).hidden).shape();
    EXPECT_EQ(sa, sb);
    EXPECT_EQ(sa[0], (raw + 3) / 4);
  }
}

TEST(EncoderTest, PaddingNeverLeaksIntoValidFrames) {
  for (Frontend fe : {Frontend::kStackProject, Frontend::kConv}) {
    ModelConfig cfg;
    cfg.frontend = fe;
    cfg.conv_channels = 4;
    Model m(ModelKind::kEncoder, cfg, 5);
    Rng rng(6);
    Tensor f = RandomFeats(rng, 30, cfg.d_feat);
    Tensor padded = RandomFeats(rng, 41, cfg.d_feat);
    std::copy_n(f.data(), f.size(), padded.data());
    Tensor permuted = padded;
    // Swap two padding rows.
    for (std::size_t c = 0; c < cfg.d_feat; ++c)
      std::swap(permuted.at(33, c), permuted.at(40, c));
    Tape tape(false);
    const Tensor base = tape.value(m.Encode(tape, f, {}).ctc_logits);
    const Tensor p1 = tape.value(m.Encode(tape, padded, {}, 30).ctc_logits);
    const Tensor p2 = tape.value(m.Encode(tape, permuted, {}, 30).ctc_logits);
    for (std::size_t t = 0; t < base.rows(); ++t) {
      EXPECT_EQ(Row(p1, t), Row(base, t));
      EXPECT_EQ(Row(p2, t), Row(base, t));
    }
  }
}

// Encoder output with hidden states swapped for `hidden`.
EncoderOutput WithHidden(Tape& tape, const EncoderOutput& enc, const Tensor& hidden) {
  EncoderOutput out = enc;
  out.hidden = tape.Constant(hidden);
  return out;
}

TEST(ExtractorTest, OcclusionOutsideTriggerSpanIsExact) {
  ModelConfig cfg;
  Model m(ModelKind::kNat, cfg, 7);
  Rng rng(8);
  Tape tape(false);
  const EncoderOutput enc = m.Encode(tape, RandomFeats(rng, 40, cfg.d_feat), {});
  ASSERT_EQ(enc.frames, 10u);
  const std::vector<int> labels{0, 3, 3, 0, 5, 0, 0, 9, 0, 2};
  const auto masks = align::TriggerMasks(labels);
  const Tensor hidden = tape.value(enc.hidden);
  const Tensor base =
      tape.value(m.ExtractTokens(tape, m.PrepareNat(tape, enc), masks, {}));
  ASSERT_EQ(base.rows(), 4u);
  for (std::size_t u = 0; u < masks.token_count; ++u) {
    Tensor outside = hidden;
    Tensor inside = hidden;
    for (std::size_t t = 0; t < enc.frames; ++t) {
      for (std::size_t c = 0; c < cfg.d_model; ++c) {
        if (masks.masks.get(u, t)) {
          inside.at(t, c) += 0.5;
        } else {
          outside.at(t, c) = 0.0;
        }
      }
    }
    const EncoderOutput occluded = WithHidden(tape, enc, outside);
    const Tensor a =
        tape.value(m.ExtractTokens(tape, m.PrepareNat(tape, occluded), masks, {}));
    EXPECT_EQ(Row(a, u), Row(base, u)) << "token " << u;
    const EncoderOutput touched = WithHidden(tape, enc, inside);
    const Tensor b =
        tape.value(m.ExtractTokens(tape, m.PrepareNat(tape, touched), masks, {}));
    EXPECT_NE(Row(b, u), Row(base, u)) << "token " << u;
  }
}

TEST(ExtractorTest, RejectsMismatchedFrameCount) {
  ModelConfig cfg;
  Model m(ModelKind::kNat, cfg, 9);
  Rng rng(10);
  Tape tape(false);
  const EncoderOutput enc = m.Encode(tape, RandomFeats(rng, 16, cfg.d_feat), {});
  const auto masks = align::TriggerMasks(std::vector<int>{1, 0, 2});
  EXPECT_THROW(m.ExtractTokens(tape, m.PrepareNat(tape, enc), masks, {}), Error);
}

TEST(NatDecoderTest, OnePassIsBidirectional) {
  ModelConfig cfg;
  Model m(ModelKind::kNat, cfg, 11);
  Rng rng(12);
  Tape tape(false);
  const EncoderOutput enc = m.Encode(tape, RandomFeats(rng, 24, cfg.d_feat), {});
  const NatMemory mem = m.PrepareNat(tape, enc);
  Tensor emb = RandomFeats(rng, 5, cfg.d_model);
  const Tensor base = tape.value(m.DecodeNat(tape, tape.Constant(emb), mem, {}));
  EXPECT_EQ(base.shape(), (std::vector<std::size_t>{5, cfg.outputs()}));
  // Changing the last embedding moves the first position's logits.
  emb.at(4, 0) += 1.0;
  const Tensor moved = tape.value(m.DecodeNat(tape, tape.Constant(emb), mem, {}));
  EXPECT_NE(Row(moved, 0), Row(base, 0));
}

TEST(AtDecoderTest, PrefixCausality) {
  ModelConfig cfg;
  Model m(ModelKind::kAt, cfg, 13);
  Rng rng(14);
  Tape tape(false);
  const EncoderOutput enc = m.Encode(tape, RandomFeats(rng, 24, cfg.d_feat), {});
  const AtMemory mem = m.PrepareAt(tape, enc);
  const std::vector<int> longer{0, 5, 9, 2, 31};
  const Tensor full = tape.value(m.DecodeAt(tape, longer, mem, {}));
  for (std::size_t n = 1; n < longer.size(); ++n) {
    const Tensor part =
        tape.value(m.DecodeAt(tape, std::span<const int>(longer).first(n), mem, {}));
    for (std::size_t r = 0; r < n; ++r) EXPECT_EQ(Row(part, r), Row(full, r));
  }
  EXPECT_THROW(m.DecodeAt(tape, std::vector<int>{5}, mem, {}), Error);
}

TEST(AtDecoderTest, TeacherForcedScoreIsSumOfSteps) {
  ModelConfig cfg;
  Model m(ModelKind::kAt, cfg, 15);
  Rng rng(16);
  Tape tape(false);
  const EncoderOutput enc = m.Encode(tape, RandomFeats(rng, 24, cfg.d_feat), {});
  const AtMemory mem = m.PrepareAt(tape, enc);
  const std::vector<int> seq{0, 4, 4, 17};
  const Tensor lp = nn::SoftmaxRows(tape.value(m.DecodeAt(tape, seq, mem, {})));
  double forced = 0.0;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i)
    forced += std::log(lp.at(i, static_cast<std::size_t>(seq[i + 1])));
  double stepwise = 0.0;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const Tensor step = nn::SoftmaxRows(
        tape.value(m.DecodeAt(tape, std::span<const int>(seq).first(i + 1), mem, {})));
    stepwise += std::log(step.at(i, static_cast<std::size_t>(seq[i + 1])));
  }
  EXPECT_NEAR(forced, stepwise, 1e-12);
}

TEST(ModelTest, PretrainedEncoderLoadsIntoBothModels) {
  ModelConfig cfg;
  Model enc_only(ModelKind::kEncoder, cfg, 100);
  Rng rng(17);
  for (auto& p : enc_only.params().all())
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] += 0.01 * rng.Normal();
  const auto records = nn::Snapshot(enc_only.params());
  Model nat(ModelKind::kNat, cfg, 200);
  Model at(ModelKind::kAt, cfg, 300);
  EXPECT_EQ(nn::LoadInto(records, nat.params(), false, "encoder."), records.size());
  EXPECT_EQ(nn::LoadInto(records, at.params(), false, "encoder."), records.size());
  const Tensor f = RandomFeats(rng, 20, cfg.d_feat);
  Tape tape(false);
  const Tensor a = tape.value(enc_only.Encode(tape, f, {}).ctc_logits);
  EXPECT_EQ(tape.value(nat.Encode(tape, f, {}).ctc_logits).values(), a.values());
  EXPECT_EQ(tape.value(at.Encode(tape, f, {}).ctc_logits).values(), a.values());
}

TEST(ModelTest, SameSeedSameEncoderAcrossKinds) {
  ModelConfig cfg;
  Model a(ModelKind::kEncoder, cfg, 42);
  Model b(ModelKind::kNat, cfg, 42);
  for (const auto& p : a.params().all())
    EXPECT_EQ(b.params().Find(p.name)->value.values(), p.value.values());
}

TEST(ModelTest, KindGuardsAndConfig) {
  ModelConfig cfg;
  Model m(ModelKind::kEncoder, cfg, 1);
  Tape tape(false);
  Rng rng(18);
  const EncoderOutput enc = m.Encode(tape, RandomFeats(rng, 16, cfg.d_feat), {});
  EXPECT_THROW(m.PrepareNat(tape, enc), Error);
  EXPECT_THROW(m.PrepareAt(tape, enc), Error);
  cfg.heads = 3;
  EXPECT_THROW(Model(ModelKind::kNat, cfg, 1), Error);

  ModelConfig c2;
  c2.frontend = Frontend::kConv;
  c2.task_ratio = 0.3;
  c2.mask_mode = nn::MaskMode::kLiteral;
  KeyValueConfig kv;
  c2.ToConfig(kv);
  const ModelConfig back = ModelConfig::FromConfig(KeyValueConfig::Parse(kv.Serialize()));
  EXPECT_EQ(back.frontend, Frontend::kConv);
  EXPECT_EQ(back.task_ratio, 0.3);
  EXPECT_EQ(back.mask_mode, nn::MaskMode::kLiteral);
}

struct Batch {
  std::vector<Tensor> feats;
  std::vector<std::vector<int>> tokens;
};

Batch TwoUtterances(const ModelConfig& cfg) {
  Rng rng(19);
  Batch b;
  b.feats = {RandomFeats(rng, 14, cfg.d_feat), RandomFeats(rng, 11, cfg.d_feat)};
  b.tokens = {{1, 3, 2}, {4, 4}};
  return b;
}

double BatchLoss(Tape& tape, const Model& m, const Batch& b, bool backward) {
  double total = 0.0;
  std::vector<Var> parts;
  for (std::size_t i = 0; i < b.feats.size(); ++i) {
    LossTerms l = JointLoss(tape, m, b.feats[i], b.tokens[i], {});
    EXPECT_FALSE(l.skipped) << l.reason;
    parts.push_back(l.total);
  }
  Var sum = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) sum = tape.Add(sum, parts[i]);
  total = tape.value(sum)[0];
  if (backward) tape.Backward(sum);
  return total;
}

void CheckJointGradient(ModelKind kind) {
  ModelConfig cfg = TinyConfig();
  Model m(kind, cfg, 21);
  const Batch b = TwoUtterances(cfg);
  m.params().ZeroGrad();
  {
    Tape tape;
    BatchLoss(tape, m, b, true);
  }
  std::vector<std::pair<nn::Parameter*, std::size_t>> all;
  for (auto& p : m.params().all())
    for (std::size_t i = 0; i < p.value.size(); ++i) all.emplace_back(&p, i);
  Rng pick(22);
  for (int n = 0; n < 20; ++n) {
    auto [p, i] = all[pick.Index(all.size())];
    const double numeric = oracle::CentralDiff(
        p->value[i],
        [&] {
          Tape tape(false);
          return BatchLoss(tape, m, b, false);
        },
        1e-5);
    EXPECT_LT(oracle::RelErr(p->grad[i], numeric), 1e-4)
        << p->name << "[" << i << "] analytic " << p->grad[i] << " numeric " << numeric;
  }
}

TEST(JointLossTest, NatGradientMatchesFiniteDifferences) { CheckJointGradient(ModelKind::kNat); }
TEST(JointLossTest, AtGradientMatchesFiniteDifferences) { CheckJointGradient(ModelKind::kAt); }
TEST(JointLossTest, EncoderGradientMatchesFiniteDifferences) {
  CheckJointGradient(ModelKind::kEncoder);
}

TEST(JointLossTest, ZeroTaskRatioIsPureDecoderLoss) {
  ModelConfig cfg = TinyConfig();
  cfg.task_ratio = 0.0;
  Model m(ModelKind::kNat, cfg, 23);
  const Batch b = TwoUtterances(cfg);
  Tape tape(false);
  LossTerms l = JointLoss(tape, m, b.feats[0], b.tokens[0], {});
  EXPECT_EQ(tape.value(l.total)[0], l.decoder);
  EXPECT_GT(l.ctc, 0.0);
  EXPECT_EQ(align::Collapse(l.alignment.labels), b.tokens[0]);
}

double Norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

TEST(JointLossTest, LargeTaskRatioIsDominatedByCtc) {
  ModelConfig cfg = TinyConfig();
  const Batch b = TwoUtterances(cfg);
  auto encoder_grad = [&](double ratio, bool ctc_only) {
    ModelConfig c = cfg;
    c.task_ratio = ratio;
    Model m(ctc_only ? ModelKind::kEncoder : ModelKind::kNat, c, 24);
    m.params().ZeroGrad();
    Tape tape;
    LossTerms l = JointLoss(tape, m, b.feats[0], b.tokens[0], {});
    tape.Backward(l.total);
    std::vector<double> g;
    for (const auto& p : m.params().all())
      if (p.name.rfind("encoder.", 0) == 0) g.insert(g.end(), p.grad.values().begin(), p.grad.values().end());
    return g;
  };
  const auto ctc = encoder_grad(1.0, true);
  const auto big = encoder_grad(1e4, false);
  double dot = 0.0;
  for (std::size_t i = 0; i < ctc.size(); ++i) dot += ctc[i] * big[i];
  EXPECT_GT(dot / (Norm(ctc) * Norm(big)), 0.9999);
  EXPECT_NEAR(Norm(big) / Norm(ctc), 1e4, 1e4 * 1e-2);
}

TEST(JointLossTest, InfeasibleUtteranceIsSkipped) {
  ModelConfig cfg = TinyConfig();
  Model m(ModelKind::kNat, cfg, 25);
  Rng rng(26);
  Tape tape;
  LossTerms l = JointLoss(tape, m, RandomFeats(rng, 4, cfg.d_feat), std::vector<int>{1, 2, 3},
                          {});
  EXPECT_TRUE(l.skipped);
  EXPECT_FALSE(l.total.valid());
  EXPECT_THROW(JointLoss(tape, m, RandomFeats(rng, 8, cfg.d_feat), std::vector<int>{7}, {}),
               Error);
}

TEST(ModelConfigTest, MaskModeAndDropoutComeFromConfig) {
  ModelConfig cfg = TinyConfig();
  Rng rng(27);
  const Tensor feats = RandomFeats(rng, 16, cfg.d_feat);
  const std::vector<int> tokens{1, 3, 2};
  auto loss = [&](const ModelConfig& c, bool train, std::uint64_t drop_seed) {
    Model m(ModelKind::kNat, c, 28);
    Rng drop(drop_seed);
    Tape tape(false);
    const LossTerms l = JointLoss(tape, m, feats, tokens, {.train = train, .rng = &drop});
    return tape.value(l.total)[0];
  };
  ModelConfig literal = cfg;
  literal.mask_mode = nn::MaskMode::kLiteral;
  EXPECT_NE(loss(cfg, false, 1), loss(literal, false, 1));

  ModelConfig dropped = cfg;
  dropped.dropout = 0.3;
  EXPECT_EQ(loss(cfg, true, 1), loss(cfg, false, 1));
  EXPECT_EQ(loss(dropped, false, 1), loss(cfg, false, 1));
  EXPECT_NE(loss(dropped, true, 1), loss(dropped, false, 1));
  EXPECT_EQ(loss(dropped, true, 1), loss(dropped, true, 1));
  EXPECT_NE(loss(dropped, true, 1), loss(dropped, true, 2));
}

}  // namespace
}  // namespace cassnat::model
