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

#include <algorithm>
#include <functional>
#include <vector>

#include "gtest/gtest.h"

#include "cassnat/common/error.h"
#include "cassnat/data/corpus.h"
#include "cassnat/eval/decode.h"
#include "cassnat/eval/metrics.h"
#include "cassnat/eval/report.h"

namespace cassnat::eval {
namespace {

using model::Model;
using model::ModelConfig;
using model::ModelKind;

// Exhaustive edit distance by recursion.
std::size_t BruteDistance(std::span<const int> a, std::span<const int> b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  return std::min({BruteDistance(a.subspan(1), b.subspan(1)) + (a[0] != b[0]),
                   BruteDistance(a.subspan(1), b) + 1, BruteDistance(a, b.subspan(1)) + 1});
}

TEST(MetricsTest, DefinitionExamples) {
  const std::vector<int> ab{1, 2}, ac{1, 3}, a{1};
  EXPECT_EQ(Wer(ab, ab), 0.0);
  EXPECT_EQ(Mr(ab, ab), 0.0);
  EXPECT_EQ(Wer(ab, ac), 0.5);
  EXPECT_EQ(Mr(ab, ac), 0.0);
  EXPECT_EQ(Wer(a, ab), 0.5);
  EXPECT_EQ(Mr(a, ab), 0.5);
  EXPECT_THROW(Wer(ab, std::vector<int>{}), Error);
  EXPECT_THROW(Mr(ab, std::vector<int>{}), Error);
}

TEST(MetricsTest, BacktracePrefersSubstitution) {
  const EditCounts e = Levenshtein(std::vector<int>{1, 2}, std::vector<int>{3, 4});
  EXPECT_EQ(e.substitutions, 2u);
  EXPECT_EQ(e.mismatches(), 0u);
  const EditCounts f = Levenshtein(std::vector<int>{5, 1, 2}, std::vector<int>{1, 2});
  EXPECT_EQ(f.insertions, 1u);
  EXPECT_EQ(f.errors(), 1u);
}

TEST(MetricsTest, MatchesBruteForceDistance) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> h(rng.Index(6)), r(1 + rng.Index(6));
    for (int& x : h) x = static_cast<int>(1 + rng.Index(3));
    for (int& x : r) x = static_cast<int>(1 + rng.Index(3));
    const EditCounts e = Levenshtein(h, r);
    EXPECT_EQ(e.errors(), BruteDistance(h, r));
    EXPECT_EQ(static_cast<long>(e.deletions) - static_cast<long>(e.insertions),
              static_cast<long>(r.size()) - static_cast<long>(h.size()));
    EXPECT_EQ(e.ref_length, r.size());
  }
}

std::vector<Candidate> Cands(std::vector<double> align_logprobs) {
  std::vector<Candidate> out;
  for (double lp : align_logprobs) out.push_back(Candidate{{{1}, lp}, {1}, {0.0}, 0.0});
  return out;
}

TEST(RankTest, TieRules) {
  const auto one = Cands({-1.0});
  EXPECT_EQ(RankCandidates(std::vector<double>{-3.0}, one), 0u);
  const auto dup = Cands({-1.0, -1.0, -1.0});
  EXPECT_EQ(RankCandidates(std::vector<double>{-2.0, -2.0, -2.0}, dup), 0u);
  const auto mixed = Cands({-5.0, -1.0, -1.0});
  EXPECT_EQ(RankCandidates(std::vector<double>{-2.0, -2.0, -2.0}, mixed), 1u);
  EXPECT_EQ(RankCandidates(std::vector<double>{-2.0, -2.5, -1.5}, mixed), 2u);
  EXPECT_THROW(RankCandidates(std::vector<double>{}, std::vector<Candidate>{}), Error);
}

ModelConfig SmallModel() {
  ModelConfig c;
  c.n_enc = 1;
  c.n_self = 1;
  c.n_mix = 1;
  c.n_at = 1;
  c.heads = 2;
  c.d_model = 16;
  c.d_ff = 24;
  return c;
}

std::vector<data::Utterance> SmallSet(std::size_t n, std::uint64_t seed = 4) {
  data::CorpusSpec spec;
  spec.seed = seed;
  spec.len_min = 2;
  spec.len_max = 5;
  const auto src = data::MarkovSource::Build(spec);
  const auto means = data::EmissionMeans(spec);
  std::vector<data::Utterance> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(DeriveSeed(seed, "eval-test", i));
    out.push_back(data::RenderUtterance(spec, means, src, rng, "u" + std::to_string(i)));
  }
  return out;
}

DecodeOptions Mode(DecodeMode m, std::size_t samples = 50) {
  DecodeOptions o;
  o.mode = m;
  o.esa.samples = samples;
  return o;
}

TEST(DecoderTest, OracleLengthAlwaysMatchesReference) {
  Model nat(ModelKind::kNat, SmallModel(), 1);
  const Decoder dec(nat, Mode(DecodeMode::kOracle));
  for (const auto& u : SmallSet(20)) {
    const Hypothesis h = dec.Decode({&u.feats, u.tokens, u.id}).hyp;
    EXPECT_EQ(h.tokens.size(), u.tokens.size());
    EXPECT_EQ(align::Collapse(h.alignment.labels), u.tokens);
  }
  const auto u = SmallSet(1).front();
  EXPECT_THROW(dec.Decode({&u.feats, {}, u.id}), Error);
}

TEST(DecoderTest, SingleSampleEsaIsBpa) {
  Model nat(ModelKind::kNat, SmallModel(), 2);
  DecodeOptions esa = Mode(DecodeMode::kEsa, 1);
  esa.esa.threshold = 0.0;
  const Decoder a(nat, Mode(DecodeMode::kBpa)), b(nat, esa);
  for (const auto& u : SmallSet(20)) {
    const Hypothesis x = a.Decode({&u.feats, u.tokens, u.id}).hyp;
    const Hypothesis y = b.Decode({&u.feats, u.tokens, u.id}).hyp;
    EXPECT_EQ(x.tokens, y.tokens);
    EXPECT_EQ(x.alignment, y.alignment);
    EXPECT_EQ(x.rank_score, y.rank_score);
  }
}

TEST(DecoderTest, MoreSamplesNeverLowerSelfScore) {
  Model nat(ModelKind::kNat, SmallModel(), 3);
  const Decoder s10(nat, Mode(DecodeMode::kEsa, 10)), s50(nat, Mode(DecodeMode::kEsa, 50));
  for (const auto& u : SmallSet(20)) {
    const Hypothesis a = s10.Decode({&u.feats, u.tokens, u.id}).hyp;
    const Hypothesis b = s50.Decode({&u.feats, u.tokens, u.id}).hyp;
    EXPECT_GE(b.rank_score, a.rank_score);
    EXPECT_LE(a.candidates, 10u);
    EXPECT_GE(b.candidates, a.candidates);
  }
}

TEST(DecoderTest, AllBlankGridGivesFlaggedEmptyHypothesis) {
  Model nat(ModelKind::kNat, SmallModel(), 4);
  nat.params().Find("encoder.ctc.bias")->value[0] = 1e3;
  for (DecodeMode m : {DecodeMode::kBpa, DecodeMode::kBsa, DecodeMode::kEsa}) {
    const Decoder dec(nat, Mode(m));
    const auto u = SmallSet(1).front();
    const Hypothesis h = dec.Decode({&u.feats, u.tokens, u.id}).hyp;
    EXPECT_TRUE(h.empty);
    EXPECT_TRUE(h.tokens.empty());
  }
}

TEST(DecoderTest, KindAndRankerGuards) {
  Model nat(ModelKind::kNat, SmallModel(), 5);
  Model at(ModelKind::kAt, SmallModel(), 5);
  EXPECT_THROW(Decoder(at, Mode(DecodeMode::kBpa)), Error);
  EXPECT_THROW(Decoder(nat, Mode(DecodeMode::kAtGreedy)), Error);
  DecodeOptions o = Mode(DecodeMode::kEsa);
  o.ranker = Ranker::kAt;
  EXPECT_THROW(Decoder(nat, o), Error);
  EXPECT_NO_THROW(Decoder(nat, o, &at));
  EXPECT_THROW(ParseDecodeMode("greedy"), Error);
}

TEST(DecoderTest, AtRankerPicksHighestTeacherForcedScore) {
  Model nat(ModelKind::kNat, SmallModel(), 6);
  Model at(ModelKind::kAt, SmallModel(), 7);
  DecodeOptions o = Mode(DecodeMode::kEsa, 30);
  o.ranker = Ranker::kAt;
  const Decoder dec(nat, o, &at);
  for (const auto& u : SmallSet(10)) {
    const Hypothesis h = dec.Decode({&u.feats, u.tokens, u.id}).hyp;
    nn::Tape tape(false);
    const auto mem = at.PrepareAt(tape, at.Encode(tape, u.feats, {}));
    EXPECT_NEAR(h.rank_score, AtSequenceLogProb(at, tape, mem, h.tokens), 1e-12);
  }
}

TEST(DecoderTest, GreedyAtScoreEqualsTeacherForcedScore) {
  Model at(ModelKind::kAt, SmallModel(), 8);
  const Decoder dec(at, Mode(DecodeMode::kAtGreedy));
  for (const auto& u : SmallSet(10)) {
    const DecodeResult r = dec.Decode({&u.feats, u.tokens, u.id});
    nn::Tape tape(false);
    const auto enc = at.Encode(tape, u.feats, {});
    EXPECT_LE(r.hyp.tokens.size(), enc.valid_frames);
    if (r.hyp.tokens.size() == enc.valid_frames) continue;  // capped, no eos scored
    const auto mem = at.PrepareAt(tape, enc);
    EXPECT_NEAR(r.hyp.rank_score, AtSequenceLogProb(at, tape, mem, r.hyp.tokens), 1e-9);
  }
}

TEST(EvaluateTest, WorkerCountDoesNotChangeReport) {
  Model nat(ModelKind::kNat, SmallModel(), 9);
  const Decoder dec(nat, Mode(DecodeMode::kEsa, 20));
  const auto set = SmallSet(12);
  const EvalReport a = Evaluate(dec, set, 1), b = Evaluate(dec, set, 3);
  EXPECT_EQ(a.ToJson().dump(), b.ToJson().dump());
  EXPECT_EQ(FormatHypotheses(a), FormatHypotheses(b));
}

TEST(EvaluateTest, OracleHasNoLengthErrors) {
  Model nat(ModelKind::kNat, SmallModel(), 10);
  const EvalReport r = Evaluate(Decoder(nat, Mode(DecodeMode::kOracle)), SmallSet(15));
  EXPECT_EQ(*r.mr, 0.0);
  EXPECT_EQ(*r.lper, 0.0);
  ASSERT_EQ(r.histogram.size(), 1u);
  EXPECT_EQ(r.histogram[0].length_error, 0);
  EXPECT_EQ(r.histogram[0].utterances, 15u);
  EXPECT_NEAR(r.histogram[0].wer(), r.wer, 1e-15);
}

TEST(EvaluateTest, HistogramPartitionsUtterances) {
  Model nat(ModelKind::kNat, SmallModel(), 11);
  const EvalReport r = Evaluate(Decoder(nat, Mode(DecodeMode::kBpa)), SmallSet(25));
  std::size_t n = 0, mismatched = 0, errors = 0, ref = 0;
  for (const auto& b : r.histogram) {
    n += b.utterances;
    if (b.length_error != 0) mismatched += b.utterances;
    errors += b.edits.errors();
    ref += b.edits.ref_length;
  }
  EXPECT_EQ(n, 25u);
  EXPECT_NEAR(*r.lper, static_cast<double>(mismatched) / 25.0, 1e-15);
  EXPECT_NEAR(r.wer, static_cast<double>(errors) / static_cast<double>(ref), 1e-15);
  EXPECT_GE(*r.mr, 0.0);
  EXPECT_LE(*r.lper, 1.0);
  EXPECT_FALSE(r.rtf.has_value());
  const std::string table = FormatTable({r});
  EXPECT_NE(table.find("WER%"), std::string::npos);
  EXPECT_NE(table.find("bpa"), std::string::npos);
  EXPECT_EQ(r.HistogramCsv().rfind("length_error,utterances", 0), 0u);
}

TEST(EvaluateTest, AtReportHasNoAlignmentMetrics) {
  Model at(ModelKind::kAt, SmallModel(), 12);
  const EvalReport r = Evaluate(Decoder(at, Mode(DecodeMode::kAtGreedy)), SmallSet(5));
  EXPECT_FALSE(r.mr.has_value());
  EXPECT_FALSE(r.lper.has_value());
  EXPECT_TRUE(r.histogram.empty());
  EXPECT_TRUE(r.ToJson()["mr"].is_null());
}

TEST(EvaluateTest, RtfIsPositive) {
  Model nat(ModelKind::kNat, SmallModel(), 13);
  EXPECT_GT(MeasureRtf(Decoder(nat, Mode(DecodeMode::kBpa)), SmallSet(3)), 0.0);
}

}  // namespace
}  // namespace cassnat::eval
