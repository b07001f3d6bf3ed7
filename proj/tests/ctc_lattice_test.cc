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
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include "gtest/gtest.h"

#include "cassnat/align/alignment_map.h"
#include "cassnat/common/error.h"
#include "cassnat/ctc/lattice.h"
#include "fixtures.h"
#include "oracles.h"

namespace cassnat::ctc {
namespace {

struct Instance {
  nn::Tensor probs;
  std::vector<int> ref;
};

// Random feasible instance with T' <= 8, |Y| <= 3, V <= 4.
Instance RandomInstance(Rng& rng) {
  while (true) {
    const std::size_t frames = 1 + rng.Index(8);
    const std::size_t vocab = 2 + rng.Index(4);
    std::vector<int> ref(1 + rng.Index(3));
    for (int& y : ref) y = 1 + static_cast<int>(rng.Index(vocab - 1));
    if (!Feasible(frames, ref)) continue;
    return {oracle::RandomProbs(rng, frames, vocab), ref};
  }
}

ErrorKind KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::kState;
}

TEST(PosteriorGridTest, RejectsRowsThatAreNotDistributions) {
  EXPECT_THROW(PosteriorGrid(1, 2, {0.5, 0.6}), Error);
  EXPECT_THROW(PosteriorGrid(1, 2, {1.2, -0.2}), Error);
  EXPECT_THROW(PosteriorGrid(2, 2, {0.5, 0.5}), Error);
}

TEST(PosteriorGridTest, FloorsZeroEntries) {
  PosteriorGrid g(1, 2, {1.0, 0.0});
  EXPECT_EQ(g.log_prob(0, 1), std::log(kProbFloor));
  EXPECT_TRUE(std::isfinite(g.log_prob(0, 1)));
}

TEST(PosteriorGridTest, FromLogitsRowsSumToOne) {
  Rng rng(2);
  nn::Tensor logits = nn::Tensor::Zeros(4, 6);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = 5.0 * rng.Normal();
  PosteriorGrid g = PosteriorGrid::FromLogits(logits);
  for (std::size_t t = 0; t < 4; ++t) {
    double s = 0.0;
    for (double p : g.row(t)) s += p;
    EXPECT_LT(std::abs(s - 1.0), 1e-9);
  }
}

TEST(PosteriorGridTest, TopTwoTiesGoToLowerId) {
  PosteriorGrid g(1, 4, {0.1, 0.3, 0.3, 0.3});
  EXPECT_EQ(g.Top1(0), 1);
  EXPECT_EQ(g.Top2(0), 2);
}

TEST(PosteriorGridTest, DumpAndSaveLoad) {
  const PosteriorGrid g = fixture::CatsGrid();
  const std::string dump = DumpGrid(g);
  EXPECT_EQ(dump.substr(0, dump.find('\n')), "0 1 0.9000");
  const auto path = std::filesystem::temp_directory_path() / "cassnat_grid_test.feats";
  SaveGrid(path.string(), g);
  const PosteriorGrid back = LoadGrid(path.string());
  ASSERT_EQ(back.frames(), 9u);
  ASSERT_EQ(back.vocab(), 5u);
  for (std::size_t t = 0; t < 9; ++t)
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(back.prob(t, k), g.prob(t, k), 1e-6);
  std::filesystem::remove(path);
  EXPECT_EQ(FormatLabels(fixture::kCatLabels), "_ 1 1 _ 2 _ _ 3 _");
}

TEST(CtcLossTest, SingleFrameIsNegativeLogOfThatEntry) {
  PosteriorGrid g(1, 3, {0.2, 0.7, 0.1});
  EXPECT_NEAR(CtcLoss(g, std::vector<int>{1}), -std::log(0.7), 1e-15);
}

TEST(CtcLossTest, ThreeFramesUniformBinaryByHand) {
  // Of the 8 paths over {_, a}, six collapse to "a": a__, _a_, __a, aa_,
  // _aa, aaa.
  PosteriorGrid g(3, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  EXPECT_NEAR(CtcLoss(g, std::vector<int>{1}), -std::log(6.0 / 8.0), 1e-12);
}

TEST(CtcLossTest, MatchesEnumerationOnRandomInstances) {
  Rng rng(101);
  for (int i = 0; i < 200; ++i) {
    Instance in = RandomInstance(rng);
    const double want = oracle::BruteCtcNll(in.probs, in.ref);
    const double got = CtcLoss(PosteriorGrid::FromProbs(in.probs), in.ref);
    EXPECT_NEAR(got, want, 1e-6) << "instance " << i;
  }
}

TEST(CtcLossTest, InfeasibleReferenceIsAnError) {
  PosteriorGrid g(2, 3, {0.3, 0.3, 0.4, 0.3, 0.3, 0.4});
  EXPECT_EQ(KindOf([&] { CtcLoss(g, std::vector<int>{1, 2, 1}); }), ErrorKind::kInfeasible);
  EXPECT_EQ(KindOf([&] { CtcLoss(g, std::vector<int>{1, 1}); }), ErrorKind::kInfeasible);
  EXPECT_EQ(KindOf([&] { CtcLoss(g, std::vector<int>{}); }), ErrorKind::kInfeasible);
  EXPECT_EQ(KindOf([&] { CtcLoss(g, std::vector<int>{3}); }), ErrorKind::kInfeasible);
  EXPECT_EQ(MinFramesFor(std::vector<int>{1, 1, 2, 2}), 6u);
}

TEST(CtcLossTest, SumDominatesBestPath) {
  Rng rng(102);
  for (int i = 0; i < 200; ++i) {
    Instance in = RandomInstance(rng);
    PosteriorGrid g = PosteriorGrid::FromProbs(in.probs);
    EXPECT_GE(-CtcLoss(g, in.ref), ViterbiAlign(g, in.ref).logprob - 1e-12);
  }
}

TEST(CtcLossTest, GradientMatchesFiniteDifferences) {
  Rng rng(103);
  nn::ParameterSet ps;
  nn::Parameter& logits = ps.Create("logits", {6, 4});
  for (std::size_t i = 0; i < logits.value.size(); ++i) logits.value[i] = rng.Normal();
  const std::vector<int> ref{2, 2, 3};
  {
    nn::Tape tape;
    tape.Backward(CtcLossOp(tape, tape.Leaf(logits), ref));
  }
  auto eval = [&] {
    nn::Tape tape(false);
    return tape.value(CtcLossOp(tape, tape.Leaf(logits), ref))[0];
  };
  for (std::size_t i = 0; i < logits.value.size(); ++i)
    EXPECT_LT(oracle::RelErr(logits.grad[i], oracle::CentralDiff(logits.value[i], eval)),
              1e-4);
}

TEST(ViterbiTest, PeakedGridOfExactLengthReturnsReference) {
  const std::vector<int> ref{2, 1, 3};
  std::vector<double> probs;
  for (int y : ref)
    for (int k = 0; k < 4; ++k) probs.push_back(k == y ? 0.97 : 0.01);
  Alignment a = ViterbiAlign(PosteriorGrid(3, 4, probs), ref);
  EXPECT_EQ(a.labels, ref);
}

TEST(ViterbiTest, MatchesBruteForceScoreAndPath) {
  Rng rng(104);
  for (int i = 0; i < 200; ++i) {
    Instance in = RandomInstance(rng);
    const auto want = oracle::BruteViterbi(in.probs, in.ref);
    const Alignment got = ViterbiAlign(PosteriorGrid::FromProbs(in.probs), in.ref);
    EXPECT_EQ(got.labels, want.path) << "instance " << i;
    EXPECT_NEAR(got.logprob, want.logprob, 1e-9);
  }
}

TEST(ViterbiTest, TieRuleMatchesOracleOnUniformGrids) {
  // Every path scores the same, so the tie rule alone decides.
  for (std::size_t frames = 1; frames <= 7; ++frames) {
    for (const std::vector<int>& ref :
         {std::vector<int>{1}, std::vector<int>{1, 2}, std::vector<int>{1, 1},
          std::vector<int>{2, 1, 2}}) {
      if (!Feasible(frames, ref)) continue;
      nn::Tensor probs({frames, 3}, std::vector<double>(frames * 3, 1.0 / 3.0));
      const auto want = oracle::BruteViterbi(probs, ref);
      const Alignment got = ViterbiAlign(PosteriorGrid::FromProbs(probs), ref);
      EXPECT_EQ(got.labels, want.path) << frames << " frames";
    }
  }
}

TEST(ViterbiTest, CollapseRecoversReferenceAndLengthMatches) {
  Rng rng(105);
  for (int i = 0; i < 300; ++i) {
    const std::size_t frames = 1 + rng.Index(40);
    const std::size_t vocab = 2 + rng.Index(10);
    std::vector<int> ref(1 + rng.Index(12));
    for (int& y : ref) y = 1 + static_cast<int>(rng.Index(vocab - 1));
    if (!Feasible(frames, ref)) continue;
    PosteriorGrid g = PosteriorGrid::FromProbs(oracle::RandomProbs(rng, frames, vocab));
    const Alignment a = ViterbiAlign(g, ref);
    ASSERT_EQ(a.labels.size(), frames);
    EXPECT_EQ(align::Collapse(a.labels), ref);
    EXPECT_EQ(align::TriggerMasks(a.labels).token_count, ref.size());
    EXPECT_DOUBLE_EQ(a.logprob, AlignmentLogProb(g, a.labels));
  }
}

TEST(BestPathTest, WorkedExampleGrid) {
  const Alignment a = BestPathAlign(fixture::CatsGrid());
  using namespace fixture;
  EXPECT_EQ(a.labels, (std::vector<int>{kC, kC, 0, kA, 0, kT, kT, 0, kS}));
  EXPECT_EQ(align::PredictedLength(a.labels), 4u);
}

TEST(BestPathTest, OneHotRowsAndTies) {
  PosteriorGrid one_hot(3, 3, {0, 1, 0, 1, 0, 0, 0, 0, 1});
  EXPECT_EQ(BestPathAlign(one_hot).labels, (std::vector<int>{1, 0, 2}));
  PosteriorGrid tied(1, 3, {0.25, 0.375, 0.375});
  EXPECT_EQ(BestPathAlign(tied).labels, (std::vector<int>{1}));
}

TEST(BestPathTest, CollapsedLengthBound) {
  Rng rng(106);
  for (int i = 0; i < 200; ++i) {
    const std::size_t frames = 1 + rng.Index(30);
    PosteriorGrid g = PosteriorGrid::FromProbs(oracle::RandomProbs(rng, frames, 4));
    const Alignment a = BestPathAlign(g);
    EXPECT_LE(MinFramesFor(align::Collapse(a.labels)), frames);
  }
}

TEST(BeamSearchTest, BestPrefixMatchesExhaustiveSearch) {
  Rng rng(107);
  for (int i = 0; i < 150; ++i) {
    const std::size_t frames = 1 + rng.Index(7);
    const std::size_t vocab = 2 + rng.Index(3);
    nn::Tensor probs = oracle::RandomProbs(rng, frames, vocab);
    const auto want = oracle::BruteBestPrefix(probs);
    const auto got = BeamSearchAlign(PosteriorGrid::FromProbs(probs), 100000);
    EXPECT_EQ(got.prefix, want.prefix) << "instance " << i;
    EXPECT_NEAR(got.prefix_logprob, want.logprob, 1e-9);
    EXPECT_EQ(align::Collapse(got.alignment.labels), got.prefix);
    EXPECT_NEAR(got.alignment.logprob, want.best_path_logprob, 1e-9);
  }
}

TEST(BeamSearchTest, WidthOneEqualsBestPathWhenCollapsesAgree) {
  const PosteriorGrid g = fixture::CatsGrid();
  const Alignment bpa = BestPathAlign(g);
  const auto bsa = BeamSearchAlign(g, 1);
  ASSERT_EQ(bsa.prefix, align::Collapse(bpa.labels));
  EXPECT_EQ(bsa.alignment.labels, bpa.labels);
}

// Width monotonicity does not hold for prefix search in general (a wider
// beam can prune the narrow winner's ancestors). What does hold: every
// width scores at most the exact best prefix, and a width covering every
// prefix reaches it.
TEST(BeamSearchTest, ScoreBoundedByExactAndReachedWhenWide) {
  Rng rng(108);
  for (int i = 0; i < 100; ++i) {
    nn::Tensor probs = oracle::RandomProbs(rng, 1 + rng.Index(6), 3);
    PosteriorGrid g = PosteriorGrid::FromProbs(probs);
    const double exact = oracle::BruteBestPrefix(probs).logprob;
    for (std::size_t b : {1, 2, 4, 8}) {
      const auto r = BeamSearchAlign(g, b);
      EXPECT_LE(r.prefix_logprob, exact + 1e-9);
    }
    EXPECT_NEAR(BeamSearchAlign(g, 1 << 12).prefix_logprob, exact, 1e-9);
  }
}

TEST(BeamSearchTest, ScoreNeverExceedsTrueMassOfPrefix) {
  Rng rng(111);
  for (int i = 0; i < 100; ++i) {
    PosteriorGrid g =
        PosteriorGrid::FromProbs(oracle::RandomProbs(rng, 4 + rng.Index(12), 4));
    for (std::size_t b : {1, 2, 4, 8, 16}) {
      const auto r = BeamSearchAlign(g, b);
      if (r.prefix.empty()) continue;
      EXPECT_LE(r.prefix_logprob, -CtcLoss(g, r.prefix) + 1e-9);
    }
  }
}

TEST(BeamSearchTest, RealignedModeUsesForcedAlignment) {
  Rng rng(109);
  PosteriorGrid g = PosteriorGrid::FromProbs(oracle::RandomProbs(rng, 12, 4));
  const auto r = BeamSearchAlign(g, 4, BsaPath::kRealigned);
  EXPECT_EQ(r.alignment, ViterbiAlign(g, r.prefix));
  EXPECT_THROW(ParseBsaPath("frames"), Error);
}

TEST(EsaTest, WorkedExampleSelectionAndLengths) {
  const PosteriorGrid g = fixture::CatsGrid();
  EXPECT_EQ(SelectLowConfidenceFrames(g, 0.7), (std::vector<std::size_t>{2, 4, 5, 6}));
  EsaConfig cfg;
  cfg.samples = 300;
  cfg.seed = 7;
  const auto samples = EsaSample(g, cfg, "utt");
  ASSERT_EQ(samples.size(), 300u);
  EXPECT_EQ(samples[0], BestPathAlign(g));
  std::set<std::size_t> lengths;
  for (const auto& s : samples) lengths.insert(align::PredictedLength(s.labels));
  EXPECT_EQ(lengths, (std::set<std::size_t>{3, 4, 5}));
}

TEST(EsaTest, NothingSelectedMeansAllSamplesAreBestPath) {
  const PosteriorGrid g = fixture::CatsGrid();
  EsaConfig cfg;
  cfg.threshold = 0.5;
  cfg.samples = 20;
  for (const auto& s : EsaSample(g, cfg)) EXPECT_EQ(s, BestPathAlign(g));
}

TEST(EsaTest, OnlySelectedFramesChange) {
  Rng rng(110);
  for (int i = 0; i < 20; ++i) {
    PosteriorGrid g = PosteriorGrid::FromProbs(oracle::RandomProbs(rng, 20, 5));
    EsaConfig cfg;
    cfg.samples = 30;
    cfg.seed = static_cast<std::uint64_t>(i);
    const auto sel = SelectLowConfidenceFrames(g, cfg.threshold);
    const std::set<std::size_t> selected(sel.begin(), sel.end());
    const Alignment bpa = BestPathAlign(g);
    for (const auto& s : EsaSample(g, cfg)) {
      for (std::size_t t = 0; t < 20; ++t) {
        if (!selected.count(t)) {
          EXPECT_EQ(s.labels[t], bpa.labels[t]);
        } else {
          EXPECT_TRUE(s.labels[t] == g.Top1(t) || s.labels[t] == g.Top2(t));
        }
      }
      EXPECT_DOUBLE_EQ(s.logprob, AlignmentLogProb(g, s.labels));
    }
  }
}

double SecondChoiceFrequency(const PosteriorGrid& g, EsaDistribution d, std::size_t frame) {
  EsaConfig cfg;
  cfg.samples = 10001;
  cfg.seed = 99;
  cfg.distribution = d;
  const auto samples = EsaSample(g, cfg, "stats");
  std::size_t hits = 0;
  for (std::size_t k = 1; k < samples.size(); ++k)
    hits += samples[k].labels[frame] == g.Top2(frame);
  return static_cast<double>(hits) / 10000.0;
}

TEST(EsaTest, UniformChoiceFrequencyIsOneHalf) {
  const PosteriorGrid g = fixture::CatsGrid();
  const double sigma = std::sqrt(0.25 / 10000.0);
  for (std::size_t t : {2u, 4u, 5u, 6u})
    EXPECT_LT(std::abs(SecondChoiceFrequency(g, EsaDistribution::kTop2Uniform, t) - 0.5),
              3 * sigma);
}

TEST(EsaTest, RenormalizedChoiceFrequency) {
  const PosteriorGrid g = fixture::CatsGrid();
  const double p = 0.30 / (0.65 + 0.30);
  const double sigma = std::sqrt(p * (1 - p) / 10000.0);
  EXPECT_LT(std::abs(SecondChoiceFrequency(g, EsaDistribution::kTop2Renormalized, 4) - p),
            3 * sigma);
}

TEST(EsaTest, ReproducibleAndStreamDependent) {
  const PosteriorGrid g = fixture::CatsGrid();
  EsaConfig cfg;
  cfg.samples = 40;
  cfg.seed = 5;
  EXPECT_EQ(EsaSample(g, cfg, "a"), EsaSample(g, cfg, "a"));
  EXPECT_NE(EsaSample(g, cfg, "a"), EsaSample(g, cfg, "b"));
  // Sample k does not depend on how many samples were requested.
  EsaConfig fewer = cfg;
  fewer.samples = 10;
  const auto all = EsaSample(g, cfg, "a");
  const auto head = EsaSample(g, fewer, "a");
  for (std::size_t k = 0; k < head.size(); ++k) EXPECT_EQ(head[k], all[k]);
}

TEST(EsaTest, ConfigValidation) {
  EsaConfig cfg;
  cfg.samples = 0;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg.samples = 1;
  cfg.threshold = -0.1;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg.threshold = 1.5;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg.threshold = 0.0;
  EXPECT_NO_THROW(cfg.Validate());
  EXPECT_TRUE(SelectLowConfidenceFrames(fixture::CatsGrid(), 0.0).empty());
  EXPECT_EQ(ParseEsaDistribution("top2-renormalized"), EsaDistribution::kTop2Renormalized);
  EXPECT_EQ(ToString(EsaDistribution::kTop2Uniform), "top2-uniform");
  EXPECT_THROW(ParseEsaDistribution("top3"), Error);
}

}  // namespace
}  // namespace cassnat::ctc
