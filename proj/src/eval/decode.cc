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

#include "cassnat/eval/decode.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "cassnat/align/alignment_map.h"
#include "cassnat/common/error.h"

namespace cassnat::eval {
namespace {

using model::Model;
using model::ModelKind;
using nn::Tensor;

// Row-wise log-softmax of a 2-D tensor.
Tensor LogSoftmaxRows(const Tensor& x) {
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (double& v : row) v -= lse;
  }
  return out;
}

// Argmax over token ids 1..V (the blank column is never emitted); ties go
// to the lower id.
int BestToken(std::span<const double> row) {
  int best = 1;
  for (std::size_t k = 2; k < row.size(); ++k)
    if (row[k] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

}  // namespace

DecodeMode ParseDecodeMode(const std::string& s) {
  if (s == "bpa") return DecodeMode::kBpa;
  if (s == "bsa") return DecodeMode::kBsa;
  if (s == "esa") return DecodeMode::kEsa;
  if (s == "oracle") return DecodeMode::kOracle;
  if (s == "at") return DecodeMode::kAtGreedy;
  Fail(ErrorKind::kUsage, "unknown decode mode '" + s + "' (bpa|bsa|esa|oracle|at)");
}

std::string ToString(DecodeMode m) {
  switch (m) {
    case DecodeMode::kBpa: return "bpa";
    case DecodeMode::kBsa: return "bsa";
    case DecodeMode::kEsa: return "esa";
    case DecodeMode::kOracle: return "oracle";
    case DecodeMode::kAtGreedy: return "at";
  }
  return "?";
}

Ranker ParseRanker(const std::string& s) {
  if (s == "self") return Ranker::kSelf;
  if (s == "at") return Ranker::kAt;
  Fail(ErrorKind::kUsage, "unknown ranker '" + s + "' (self|at)");
}

std::string ToString(Ranker r) { return r == Ranker::kSelf ? "self" : "at"; }

void DecodeOptions::Validate() const {
  esa.Validate();
  CASSNAT_CHECK(beam >= 1, ErrorKind::kUsage, "beam must be >= 1");
}

DecodeOptions DecodeOptions::FromConfig(const KeyValueConfig& kv) {
  DecodeOptions o;
  o.mode = ParseDecodeMode(kv.GetString("mode", ToString(o.mode)));
  o.esa.samples = kv.GetUint("samples", o.esa.samples);
  o.esa.threshold = kv.GetDouble("threshold", o.esa.threshold);
  o.esa.distribution =
      ctc::ParseEsaDistribution(kv.GetString("esa_distribution", ToString(o.esa.distribution)));
  o.esa.seed = kv.GetUint("esa_seed", o.esa.seed);
  o.beam = kv.GetUint("beam", o.beam);
  o.bsa_path = ctc::ParseBsaPath(
      kv.GetString("bsa_path", o.bsa_path == ctc::BsaPath::kTracked ? "tracked" : "realigned"));
  o.ranker = ParseRanker(kv.GetString("ranker", ToString(o.ranker)));
  o.Validate();
  return o;
}

void DecodeOptions::ToConfig(KeyValueConfig& kv) const {
  kv.Set("mode", ToString(mode));
  kv.Set("samples", std::to_string(esa.samples));
  kv.Set("threshold", FormatDouble(esa.threshold));
  kv.Set("esa_distribution", ToString(esa.distribution));
  kv.Set("esa_seed", std::to_string(esa.seed));
  kv.Set("beam", std::to_string(beam));
  kv.Set("bsa_path", bsa_path == ctc::BsaPath::kTracked ? "tracked" : "realigned");
  kv.Set("ranker", ToString(ranker));
}

std::size_t RankCandidates(std::span<const double> scores,
                           std::span<const Candidate> candidates) {
  CASSNAT_CHECK(!candidates.empty() && scores.size() == candidates.size(), ErrorKind::kUsage,
                "ranking needs one score per candidate and at least one candidate");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] &&
         candidates[i].alignment.logprob > candidates[best].alignment.logprob))
      best = i;
  }
  return best;
}

std::vector<ctc::Alignment> CandidateAlignments(const ctc::PosteriorGrid& grid,
                                                const DecodeOptions& options,
                                                std::span<const int> reference,
                                                const std::string& stream) {
  switch (options.mode) {
    case DecodeMode::kBpa:
      return {ctc::BestPathAlign(grid)};
    case DecodeMode::kBsa:
      return {ctc::BeamSearchAlign(grid, options.beam, options.bsa_path).alignment};
    case DecodeMode::kEsa:
      return ctc::EsaSample(grid, options.esa, stream);
    case DecodeMode::kOracle:
      CASSNAT_CHECK(!reference.empty(), ErrorKind::kUsage,
                    "oracle decoding needs the reference transcription");
      return {ctc::ViterbiAlign(grid, reference)};
    case DecodeMode::kAtGreedy:
      break;
  }
  Fail(ErrorKind::kUsage, "the AT baseline has no CTC alignment candidates");
}

double AtSequenceLogProb(const Model& at, nn::Tape& tape, const model::AtMemory& memory,
                         std::span<const int> tokens) {
  std::vector<int> inputs{model::AtDecoder::kSos};
  inputs.insert(inputs.end(), tokens.begin(), tokens.end());
  const Tensor lp = LogSoftmaxRows(tape.value(at.DecodeAt(tape, inputs, memory, {})));
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const int target = i < tokens.size() ? tokens[i] : model::AtDecoder::kEos;
    total += lp.at(i, static_cast<std::size_t>(target));
  }
  return total;
}

Decoder::Decoder(const Model& nat, DecodeOptions options, const Model* at)
    : model_(nat), at_(at), options_(std::move(options)) {
  options_.Validate();
  if (options_.mode == DecodeMode::kAtGreedy) {
    CASSNAT_CHECK(model_.kind() == ModelKind::kAt, ErrorKind::kUsage,
                  "AT decoding needs an AT model");
    return;
  }
  CASSNAT_CHECK(model_.kind() == ModelKind::kNat, ErrorKind::kUsage,
                "alignment-based decoding needs a NAT model");
  if (options_.ranker == Ranker::kAt) {
    CASSNAT_CHECK(at_ != nullptr && at_->kind() == ModelKind::kAt, ErrorKind::kUsage,
                  "the AT ranker needs an AT model");
  }
}

DecodeResult Decoder::Decode(const DecodeInput& input) const {
  CASSNAT_CHECK(input.feats != nullptr, ErrorKind::kUsage, "decode input has no features");
  return options_.mode == DecodeMode::kAtGreedy ? DecodeAtGreedy(input) : DecodeNat(input);
}

DecodeResult Decoder::DecodeNat(const DecodeInput& input) const {
  nn::Tape tape(false);
  const model::EncoderOutput enc = model_.Encode(tape, *input.feats, {});
  DecodeResult out;
  out.grid = enc.grid;
  out.hyp.mode = options_.mode;
  const std::vector<ctc::Alignment> alignments =
      CandidateAlignments(enc.grid, options_, input.reference, input.stream);

  // The decoder sees an alignment only through its trigger masks, so
  // alignments with the same boundaries give the same output.
  const align::TriggerMaskOptions mask_options{model_.config().extend_last};
  std::vector<Candidate> candidates;
  std::vector<align::TriggerMaskSet> masks;
  std::map<std::vector<std::size_t>, std::size_t> seen;
  for (const ctc::Alignment& a : alignments) {
    if (align::PredictedLength(a.labels) == 0) continue;
    align::TriggerMaskSet m = align::TriggerMasks(a.labels, mask_options);
    if (!seen.emplace(m.boundaries, candidates.size()).second) continue;
    candidates.push_back(Candidate{a, {}, {}, 0.0});
    masks.push_back(std::move(m));
  }
  if (candidates.empty()) {
    out.hyp.empty = true;
    out.hyp.alignment = alignments.front();
    return out;
  }

  const model::NatMemory memory = model_.PrepareNat(tape, enc);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const nn::Var emb = model_.ExtractTokens(tape, memory, masks[i], {});
    const Tensor lp = LogSoftmaxRows(tape.value(model_.DecodeNat(tape, emb, memory, {})));
    Candidate& c = candidates[i];
    double sum = 0.0;
    for (std::size_t u = 0; u < lp.rows(); ++u) {
      const int tok = BestToken(lp.row(u));
      c.tokens.push_back(tok);
      c.token_logprobs.push_back(lp.at(u, static_cast<std::size_t>(tok)));
      sum += c.token_logprobs.back();
    }
    c.self_score = sum / static_cast<double>(lp.rows());
  }

  std::vector<double> scores;
  if (options_.ranker == Ranker::kAt && candidates.size() > 1) {
    scores = AtScores(*input.feats, candidates);
  } else {
    for (const Candidate& c : candidates) scores.push_back(c.self_score);
  }
  const std::size_t best = RankCandidates(scores, candidates);
  Candidate& win = candidates[best];
  out.hyp.tokens = std::move(win.tokens);
  out.hyp.token_logprobs = std::move(win.token_logprobs);
  out.hyp.alignment = std::move(win.alignment);
  out.hyp.rank_score = scores[best];
  out.hyp.candidates = candidates.size();
  return out;
}

std::vector<double> Decoder::AtScores(const Tensor& feats,
                                      std::span<const Candidate> candidates) const {
  nn::Tape tape(false);
  const model::EncoderOutput enc = at_->Encode(tape, feats, {});
  const model::AtMemory memory = at_->PrepareAt(tape, enc);
  std::vector<double> scores;
  for (const Candidate& c : candidates)
    scores.push_back(AtSequenceLogProb(*at_, tape, memory, c.tokens));
  return scores;
}

DecodeResult Decoder::DecodeAtGreedy(const DecodeInput& input) const {
  nn::Tape tape(false);
  const model::EncoderOutput enc = model_.Encode(tape, *input.feats, {});
  const model::AtMemory memory = model_.PrepareAt(tape, enc);
  DecodeResult out;
  out.hyp.mode = DecodeMode::kAtGreedy;
  out.hyp.candidates = 1;
  std::vector<int> prefix{model::AtDecoder::kSos};
  // A CTC-trained encoder cannot emit more tokens than frames; the same
  // cap bounds the greedy loop.
  while (true) {
    const Tensor& logits = tape.value(model_.DecodeAt(tape, prefix, memory, {}));
    const Tensor last({1, logits.cols()},
                      std::vector<double>(logits.row(logits.rows() - 1).begin(),
                                          logits.row(logits.rows() - 1).end()));
    const Tensor lp = LogSoftmaxRows(last);
    std::size_t tok = 0;
    for (std::size_t k = 1; k < lp.cols(); ++k)
      if (lp[k] > lp[tok]) tok = k;
    out.hyp.rank_score += lp[tok];
    if (tok == static_cast<std::size_t>(model::AtDecoder::kEos)) break;
    prefix.push_back(static_cast<int>(tok));
    out.hyp.tokens.push_back(static_cast<int>(tok));
    out.hyp.token_logprobs.push_back(lp[tok]);
    if (out.hyp.tokens.size() >= enc.valid_frames) break;
  }
  out.hyp.empty = out.hyp.tokens.empty();
  return out;
}

}  // namespace cassnat::eval
