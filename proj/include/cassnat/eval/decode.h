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

#ifndef CASSNAT_EVAL_DECODE_H_
#define CASSNAT_EVAL_DECODE_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cassnat/common/config.h"
#include "cassnat/ctc/lattice.h"
#include "cassnat/model/model.h"

namespace cassnat::eval {

enum class DecodeMode { kBpa, kBsa, kEsa, kOracle, kAtGreedy };
DecodeMode ParseDecodeMode(const std::string& s);
std::string ToString(DecodeMode m);

enum class Ranker { kSelf, kAt };
Ranker ParseRanker(const std::string& s);
std::string ToString(Ranker r);

struct DecodeOptions {
  DecodeMode mode = DecodeMode::kBpa;
  ctc::EsaConfig esa;
  std::size_t beam = 10;
  ctc::BsaPath bsa_path = ctc::BsaPath::kTracked;
  Ranker ranker = Ranker::kSelf;

  void Validate() const;
  static DecodeOptions FromConfig(const KeyValueConfig& kv);
  void ToConfig(KeyValueConfig& kv) const;
};

struct Hypothesis {
  std::vector<int> tokens;
  std::vector<double> token_logprobs;
  ctc::Alignment alignment;  // empty for the AT baseline
  double rank_score = 0.0;
  DecodeMode mode = DecodeMode::kBpa;
  bool empty = false;        // every candidate alignment collapsed to nothing
  std::size_t candidates = 0;  // distinct candidates scored
};

// Decoder output for one alignment, before ranking.
struct Candidate {
  ctc::Alignment alignment;
  std::vector<int> tokens;
  std::vector<double> token_logprobs;
  double self_score = 0.0;  // mean token log-probability
};

// Ranks by score (higher wins), then alignment log-probability (higher
// wins), then candidate index. Returns the winning index.
std::size_t RankCandidates(std::span<const double> scores, std::span<const Candidate> candidates);

// Everything a decode needs from one utterance.
struct DecodeInput {
  const nn::Tensor* feats = nullptr;
  std::span<const int> reference;  // required for oracle mode
  std::string stream;              // ESA sample stream, normally the utterance id
};

struct DecodeResult {
  Hypothesis hyp;
  ctc::PosteriorGrid grid;  // NAT modes only
};

class Decoder {
 public:
  // `nat` is a NAT model for the CTC-alignment modes and an AT model for
  // kAtGreedy. `at` is the rescoring model for Ranker::kAt.
  Decoder(const model::Model& nat, DecodeOptions options, const model::Model* at = nullptr);

  DecodeResult Decode(const DecodeInput& input) const;
  const DecodeOptions& options() const { return options_; }

 private:
  DecodeResult DecodeNat(const DecodeInput& input) const;
  DecodeResult DecodeAtGreedy(const DecodeInput& input) const;
  std::vector<double> AtScores(const nn::Tensor& feats,
                               std::span<const Candidate> candidates) const;

  const model::Model& model_;
  const model::Model* at_;
  DecodeOptions options_;
};

// Candidate alignments for `mode` before deduplication.
std::vector<ctc::Alignment> CandidateAlignments(const ctc::PosteriorGrid& grid,
                                                const DecodeOptions& options,
                                                std::span<const int> reference,
                                                const std::string& stream);

// Teacher-forced log P(tokens + eos | feats) under an AT model.
double AtSequenceLogProb(const model::Model& at, nn::Tape& tape, const model::AtMemory& memory,
                         std::span<const int> tokens);

}  // namespace cassnat::eval

#endif  // CASSNAT_EVAL_DECODE_H_
