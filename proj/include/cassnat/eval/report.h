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

#ifndef CASSNAT_EVAL_REPORT_H_
#define CASSNAT_EVAL_REPORT_H_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cassnat/data/corpus.h"
#include "cassnat/eval/decode.h"
#include "cassnat/eval/metrics.h"

namespace cassnat::eval {

// Nominal audio duration of one raw frame.
inline constexpr double kFrameSeconds = 0.010;

struct UtteranceRecord {
  std::string id;
  std::size_t raw_frames = 0;
  std::vector<int> reference;
  std::vector<int> hypothesis;
  std::vector<int> alignment;  // empty for the AT baseline
  EditCounts edits;            // hypothesis vs reference
  bool has_alignment = false;
  bool oracle_feasible = false;
  EditCounts length_edits;     // collapsed alignment vs oracle collapse
  long length_error = 0;       // |collapse(gen)| - |collapse(oracle)|
  bool empty = false;
  std::size_t candidates = 0;
  double rank_score = 0.0;
};

struct HistogramBucket {
  long length_error = 0;
  std::size_t utterances = 0;
  EditCounts edits;
  double wer() const;
};

struct EvalReport {
  std::string name;          // e.g. "esa(S=50,self)"
  DecodeMode mode = DecodeMode::kBpa;
  double wer = 0.0;          // fractions, not percentages
  std::optional<double> mr;  // alignment-based modes only
  std::optional<double> lper;
  std::optional<double> rtf;  // set from MeasureRtf; never by Evaluate
  std::size_t empty = 0;
  std::vector<UtteranceRecord> records;
  std::vector<HistogramBucket> histogram;  // ascending length error

  nlohmann::json ToJson() const;
  std::string HistogramCsv() const;
};

// Short label for a decode configuration, e.g. "esa(S=50,self)".
std::string ModeLabel(const DecodeOptions& options);

// Decodes `set` and scores it. `workers` > 1 decodes utterances in
// parallel; results do not depend on the worker count. No wall-clock
// values enter the report, so reruns are byte-identical.
EvalReport Evaluate(const Decoder& decoder, const std::vector<data::Utterance>& set,
                    std::size_t workers = 1);

// Serial batch-1 decode of `set`, one untimed warmup utterance first.
// Returns total decode seconds / total nominal audio seconds.
double MeasureRtf(const Decoder& decoder, const std::vector<data::Utterance>& set);

// Fixed-width comparison table: one row per report.
std::string FormatTable(const std::vector<EvalReport>& reports);

// Tab-separated hypotheses: id, tokens, alignment, rank score.
std::string FormatHypotheses(const EvalReport& report);

}  // namespace cassnat::eval

#endif  // CASSNAT_EVAL_REPORT_H_
