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

#ifndef CASSNAT_CTC_POSTERIOR_GRID_H_
#define CASSNAT_CTC_POSTERIOR_GRID_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cassnat/nn/tensor.h"

namespace cassnat::ctc {

inline constexpr int kBlank = 0;
// Entries are clamped to at least this before taking logs.
inline constexpr double kProbFloor = 1e-12;

using TokenSeq = std::vector<int>;

// Per-frame posteriors over blank (index 0) plus V tokens. Rows are
// distributions; entries are clamped to [kProbFloor, 1].
class PosteriorGrid {
 public:
  PosteriorGrid() = default;
  // probs: frames x vocab, row-major. Rows must sum to 1 within 1e-9.
  PosteriorGrid(std::size_t frames, std::size_t vocab, std::vector<double> probs);
  static PosteriorGrid FromProbs(const nn::Tensor& probs);
  static PosteriorGrid FromLogits(const nn::Tensor& logits);

  std::size_t frames() const { return frames_; }
  std::size_t vocab() const { return vocab_; }  // V + 1
  double prob(std::size_t t, std::size_t k) const { return probs_[t * vocab_ + k]; }
  double log_prob(std::size_t t, std::size_t k) const {
    return log_probs_[t * vocab_ + k];
  }
  std::span<const double> row(std::size_t t) const {
    return {probs_.data() + t * vocab_, vocab_};
  }
  const std::vector<double>& probs() const { return probs_; }
  nn::Tensor LogProbTensor() const;

  // Top-1 / top-2 token per frame; ties go to the lower id.
  int Top1(std::size_t t) const;
  int Top2(std::size_t t) const;

 private:
  std::size_t frames_ = 0;
  std::size_t vocab_ = 0;
  std::vector<double> probs_;
  std::vector<double> log_probs_;
};

// Frame-level labels over [0, V] plus their summed log posterior.
struct Alignment {
  std::vector<int> labels;
  double logprob = 0.0;

  bool operator==(const Alignment&) const = default;
};

double AlignmentLogProb(const PosteriorGrid& grid, std::span<const int> labels);

// One line per frame: "idx token prob" for the top-1 token.
std::string DumpGrid(const PosteriorGrid& grid);
std::string FormatLabels(std::span<const int> labels);

// Binary grid file: the feature-matrix layout (see common/matrix_io.h) with
// width V + 1, stored as f32.
void SaveGrid(const std::string& path, const PosteriorGrid& grid);
PosteriorGrid LoadGrid(const std::string& path);

}  // namespace cassnat::ctc

#endif  // CASSNAT_CTC_POSTERIOR_GRID_H_
