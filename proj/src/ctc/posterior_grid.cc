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

#include "cassnat/ctc/posterior_grid.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "cassnat/common/error.h"
#include "cassnat/common/matrix_io.h"

namespace cassnat::ctc {

PosteriorGrid::PosteriorGrid(std::size_t frames, std::size_t vocab,
                             std::vector<double> probs)
    : frames_(frames), vocab_(vocab), probs_(std::move(probs)) {
  CASSNAT_CHECK(vocab_ >= 2, ErrorKind::kShape,
                "posterior grid needs blank plus at least one token");
  CASSNAT_CHECK(probs_.size() == frames_ * vocab_, ErrorKind::kShape,
                "posterior grid data does not match frames x vocab");
  log_probs_.resize(probs_.size());
  for (std::size_t t = 0; t < frames_; ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; k < vocab_; ++k) {
      double& p = probs_[t * vocab_ + k];
      CASSNAT_CHECK(std::isfinite(p) && p >= 0.0 && p <= 1.0 + 1e-9,
                    ErrorKind::kNumeric,
                    "posterior out of range at frame " + std::to_string(t));
      p = std::clamp(p, kProbFloor, 1.0);
      sum += p;
      log_probs_[t * vocab_ + k] = std::log(p);
    }
    CASSNAT_CHECK(std::abs(sum - 1.0) < 1e-9, ErrorKind::kNumeric,
                  "posterior row " + std::to_string(t) + " sums to " +
                      std::to_string(sum));
  }
}

PosteriorGrid PosteriorGrid::FromProbs(const nn::Tensor& probs) {
  return PosteriorGrid(probs.rows(), probs.cols(), probs.values());
}

PosteriorGrid PosteriorGrid::FromLogits(const nn::Tensor& logits) {
  return FromProbs(nn::SoftmaxRows(logits));
}

nn::Tensor PosteriorGrid::LogProbTensor() const {
  return nn::Tensor({frames_, vocab_}, log_probs_);
}

int PosteriorGrid::Top1(std::size_t t) const {
  auto r = row(t);
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

int PosteriorGrid::Top2(std::size_t t) const {
  const int first = Top1(t);
  int best = -1;
  for (std::size_t k = 0; k < vocab_; ++k) {
    if (static_cast<int>(k) == first) continue;
    if (best < 0 || prob(t, k) > prob(t, static_cast<std::size_t>(best)))
      best = static_cast<int>(k);
  }
  return best;
}

double AlignmentLogProb(const PosteriorGrid& grid, std::span<const int> labels) {
  CASSNAT_CHECK(labels.size() == grid.frames(), ErrorKind::kShape,
                "alignment length differs from grid frame count");
  double lp = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t)
    lp += grid.log_prob(t, static_cast<std::size_t>(labels[t]));
  return lp;
}

std::string DumpGrid(const PosteriorGrid& grid) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  for (std::size_t t = 0; t < grid.frames(); ++t) {
    const int k = grid.Top1(t);
    os << t << ' ' << k << ' ' << grid.prob(t, static_cast<std::size_t>(k)) << '\n';
  }
  return os.str();
}

std::string FormatLabels(std::span<const int> labels) {
  std::ostringstream os;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) os << ' ';
    if (labels[i] == kBlank)
      os << '_';
    else
      os << labels[i];
  }
  return os.str();
}

void SaveGrid(const std::string& path, const PosteriorGrid& grid) {
  FeatureWriter w(path, static_cast<std::uint32_t>(grid.vocab()));
  std::vector<float> rows(grid.probs().begin(), grid.probs().end());
  w.Append(rows);
  w.Close();
}

PosteriorGrid LoadGrid(const std::string& path) {
  FeatureReader r(path);
  const std::uint64_t payload = r.file_size() - kFeatureHeaderBytes;
  const std::uint64_t row_bytes = r.width() * sizeof(float);
  CASSNAT_CHECK(payload % row_bytes == 0, ErrorKind::kIo,
                path + ": trailing partial row at byte offset " +
                    std::to_string(kFeatureHeaderBytes + payload / row_bytes * row_bytes));
  const std::uint64_t frames = payload / row_bytes;
  const auto data = r.Read(kFeatureHeaderBytes, frames);
  // f32 storage loses normalisation; renormalise each row in f64.
  std::vector<double> probs(data.begin(), data.end());
  for (std::uint64_t t = 0; t < frames; ++t) {
    double s = 0.0;
    for (std::uint32_t k = 0; k < r.width(); ++k) s += probs[t * r.width() + k];
    for (std::uint32_t k = 0; k < r.width(); ++k) probs[t * r.width() + k] /= s;
  }
  return PosteriorGrid(frames, r.width(), std::move(probs));
}

}  // namespace cassnat::ctc
