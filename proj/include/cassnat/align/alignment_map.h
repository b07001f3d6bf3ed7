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

#ifndef CASSNAT_ALIGN_ALIGNMENT_MAP_H_
#define CASSNAT_ALIGN_ALIGNMENT_MAP_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cassnat/ctc/posterior_grid.h"
#include "cassnat/nn/attention_mask.h"

namespace cassnat::align {

using ctc::TokenSeq;

// Merge adjacent duplicates, then drop blanks.
TokenSeq Collapse(std::span<const int> labels);

// Number of tokens the decoder will be fed, |Collapse(labels)|.
std::size_t PredictedLength(std::span<const int> labels);

struct TriggerMaskOptions {
  // Let the last token also attend the trailing frames after its boundary.
  bool extend_last = false;
};

// Decoder-input geometry derived from an alignment.
//
// Token u ends at the frame where its run first appears. Indices are
// 0-based: token u covers frames (boundaries[u-1], boundaries[u]] with an
// implicit boundaries[-1] = -1, so the rows tile frames 0..boundaries.back().
struct TriggerMaskSet {
  std::size_t token_count = 0;
  std::size_t frame_count = 0;
  std::vector<std::size_t> boundaries;
  nn::AttentionMask masks;  // token_count x frame_count
  TokenSeq tokens;          // the collapsed sequence

  bool operator==(const TriggerMaskSet&) const = default;
};

// Throws kInfeasible("no tokens triggered") when the alignment collapses to
// nothing.
TriggerMaskSet TriggerMasks(std::span<const int> labels,
                            const TriggerMaskOptions& options = {});

// "[0,0,1,1,1,0,0,0,0]"
std::string FormatMaskRow(const TriggerMaskSet& set, std::size_t token);

// Packed form: u32 token_count, u32 frame_count, u32 boundaries[U], then the
// mask bits row-major, LSB-first, padded to a whole byte.
std::vector<std::uint8_t> PackTriggerMasks(const TriggerMaskSet& set);
TriggerMaskSet UnpackTriggerMasks(std::span<const std::uint8_t> bytes);

}  // namespace cassnat::align

#endif  // CASSNAT_ALIGN_ALIGNMENT_MAP_H_
