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

#include "cassnat/align/alignment_map.h"

#include <cstring>
#include <sstream>

#include "cassnat/common/error.h"

namespace cassnat::align {

TokenSeq Collapse(std::span<const int> labels) {
  TokenSeq out;
  int prev = -1;
  for (int l : labels) {
    if (l != prev && l != ctc::kBlank) out.push_back(l);
    prev = l;
  }
  return out;
}

std::size_t PredictedLength(std::span<const int> labels) {
  return Collapse(labels).size();
}

TriggerMaskSet TriggerMasks(std::span<const int> labels,
                            const TriggerMaskOptions& options) {
  TriggerMaskSet set;
  set.frame_count = labels.size();
  int prev = -1;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] != prev && labels[t] != ctc::kBlank) {
      set.boundaries.push_back(t);
      set.tokens.push_back(labels[t]);
    }
    prev = labels[t];
  }
  set.token_count = set.tokens.size();
  CASSNAT_CHECK(set.token_count > 0, ErrorKind::kInfeasible, "no tokens triggered");

  set.masks = nn::AttentionMask(set.token_count, set.frame_count);
  std::size_t begin = 0;
  for (std::size_t u = 0; u < set.token_count; ++u) {
    std::size_t end = set.boundaries[u] + 1;
    if (options.extend_last && u + 1 == set.token_count) end = set.frame_count;
    for (std::size_t t = begin; t < end; ++t) set.masks.set(u, t, true);
    begin = set.boundaries[u] + 1;
  }
  return set;
}

std::string FormatMaskRow(const TriggerMaskSet& set, std::size_t token) {
  std::ostringstream os;
  os << '[';
  for (std::size_t t = 0; t < set.frame_count; ++t) {
    if (t) os << ',';
    os << (set.masks.get(token, t) ? 1 : 0);
  }
  os << ']';
  return os.str();
}

namespace {

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(std::span<const std::uint8_t> in, std::size_t& pos) {
  CASSNAT_CHECK(pos + 4 <= in.size(), ErrorKind::kIo,
                "packed trigger masks truncated at byte offset " + std::to_string(pos));
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::vector<std::uint8_t> PackTriggerMasks(const TriggerMaskSet& set) {
  std::vector<std::uint8_t> out;
  PutU32(out, static_cast<std::uint32_t>(set.token_count));
  PutU32(out, static_cast<std::uint32_t>(set.frame_count));
  for (std::size_t b : set.boundaries) PutU32(out, static_cast<std::uint32_t>(b));
  const std::size_t nbits = set.token_count * set.frame_count;
  const std::size_t base = out.size();
  out.resize(base + (nbits + 7) / 8, 0);
  for (std::size_t i = 0; i < nbits; ++i)
    if (set.masks.get(i / set.frame_count, i % set.frame_count))
      out[base + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}

TriggerMaskSet UnpackTriggerMasks(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  TriggerMaskSet set;
  set.token_count = GetU32(bytes, pos);
  set.frame_count = GetU32(bytes, pos);
  for (std::size_t u = 0; u < set.token_count; ++u)
    set.boundaries.push_back(GetU32(bytes, pos));
  const std::size_t nbits = set.token_count * set.frame_count;
  CASSNAT_CHECK(pos + (nbits + 7) / 8 == bytes.size(), ErrorKind::kIo,
                "packed trigger masks have wrong payload size");
  set.masks = nn::AttentionMask(set.token_count, set.frame_count);
  for (std::size_t i = 0; i < nbits; ++i)
    set.masks.set(i / set.frame_count, i % set.frame_count,
                  (bytes[pos + i / 8] >> (i % 8)) & 1u);
  // The packed form carries geometry only.
  return set;
}

}  // namespace cassnat::align
