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

#include "cassnat/nn/attention_mask.h"

#include <algorithm>

#include "cassnat/common/error.h"

namespace cassnat::nn {

MaskMode ParseMaskMode(const std::string& s) {
  if (s == "presoftmax") return MaskMode::kPreSoftmax;
  if (s == "literal") return MaskMode::kLiteral;
  Fail(ErrorKind::kUsage, "unknown mask_mode: " + s);
}

std::string ToString(MaskMode mode) {
  return mode == MaskMode::kPreSoftmax ? "presoftmax" : "literal";
}

AttentionMask AttentionMask::Causal(std::size_t n) {
  AttentionMask m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
  return m;
}

AttentionMask AttentionMask::Prefix(std::size_t rows, std::size_t cols,
                                    std::size_t valid_cols) {
  AttentionMask m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < std::min(cols, valid_cols); ++j) m.set(i, j, true);
  return m;
}

std::size_t AttentionMask::RowCount(std::size_t r) const {
  const std::uint8_t* b = row(r);
  return static_cast<std::size_t>(std::count(b, b + cols_, std::uint8_t{1}));
}

void AttentionMask::CheckNoEmptyRow() const {
  for (std::size_t r = 0; r < rows_; ++r) {
    CASSNAT_CHECK(RowCount(r) > 0, ErrorKind::kShape,
                  "attention mask row " + std::to_string(r) +
                      " is fully masked");
  }
}

AttentionMask AttentionMask::PaddedTo(std::size_t cols) const {
  CASSNAT_CHECK(cols >= cols_, ErrorKind::kShape,
                "cannot pad attention mask to fewer columns");
  AttentionMask m(rows_, cols);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) m.set(r, c, get(r, c));
  return m;
}

}  // namespace cassnat::nn
