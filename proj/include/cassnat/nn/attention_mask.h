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

#ifndef CASSNAT_NN_ATTENTION_MASK_H_
#define CASSNAT_NN_ATTENTION_MASK_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cassnat::nn {

// How a binary mask enters scaled dot-product attention.
//   kPreSoftmax: blocked logits are excluded before the softmax, so every
//                row is a distribution over the permitted keys.
//   kLiteral:    softmax over all keys, then elementwise product with the
//                mask. Rows no longer sum to one.
enum class MaskMode { kPreSoftmax, kLiteral };

MaskMode ParseMaskMode(const std::string& s);
std::string ToString(MaskMode mode);

// rows x cols binary matrix, 1 = attend. Row-major.
class AttentionMask {
 public:
  AttentionMask() = default;
  AttentionMask(std::size_t rows, std::size_t cols, std::uint8_t fill = 0)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill) {}

  static AttentionMask Full(std::size_t rows, std::size_t cols) {
    return AttentionMask(rows, cols, 1);
  }
  // Lower-triangular: query i sees keys 0..i.
  static AttentionMask Causal(std::size_t n);
  // Every query sees keys [0, valid_cols).
  static AttentionMask Prefix(std::size_t rows, std::size_t cols,
                              std::size_t valid_cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool get(std::size_t r, std::size_t c) const {
    return bits_[r * cols_ + c] != 0;
  }
  void set(std::size_t r, std::size_t c, bool on) {
    bits_[r * cols_ + c] = on ? 1 : 0;
  }
  const std::uint8_t* row(std::size_t r) const { return bits_.data() + r * cols_; }
  std::size_t RowCount(std::size_t r) const;

  // Throws kShape if some row has no permitted key.
  void CheckNoEmptyRow() const;
  // New mask with `cols` columns; extra columns are blocked.
  AttentionMask PaddedTo(std::size_t cols) const;

  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace cassnat::nn

#endif  // CASSNAT_NN_ATTENTION_MASK_H_
