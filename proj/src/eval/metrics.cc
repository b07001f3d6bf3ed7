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

#include "cassnat/eval/metrics.h"

#include <algorithm>
#include <vector>

#include "cassnat/common/error.h"

namespace cassnat::eval {

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_length += o.ref_length;
  return *this;
}

EditCounts Levenshtein(std::span<const int> hyp, std::span<const int> ref) {
  const std::size_t n = ref.size(), m = hyp.size();
  // d[i][j]: edits turning hyp[0, j) into ref[0, i).
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});
  EditCounts e;
  e.ref_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1])) {
      e.substitutions += ref[i - 1] != hyp[j - 1];
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++e.deletions;
      --i;
    } else {
      ++e.insertions;
      --j;
    }
  }
  return e;
}

double Wer(std::span<const int> hyp, std::span<const int> ref) {
  CASSNAT_CHECK(!ref.empty(), ErrorKind::kUsage, "WER of an empty reference");
  return static_cast<double>(Levenshtein(hyp, ref).errors()) / static_cast<double>(ref.size());
}

double Mr(std::span<const int> generated, std::span<const int> oracle) {
  CASSNAT_CHECK(!oracle.empty(), ErrorKind::kUsage, "MR of an empty oracle sequence");
  return static_cast<double>(Levenshtein(generated, oracle).mismatches()) /
         static_cast<double>(oracle.size());
}

}  // namespace cassnat::eval
