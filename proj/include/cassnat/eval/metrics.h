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

#ifndef CASSNAT_EVAL_METRICS_H_
#define CASSNAT_EVAL_METRICS_H_

#include <cstddef>
#include <span>

namespace cassnat::eval {

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  std::size_t mismatches() const { return deletions + insertions; }
  EditCounts& operator+=(const EditCounts& o);
  bool operator==(const EditCounts&) const = default;
};

// Minimum-edit alignment of hyp against ref. Among optimal alignments the
// backtrace takes a substitution (or match) before a deletion, and a
// deletion before an insertion, so the split into S/D/I is fixed.
EditCounts Levenshtein(std::span<const int> hyp, std::span<const int> ref);

// (S + D + I) / N. Throws kUsage on an empty reference.
double Wer(std::span<const int> hyp, std::span<const int> ref);

// (D + I) / N over collapsed label sequences; substitutions are free.
// N is the oracle length. Throws kUsage on an empty oracle.
double Mr(std::span<const int> generated, std::span<const int> oracle);

}  // namespace cassnat::eval

#endif  // CASSNAT_EVAL_METRICS_H_
