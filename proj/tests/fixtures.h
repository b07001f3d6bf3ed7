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

#ifndef CASSNAT_TESTS_FIXTURES_H_
#define CASSNAT_TESTS_FIXTURES_H_

#include <vector>

#include "cassnat/ctc/posterior_grid.h"

namespace cassnat::fixture {

// Tokens of the worked example: blank, C, A, T, S.
inline constexpr int kC = 1, kA = 2, kT = 3, kS = 4;

// Nine-frame grid spelling "CATS" whose frames 3, 5, 6 and 7 (1-based) are
// uncertain. Each row fixes its top-1 and top-2 entries and spreads the
// remaining mass evenly over the other tokens.
inline ctc::PosteriorGrid CatsGrid() {
  struct Row { int top1; double p1; int top2; double p2; };
  const Row rows[9] = {
      {kC, 0.90, 0, 0.05},  {kC, 0.88, 0, 0.07}, {0, 0.51, kC, 0.45},
      {kA, 0.89, -1, 0.0},  {0, 0.65, kT, 0.30}, {kT, 0.61, 0, 0.35},
      {kT, 0.52, 0, 0.44},  {0, 0.95, -1, 0.0},  {kS, 0.92, -1, 0.0}};
  std::vector<double> probs;
  for (const Row& r : rows) {
    const int others = r.top2 < 0 ? 4 : 3;
    const double rest = (1.0 - r.p1 - r.p2) / others;
    for (int k = 0; k < 5; ++k)
      probs.push_back(k == r.top1 ? r.p1 : k == r.top2 ? r.p2 : rest);
  }
  return ctc::PosteriorGrid(9, 5, std::move(probs));
}

// "_ C C _ A _ _ T _"
inline const std::vector<int> kCatLabels{0, kC, kC, 0, kA, 0, 0, kT, 0};

}  // namespace cassnat::fixture

#endif  // CASSNAT_TESTS_FIXTURES_H_
