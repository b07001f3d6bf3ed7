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

#ifndef CASSNAT_NN_CHECKPOINT_H_
#define CASSNAT_NN_CHECKPOINT_H_

#include <string>
#include <vector>

#include "cassnat/nn/parameter.h"
#include "cassnat/nn/tensor.h"

namespace cassnat::nn {

// On-disk layout, all integers little-endian:
//   "CASSNAT1"                       8-byte magic
//   u64 record_count
//   record_count x {
//     u32 name_length, name bytes
//     u32 ndim, u64 dims[ndim]
//     f64 payload[product(dims)]
//   }
struct NamedTensor {
  std::string name;
  Tensor value;
};

inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'S', 'S',
                                             'N', 'A', 'T', '1'};

void SaveCheckpoint(const std::string& path,
                    const std::vector<NamedTensor>& records);
void SaveCheckpoint(const std::string& path, const ParameterSet& params);
std::vector<NamedTensor> LoadCheckpoint(const std::string& path);

// Copies every record whose name exists in `params`. With `require_all`,
// a parameter missing from the checkpoint is an error. Shape mismatches
// are always errors. Returns the number of parameters loaded.
std::size_t LoadInto(const std::vector<NamedTensor>& records,
                     ParameterSet& params, bool require_all,
                     const std::string& prefix = "");

// Parameter-wise arithmetic mean; names and shapes must agree.
std::vector<NamedTensor> AverageCheckpoints(
    const std::vector<std::vector<NamedTensor>>& checkpoints);

std::vector<NamedTensor> Snapshot(const ParameterSet& params);

}  // namespace cassnat::nn

#endif  // CASSNAT_NN_CHECKPOINT_H_
