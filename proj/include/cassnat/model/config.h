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

#ifndef CASSNAT_MODEL_CONFIG_H_
#define CASSNAT_MODEL_CONFIG_H_

#include <cstddef>
#include <string>

#include "cassnat/common/config.h"
#include "cassnat/nn/attention_mask.h"

namespace cassnat::model {

enum class Frontend { kStackProject, kConv };
Frontend ParseFrontend(const std::string& s);
std::string ToString(Frontend f);

// Network sizes and regularisation. Defaults are the desk-scale setup.
struct ModelConfig {
  std::size_t n_enc = 4;
  std::size_t n_self = 2;   // NAT decoder self-attention blocks
  std::size_t n_mix = 2;    // NAT decoder mix-attention blocks
  std::size_t n_at = 4;     // AT baseline decoder blocks
  std::size_t heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t vocab = 32;   // tokens 1..vocab; 0 is blank (and AT sos/eos)
  std::size_t d_feat = 16;
  std::size_t subsample = 4;
  std::size_t conv_channels = 64;
  Frontend frontend = Frontend::kStackProject;
  double dropout = 0.1;
  double label_smooth = 0.1;
  double task_ratio = 1.0;  // weight of the CTC term in the joint loss
  nn::MaskMode mask_mode = nn::MaskMode::kPreSoftmax;
  bool extend_last = false;

  void Validate() const;
  std::size_t outputs() const { return vocab + 1; }
  // Encoder frames for `raw` input frames: ceil(raw / subsample).
  std::size_t EncoderFrames(std::size_t raw) const {
    return (raw + subsample - 1) / subsample;
  }

  static ModelConfig FromConfig(const KeyValueConfig& kv);
  void ToConfig(KeyValueConfig& kv) const;
};

}  // namespace cassnat::model

#endif  // CASSNAT_MODEL_CONFIG_H_
