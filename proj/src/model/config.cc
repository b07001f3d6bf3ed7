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

#include "cassnat/model/config.h"

#include "cassnat/common/error.h"

namespace cassnat::model {

Frontend ParseFrontend(const std::string& s) {
  if (s == "stack-project") return Frontend::kStackProject;
  if (s == "conv") return Frontend::kConv;
  Fail(ErrorKind::kUsage, "unknown frontend: " + s);
}

std::string ToString(Frontend f) {
  return f == Frontend::kConv ? "conv" : "stack-project";
}

void ModelConfig::Validate() const {
  CASSNAT_CHECK(heads >= 1 && d_model % heads == 0, ErrorKind::kUsage,
                "heads must divide d_model");
  CASSNAT_CHECK(subsample >= 1, ErrorKind::kUsage, "subsample must be >= 1");
  CASSNAT_CHECK(task_ratio >= 0.0, ErrorKind::kUsage, "task_ratio must be >= 0");
  CASSNAT_CHECK(vocab >= 1 && d_feat >= 1 && d_model >= 2 && d_ff >= 1,
                ErrorKind::kUsage, "model sizes must be positive");
  CASSNAT_CHECK(dropout >= 0.0 && dropout < 1.0, ErrorKind::kUsage,
                "dropout must be in [0, 1)");
  CASSNAT_CHECK(label_smooth >= 0.0 && label_smooth < 1.0, ErrorKind::kUsage,
                "label_smooth must be in [0, 1)");
  if (frontend == Frontend::kConv) {
    CASSNAT_CHECK(subsample == 4, ErrorKind::kUsage,
                  "the conv frontend subsamples by exactly 4");
    CASSNAT_CHECK(conv_channels >= 1, ErrorKind::kUsage, "conv_channels must be >= 1");
  }
}

ModelConfig ModelConfig::FromConfig(const KeyValueConfig& kv) {
  ModelConfig c;
  c.n_enc = kv.GetUint("n_enc", c.n_enc);
  c.n_self = kv.GetUint("n_self", c.n_self);
  c.n_mix = kv.GetUint("n_mix", c.n_mix);
  c.n_at = kv.GetUint("n_at", c.n_at);
  c.heads = kv.GetUint("heads", c.heads);
  c.d_model = kv.GetUint("d_model", c.d_model);
  c.d_ff = kv.GetUint("d_ff", c.d_ff);
  c.vocab = kv.GetUint("vocab", c.vocab);
  c.d_feat = kv.GetUint("d_feat", c.d_feat);
  c.subsample = kv.GetUint("subsample", c.subsample);
  c.conv_channels = kv.GetUint("conv_channels", c.conv_channels);
  c.frontend = ParseFrontend(kv.GetString("frontend", ToString(c.frontend)));
  c.dropout = kv.GetDouble("dropout", c.dropout);
  c.label_smooth = kv.GetDouble("label_smooth", c.label_smooth);
  c.task_ratio = kv.GetDouble("task_ratio", c.task_ratio);
  c.mask_mode = nn::ParseMaskMode(kv.GetString("mask_mode", nn::ToString(c.mask_mode)));
  c.extend_last = kv.GetBool("extend_last", c.extend_last);
  c.Validate();
  return c;
}

void ModelConfig::ToConfig(KeyValueConfig& kv) const {
  kv.Set("n_enc", std::to_string(n_enc));
  kv.Set("n_self", std::to_string(n_self));
  kv.Set("n_mix", std::to_string(n_mix));
  kv.Set("n_at", std::to_string(n_at));
  kv.Set("heads", std::to_string(heads));
  kv.Set("d_model", std::to_string(d_model));
  kv.Set("d_ff", std::to_string(d_ff));
  kv.Set("vocab", std::to_string(vocab));
  kv.Set("d_feat", std::to_string(d_feat));
  kv.Set("subsample", std::to_string(subsample));
  kv.Set("conv_channels", std::to_string(conv_channels));
  kv.Set("frontend", ToString(frontend));
  kv.Set("dropout", FormatDouble(dropout));
  kv.Set("label_smooth", FormatDouble(label_smooth));
  kv.Set("task_ratio", FormatDouble(task_ratio));
  kv.Set("mask_mode", nn::ToString(mask_mode));
  kv.Set("extend_last", extend_last ? "true" : "false");
}

}  // namespace cassnat::model
