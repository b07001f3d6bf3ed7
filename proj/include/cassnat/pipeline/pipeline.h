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

#ifndef CASSNAT_PIPELINE_PIPELINE_H_
#define CASSNAT_PIPELINE_PIPELINE_H_

#include <memory>
#include <string>
#include <vector>

#include "cassnat/common/config.h"
#include "cassnat/data/corpus.h"
#include "cassnat/eval/decode.h"
#include "cassnat/model/model.h"
#include "cassnat/train/trainer.h"

namespace cassnat::pipeline {

// Training keys carry a stage prefix: "pretrain.", "nat." or "at.".
inline constexpr const char* kPretrainPrefix = "pretrain.";
inline constexpr const char* kNatPrefix = "nat.";
inline constexpr const char* kAtPrefix = "at.";

// Name of the resolved configuration written next to every output.
inline constexpr const char* kRunConfigName = "run.conf";

// One flat configuration for every stage. Missing keys take the desk
// defaults; `kv` holds the full resolved key set.
struct RunConfig {
  KeyValueConfig kv;
  data::CorpusSpec corpus;
  model::ModelConfig model;
  std::uint64_t model_seed = 1;
  train::TrainConfig pretrain, nat, at;
  eval::DecodeOptions decode;
  std::size_t dev_limit = 0;  // dev utterances scored during training; 0 = all

  static RunConfig Resolve(const KeyValueConfig& given);
  train::TrainConfig& Stage(model::ModelKind kind);
  const train::TrainConfig& Stage(model::ModelKind kind) const;
};

// Desk-scale training schedule for one stage.
train::TrainConfig DefaultStage(model::ModelKind kind);

// Writes `kv` to `path` unless an identical file is already there. A file
// with different contents is never replaced (kUsage).
void WriteImmutableConfig(const KeyValueConfig& kv, const std::string& path);

std::size_t GenerateData(const RunConfig& run, const std::string& data_dir);

// First `limit` utterances of a split (0 = all).
std::vector<data::Utterance> LoadSplit(const std::string& data_dir, const std::string& split,
                                       std::size_t limit = 0);

// Trains a model of `kind` on <data_dir>/train with <data_dir>/dev for
// early stopping, writing checkpoints, train_log.csv, final.bin and
// run.conf to `out_dir`. `init_encoder` (optional) is a checkpoint whose
// encoder weights seed the model.
train::TrainResult TrainStage(const RunConfig& run, model::ModelKind kind,
                              const std::string& data_dir, const std::string& out_dir,
                              const std::string& init_encoder = "",
                              const train::ProgressFn& progress = {});

// Rebuilds a trained model from <dir>/run.conf and <dir>/final.bin.
std::unique_ptr<model::Model> LoadTrained(const std::string& dir);

// Human-readable dump of one utterance under `model`: the top-2 posterior
// per frame, then for the best-path and reference-constrained alignments
// the frame labels in brace notation, collapsed tokens, end boundaries
// and one trigger-mask row per token.
std::string AlignDebugReport(const model::Model& model, const data::Utterance& utt);

}  // namespace cassnat::pipeline

#endif  // CASSNAT_PIPELINE_PIPELINE_H_
