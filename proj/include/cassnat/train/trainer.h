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

#ifndef CASSNAT_TRAIN_TRAINER_H_
#define CASSNAT_TRAIN_TRAINER_H_

#include <functional>
#include <string>
#include <vector>

#include "cassnat/common/config.h"
#include "cassnat/data/corpus.h"
#include "cassnat/model/model.h"
#include "cassnat/nn/parameter.h"

namespace cassnat::train {

// Learning rate: linear ramp from 0 to peak over warmup_steps, held for
// hold_steps, then peak * decay_rate^(steps past the hold), floored.
struct TrainConfig {
  double peak_lr = 1e-3;
  double floor_lr = 1e-5;
  std::size_t warmup_steps = 300;
  std::size_t hold_steps = 1500;
  double decay_rate = 0.998;
  std::size_t batch_size = 8;      // utterances per update
  std::size_t max_steps = 3000;
  std::uint64_t seed = 1;
  std::size_t average_last_k = 5;
  std::size_t eval_every = 250;    // steps between dev evaluations
  std::size_t patience = 10;       // evaluations without dev-loss gain
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-9;

  void Validate() const;
  double LrAt(std::size_t step) const;
  // Keys are prefixed, e.g. "<prefix>peak_lr", so one file can carry a
  // schedule per training stage.
  static TrainConfig FromConfig(const KeyValueConfig& kv, const std::string& prefix = "");
  void ToConfig(KeyValueConfig& kv, const std::string& prefix = "") const;
};

class Adam {
 public:
  Adam(nn::ParameterSet& params, double beta1, double beta2, double eps);
  // Applies one update from the accumulated gradients.
  void Step(double lr);
  std::size_t steps() const { return steps_; }

 private:
  nn::ParameterSet& params_;
  double beta1_, beta2_, eps_;
  std::vector<nn::Tensor> m_, v_;
  std::size_t steps_ = 0;
};

// Length-sorted buckets of `batch_size` utterance indices, ties by index.
std::vector<std::vector<std::size_t>> MakeBatches(const std::vector<data::Utterance>& set,
                                                  std::size_t batch_size);

// Throws kNumeric naming the first parameter whose gradient is not finite.
void CheckFiniteGradients(const nn::ParameterSet& params, const std::string& where);

struct LogRow {
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean per-utterance loss since the last row
  double dev_loss = 0.0;
  double dev_wer = 0.0;     // fraction
};

struct TrainResult {
  std::vector<LogRow> log;
  std::size_t steps = 0;
  bool early_stopped = false;
  std::size_t skipped = 0;                // infeasible training utterances
  std::vector<std::string> checkpoints;   // one per evaluation
  std::string averaged;                   // mean of the last k, loaded into the model
};

using ProgressFn = std::function<void(const LogRow&)>;

struct DevScore {
  double loss = 0.0;
  double wer = 0.0;
};

// Mean per-utterance joint loss without dropout, plus greedy WER: CTC best
// path for an encoder, best-path alignment for NAT, greedy for AT.
DevScore ScoreDev(const model::Model& model, const std::vector<data::Utterance>& dev);

// Trains in place. Writes <out_dir>/ckpt-<step>.bin at every evaluation,
// <out_dir>/final.bin (average of the last k) and <out_dir>/train_log.csv.
TrainResult Train(model::Model& model, const std::vector<data::Utterance>& train_set,
                  const std::vector<data::Utterance>& dev_set, const TrainConfig& cfg,
                  const std::string& out_dir, const ProgressFn& progress = {});

// Copies a pretrained encoder checkpoint into `model`. Every encoder
// parameter must be present with a matching shape.
void LoadPretrainedEncoder(const std::string& path, model::Model& model);

}  // namespace cassnat::train

#endif  // CASSNAT_TRAIN_TRAINER_H_
