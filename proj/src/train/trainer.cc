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

#include "cassnat/train/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cassnat/align/alignment_map.h"
#include "cassnat/common/error.h"
#include "cassnat/ctc/lattice.h"
#include "cassnat/eval/metrics.h"
#include "cassnat/eval/report.h"
#include "cassnat/model/loss.h"
#include "cassnat/nn/checkpoint.h"

namespace cassnat::train {
namespace {

using model::Model;
using model::ModelKind;

std::string CheckpointName(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt-%06zu.bin", step);
  return buf;
}

void Shuffle(std::vector<std::size_t>& xs, Rng& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[rng.Index(i)]);
}

double CtcGreedyWer(const Model& m, const std::vector<data::Utterance>& dev) {
  eval::EditCounts total;
  for (const data::Utterance& u : dev) {
    nn::Tape tape(false);
    const model::EncoderOutput enc = m.Encode(tape, u.feats, {});
    total += eval::Levenshtein(align::Collapse(ctc::BestPathAlign(enc.grid).labels), u.tokens);
  }
  return static_cast<double>(total.errors()) / static_cast<double>(total.ref_length);
}

}  // namespace

void TrainConfig::Validate() const {
  CASSNAT_CHECK(peak_lr > 0.0 && floor_lr >= 0.0 && floor_lr < peak_lr, ErrorKind::kUsage,
                "learning rates need 0 <= floor_lr < peak_lr");
  CASSNAT_CHECK(warmup_steps >= 1, ErrorKind::kUsage, "warmup_steps must be >= 1");
  CASSNAT_CHECK(decay_rate > 0.0 && decay_rate <= 1.0, ErrorKind::kUsage,
                "decay_rate must be in (0, 1]");
  CASSNAT_CHECK(batch_size >= 1 && max_steps >= 1 && average_last_k >= 1 && eval_every >= 1 &&
                    patience >= 1,
                ErrorKind::kUsage,
                "batch_size, max_steps, average_last_k, eval_every and patience must be >= 1");
  CASSNAT_CHECK(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0,
                ErrorKind::kUsage, "Adam needs betas in [0, 1) and eps > 0");
}

double TrainConfig::LrAt(std::size_t step) const {
  if (step < warmup_steps)
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (step < warmup_steps + hold_steps) return peak_lr;
  const double k = static_cast<double>(step - warmup_steps - hold_steps);
  return std::max(floor_lr, peak_lr * std::pow(decay_rate, k));
}

TrainConfig TrainConfig::FromConfig(const KeyValueConfig& kv, const std::string& prefix) {
  TrainConfig c;
  auto key = [&](const char* k) { return prefix + k; };
  c.peak_lr = kv.GetDouble(key("peak_lr"), c.peak_lr);
  c.floor_lr = kv.GetDouble(key("floor_lr"), c.floor_lr);
  c.warmup_steps = kv.GetUint(key("warmup_steps"), c.warmup_steps);
  c.hold_steps = kv.GetUint(key("hold_steps"), c.hold_steps);
  c.decay_rate = kv.GetDouble(key("decay_rate"), c.decay_rate);
  c.batch_size = kv.GetUint(key("batch_size"), c.batch_size);
  c.max_steps = kv.GetUint(key("max_steps"), c.max_steps);
  c.seed = kv.GetUint(key("seed"), c.seed);
  c.average_last_k = kv.GetUint(key("average_last_k"), c.average_last_k);
  c.eval_every = kv.GetUint(key("eval_every"), c.eval_every);
  c.patience = kv.GetUint(key("patience"), c.patience);
  c.beta1 = kv.GetDouble(key("adam_beta1"), c.beta1);
  c.beta2 = kv.GetDouble(key("adam_beta2"), c.beta2);
  c.adam_eps = kv.GetDouble(key("adam_eps"), c.adam_eps);
  c.Validate();
  return c;
}

void TrainConfig::ToConfig(KeyValueConfig& kv, const std::string& prefix) const {
  kv.Set(prefix + "peak_lr", FormatDouble(peak_lr));
  kv.Set(prefix + "floor_lr", FormatDouble(floor_lr));
  kv.Set(prefix + "warmup_steps", std::to_string(warmup_steps));
  kv.Set(prefix + "hold_steps", std::to_string(hold_steps));
  kv.Set(prefix + "decay_rate", FormatDouble(decay_rate));
  kv.Set(prefix + "batch_size", std::to_string(batch_size));
  kv.Set(prefix + "max_steps", std::to_string(max_steps));
  kv.Set(prefix + "seed", std::to_string(seed));
  kv.Set(prefix + "average_last_k", std::to_string(average_last_k));
  kv.Set(prefix + "eval_every", std::to_string(eval_every));
  kv.Set(prefix + "patience", std::to_string(patience));
  kv.Set(prefix + "adam_beta1", FormatDouble(beta1));
  kv.Set(prefix + "adam_beta2", FormatDouble(beta2));
  kv.Set(prefix + "adam_eps", FormatDouble(adam_eps));
}

Adam::Adam(nn::ParameterSet& params, double beta1, double beta2, double eps)
    : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const nn::Parameter& p : params_.all()) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

void Adam::Step(double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  std::size_t i = 0;
  for (nn::Parameter& p : params_.all()) {
    nn::Tensor& m = m_[i];
    nn::Tensor& v = v_[i];
    ++i;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      p.value[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

std::vector<std::vector<std::size_t>> MakeBatches(const std::vector<data::Utterance>& set,
                                                  std::size_t batch_size) {
  CASSNAT_CHECK(batch_size >= 1, ErrorKind::kUsage, "batch_size must be >= 1");
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set[a].frames() < set[b].frames();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + static_cast<long>(i),
                         order.begin() + static_cast<long>(std::min(order.size(), i + batch_size)));
  return batches;
}

void CheckFiniteGradients(const nn::ParameterSet& params, const std::string& where) {
  for (const nn::Parameter& p : params.all()) {
    for (std::size_t j = 0; j < p.grad.size(); ++j) {
      if (!std::isfinite(p.grad[j]))
        Fail(ErrorKind::kNumeric, "non-finite gradient in " + p.name + "[" + std::to_string(j) +
                                      "] = " + std::to_string(p.grad[j]) + " at " + where);
    }
  }
}

DevScore ScoreDev(const Model& m, const std::vector<data::Utterance>& dev) {
  CASSNAT_CHECK(!dev.empty(), ErrorKind::kUsage, "dev set is empty");
  DevScore s;
  std::size_t scored = 0;
  for (const data::Utterance& u : dev) {
    nn::Tape tape(false);
    const model::LossTerms t = model::JointLoss(tape, m, u.feats, u.tokens, {});
    if (t.skipped) continue;
    s.loss += tape.value(t.total)[0];
    ++scored;
  }
  CASSNAT_CHECK(scored > 0, ErrorKind::kInfeasible, "no dev utterance fits its frames");
  s.loss /= static_cast<double>(scored);
  if (m.kind() == ModelKind::kEncoder) {
    s.wer = CtcGreedyWer(m, dev);
  } else {
    eval::DecodeOptions o;
    o.mode = m.kind() == ModelKind::kAt ? eval::DecodeMode::kAtGreedy : eval::DecodeMode::kBpa;
    s.wer = eval::Evaluate(eval::Decoder(m, o), dev).wer;
  }
  return s;
}

TrainResult Train(Model& model, const std::vector<data::Utterance>& train_set,
                  const std::vector<data::Utterance>& dev_set, const TrainConfig& cfg,
                  const std::string& out_dir, const ProgressFn& progress) {
  cfg.Validate();
  CASSNAT_CHECK(!train_set.empty(), ErrorKind::kUsage, "training set is empty");
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  std::ofstream csv(dir / "train_log.csv");
  CASSNAT_CHECK(csv.good(), ErrorKind::kIo, "cannot write " + (dir / "train_log.csv").string());
  csv << "step,lr,train_loss,dev_loss,dev_wer\n";

  TrainResult result;
  nn::ParameterSet& params = model.params();
  Adam adam(params, cfg.beta1, cfg.beta2, cfg.adam_eps);
  Rng dropout_rng(DeriveSeed(cfg.seed, "dropout", 0));
  const nn::ForwardContext ctx{.train = true, .rng = &dropout_rng};
  std::vector<std::vector<std::size_t>> batches = MakeBatches(train_set, cfg.batch_size);

  double window_loss = 0.0;
  std::size_t window_utts = 0;
  double best_dev = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::size_t step = 0;
  bool done = false;
  for (std::size_t epoch = 0; !done; ++epoch) {
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(DeriveSeed(cfg.seed, "epoch", epoch));
    Shuffle(order, shuffle_rng);
    for (std::size_t b : order) {
      params.ZeroGrad();
      const double scale = 1.0 / static_cast<double>(batches[b].size());
      for (std::size_t i : batches[b]) {
        const data::Utterance& u = train_set[i];
        nn::Tape tape;
        const model::LossTerms t = model::JointLoss(tape, model, u.feats, u.tokens, ctx);
        if (t.skipped) {
          if (epoch == 0) ++result.skipped;
          continue;
        }
        const double loss = tape.value(t.total)[0];
        CASSNAT_CHECK(std::isfinite(loss), ErrorKind::kNumeric,
                      "non-finite loss on " + u.id + " at step " + std::to_string(step + 1));
        tape.Backward(tape.Scale(t.total, scale));
        window_loss += loss;
        ++window_utts;
      }
      CheckFiniteGradients(params, "step " + std::to_string(step + 1));
      const double lr = cfg.LrAt(step + 1);
      adam.Step(lr);
      ++step;

      if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
        const DevScore dev = ScoreDev(model, dev_set);
        LogRow row{step, lr, window_utts ? window_loss / static_cast<double>(window_utts) : 0.0,
                   dev.loss, dev.wer};
        window_loss = 0.0;
        window_utts = 0;
        result.log.push_back(row);
        csv << row.step << ',' << FormatDouble(row.lr) << ',' << FormatDouble(row.train_loss)
            << ',' << FormatDouble(row.dev_loss) << ',' << FormatDouble(row.dev_wer) << '\n';
        csv.flush();
        const std::string path = (dir / CheckpointName(step)).string();
        nn::SaveCheckpoint(path, params);
        result.checkpoints.push_back(path);
        if (progress) progress(row);
        if (dev.loss < best_dev) {
          best_dev = dev.loss;
          stale = 0;
        } else if (++stale >= cfg.patience) {
          result.early_stopped = true;
          done = true;
        }
      }
      if (step >= cfg.max_steps) done = true;
      if (done) break;
    }
  }
  result.steps = step;

  const std::size_t k = std::min(cfg.average_last_k, result.checkpoints.size());
  std::vector<std::vector<nn::NamedTensor>> last;
  for (std::size_t i = result.checkpoints.size() - k; i < result.checkpoints.size(); ++i)
    last.push_back(nn::LoadCheckpoint(result.checkpoints[i]));
  nn::LoadInto(nn::AverageCheckpoints(last), params, true);
  result.averaged = (dir / "final.bin").string();
  nn::SaveCheckpoint(result.averaged, params);
  return result;
}

void LoadPretrainedEncoder(const std::string& path, Model& model) {
  const std::size_t n = nn::LoadInto(nn::LoadCheckpoint(path), model.params(), true, "encoder.");
  CASSNAT_CHECK(n > 0, ErrorKind::kShape, "model has no encoder parameters to load");
}

}  // namespace cassnat::train
