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

#include "cassnat/pipeline/pipeline.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cassnat/align/alignment_map.h"
#include "cassnat/common/error.h"
#include "cassnat/ctc/lattice.h"
#include "cassnat/nn/checkpoint.h"

namespace cassnat::pipeline {
namespace {

namespace fs = std::filesystem;
using model::ModelKind;

// Keys written by the pipeline itself rather than set by users.
constexpr const char* kBookkeeping[] = {"kind", "init_encoder"};

const char* Prefix(ModelKind kind) {
  switch (kind) {
    case ModelKind::kEncoder: return kPretrainPrefix;
    case ModelKind::kNat: return kNatPrefix;
    case ModelKind::kAt: return kAtPrefix;
  }
  return "";
}

std::string ReadFile(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string Label(int k) { return k == 0 ? "_" : std::to_string(k); }

std::string JoinTokens(std::span<const int> xs, const char* sep = " ") {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(xs[i]);
  }
  return s;
}

}  // namespace

train::TrainConfig DefaultStage(ModelKind kind) {
  train::TrainConfig c;
  c.peak_lr = 1e-3;
  c.floor_lr = 1e-5;
  c.batch_size = 8;
  c.eval_every = 250;
  c.average_last_k = 5;
  c.patience = 10;
  switch (kind) {
    case ModelKind::kEncoder:
      c.warmup_steps = 200;
      c.hold_steps = 1000;
      c.max_steps = 2500;
      c.decay_rate = 0.997;
      break;
    case ModelKind::kNat:
      c.warmup_steps = 200;
      c.hold_steps = 1800;
      c.max_steps = 3750;
      c.decay_rate = 0.9975;
      break;
    case ModelKind::kAt:
      c.warmup_steps = 200;
      c.hold_steps = 1500;
      c.max_steps = 3000;
      c.decay_rate = 0.997;
      break;
  }
  return c;
}

RunConfig RunConfig::Resolve(const KeyValueConfig& given) {
  KeyValueConfig defaults;
  data::CorpusSpec{}.ToConfig(defaults);
  model::ModelConfig{}.ToConfig(defaults);
  for (ModelKind k : {ModelKind::kEncoder, ModelKind::kNat, ModelKind::kAt})
    DefaultStage(k).ToConfig(defaults, Prefix(k));
  eval::DecodeOptions{}.ToConfig(defaults);
  defaults.Set("model_seed", "1");
  defaults.Set("dev_limit", "0");
  for (const auto& [key, value] : given.values()) {
    bool known = defaults.Has(key);
    for (const char* b : kBookkeeping) known = known || key == b;
    CASSNAT_CHECK(known, ErrorKind::kUsage, "unknown configuration key '" + key + "'");
  }
  defaults.Merge(given);

  RunConfig run;
  run.corpus = data::CorpusSpec::FromConfig(defaults);
  run.model = model::ModelConfig::FromConfig(defaults);
  run.model_seed = defaults.GetUint("model_seed", 1);
  run.pretrain = train::TrainConfig::FromConfig(defaults, kPretrainPrefix);
  run.nat = train::TrainConfig::FromConfig(defaults, kNatPrefix);
  run.at = train::TrainConfig::FromConfig(defaults, kAtPrefix);
  run.decode = eval::DecodeOptions::FromConfig(defaults);
  run.dev_limit = defaults.GetUint("dev_limit", 0);
  CASSNAT_CHECK(run.corpus.subsample == run.model.subsample, ErrorKind::kUsage,
                "corpus and model subsample factors differ");

  // Normalised text for every value, so equal settings serialise equally.
  run.corpus.ToConfig(run.kv);
  run.model.ToConfig(run.kv);
  for (ModelKind k : {ModelKind::kEncoder, ModelKind::kNat, ModelKind::kAt})
    run.Stage(k).ToConfig(run.kv, Prefix(k));
  run.decode.ToConfig(run.kv);
  run.kv.Set("model_seed", std::to_string(run.model_seed));
  run.kv.Set("dev_limit", std::to_string(run.dev_limit));
  for (const char* b : kBookkeeping)
    if (given.Has(b)) run.kv.Set(b, given.GetString(b, ""));
  return run;
}

train::TrainConfig& RunConfig::Stage(ModelKind kind) {
  return kind == ModelKind::kEncoder ? pretrain : kind == ModelKind::kNat ? nat : at;
}

const train::TrainConfig& RunConfig::Stage(ModelKind kind) const {
  return kind == ModelKind::kEncoder ? pretrain : kind == ModelKind::kNat ? nat : at;
}

void WriteImmutableConfig(const KeyValueConfig& kv, const std::string& path) {
  const std::string text = kv.Serialize();
  if (fs::exists(path)) {
    CASSNAT_CHECK(ReadFile(path) == text, ErrorKind::kUsage,
                  path + " already records a different configuration; use a fresh output path");
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  kv.Save(path);
}

std::size_t GenerateData(const RunConfig& run, const std::string& data_dir) {
  WriteImmutableConfig(run.kv, (fs::path(data_dir) / kRunConfigName).string());
  return data::GenerateCorpus(run.corpus, data_dir);
}

std::vector<data::Utterance> LoadSplit(const std::string& data_dir, const std::string& split,
                                       std::size_t limit) {
  data::ManifestReader reader(data::ManifestPath(data_dir, split));
  std::vector<data::Utterance> out;
  data::Utterance u;
  while ((limit == 0 || out.size() < limit) && reader.Next(u)) out.push_back(std::move(u));
  CASSNAT_CHECK(!out.empty(), ErrorKind::kIo, "split '" + split + "' in " + data_dir + " is empty");
  return out;
}

train::TrainResult TrainStage(const RunConfig& run, ModelKind kind, const std::string& data_dir,
                              const std::string& out_dir, const std::string& init_encoder,
                              const train::ProgressFn& progress) {
  const auto train_set = LoadSplit(data_dir, "train");
  const auto dev_set = LoadSplit(data_dir, "dev", run.dev_limit);
  CASSNAT_CHECK(train_set.front().feats.cols() == run.model.d_feat, ErrorKind::kUsage,
                "corpus feature width " + std::to_string(train_set.front().feats.cols()) +
                    " differs from model d_feat " + std::to_string(run.model.d_feat));

  KeyValueConfig record = run.kv;
  record.Set("kind", model::ToString(kind));
  record.Set("init_encoder", init_encoder);
  WriteImmutableConfig(record, (fs::path(out_dir) / kRunConfigName).string());

  model::Model m(kind, run.model, run.model_seed);
  if (!init_encoder.empty()) train::LoadPretrainedEncoder(init_encoder, m);
  return train::Train(m, train_set, dev_set, run.Stage(kind), out_dir, progress);
}

std::unique_ptr<model::Model> LoadTrained(const std::string& dir) {
  const std::string conf = (fs::path(dir) / kRunConfigName).string();
  const std::string weights = (fs::path(dir) / "final.bin").string();
  CASSNAT_CHECK(fs::exists(conf) && fs::exists(weights), ErrorKind::kIo,
                dir + " is not a trained model directory (needs run.conf and final.bin)");
  const KeyValueConfig kv = KeyValueConfig::Load(conf);
  CASSNAT_CHECK(kv.Has("kind"), ErrorKind::kIo, conf + " does not name a model kind");
  const RunConfig run = RunConfig::Resolve(kv);
  auto m = std::make_unique<model::Model>(model::ParseModelKind(kv.GetString("kind", "")),
                                          run.model, run.model_seed);
  nn::LoadInto(nn::LoadCheckpoint(weights), m->params(), true);
  return m;
}

std::string AlignDebugReport(const model::Model& model, const data::Utterance& utt) {
  nn::Tape tape(false);
  const model::EncoderOutput enc = model.Encode(tape, utt.feats, {});
  const ctc::PosteriorGrid& grid = enc.grid;
  std::ostringstream os;
  os << "utterance " << utt.id << ": " << utt.frames() << " raw frames, " << grid.frames()
     << " encoder frames\n";
  os << "reference  " << JoinTokens(utt.tokens) << "\n";
  os << "grid (frame: top1 p1 | top2 p2)\n";
  char line[96];
  for (std::size_t t = 0; t < grid.frames(); ++t) {
    const int a = grid.Top1(t), b = grid.Top2(t);
    std::snprintf(line, sizeof(line), "  %3zu: %3s %.4f | %3s %.4f\n", t, Label(a).c_str(),
                  grid.prob(t, static_cast<std::size_t>(a)), Label(b).c_str(),
                  grid.prob(t, static_cast<std::size_t>(b)));
    os << line;
  }
  auto section = [&](const std::string& name, const ctc::Alignment& a) {
    os << name << " alignment (log p = " << FormatDouble(a.logprob) << ")\n";
    os << "  Z = {";
    for (std::size_t t = 0; t < a.labels.size(); ++t) os << (t ? "," : "") << Label(a.labels[t]);
    os << "}\n";
    const ctc::TokenSeq collapsed = align::Collapse(a.labels);
    os << "  collapse = [" << JoinTokens(collapsed, ",") << "]\n";
    if (collapsed.empty()) {
      os << "  no tokens triggered\n";
      return;
    }
    const align::TriggerMaskSet masks =
        align::TriggerMasks(a.labels, {.extend_last = model.config().extend_last});
    os << "  boundaries = (";
    for (std::size_t u = 0; u < masks.boundaries.size(); ++u)
      os << (u ? "," : "") << masks.boundaries[u] + 1;
    os << ")\n";
    for (std::size_t u = 0; u < masks.token_count; ++u)
      os << "  mask[" << masks.tokens[u] << "] = " << align::FormatMaskRow(masks, u) << "\n";
  };
  section("best-path", ctc::BestPathAlign(grid));
  if (ctc::Feasible(grid.frames(), utt.tokens)) {
    section("reference", ctc::ViterbiAlign(grid, utt.tokens));
  } else {
    os << "reference alignment: infeasible for " << grid.frames() << " frames\n";
  }
  return os.str();
}

}  // namespace cassnat::pipeline
