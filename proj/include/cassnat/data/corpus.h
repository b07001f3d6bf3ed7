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

#ifndef CASSNAT_DATA_CORPUS_H_
#define CASSNAT_DATA_CORPUS_H_

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "cassnat/common/config.h"
#include "cassnat/common/matrix_io.h"
#include "cassnat/common/random.h"
#include "cassnat/nn/tensor.h"

namespace cassnat::data {

struct CorpusSpec {
  std::size_t vocab = 32;        // token ids 1..vocab; 0 is reserved for blank
  std::size_t d_feat = 16;
  std::size_t successors = 4;    // nonzero entries per transition row
  std::size_t dur_min = 8;       // raw frames per token
  std::size_t dur_max = 24;
  double mean_scale = 1.0;       // token means are N(0, mean_scale^2)
  double sigma = 1.5;            // frame noise
  std::size_t len_min = 5;       // tokens per utterance
  std::size_t len_max = 15;
  std::size_t n_train = 2000;
  std::size_t n_dev = 200;
  std::size_t n_test = 200;
  std::size_t subsample = 4;
  std::uint64_t seed = 1;

  void Validate() const;
  static CorpusSpec FromConfig(const KeyValueConfig& kv);
  void ToConfig(KeyValueConfig& kv) const;
};

// First-order Markov source over tokens 1..V with no self-transitions.
// Sequences start from the stationary distribution, so every position is
// marginally stationary.
class MarkovSource {
 public:
  static MarkovSource Build(const CorpusSpec& spec);
  // Throws kUsage unless rows are distributions and the chain has a
  // unique, strictly positive stationary distribution.
  MarkovSource(std::size_t vocab, std::vector<double> transition);

  std::size_t vocab() const { return vocab_; }
  // P(next = b | current = a), a, b in 1..V.
  double transition(int a, int b) const {
    return transition_[static_cast<std::size_t>(a - 1) * vocab_ + static_cast<std::size_t>(b - 1)];
  }
  // Indexed by token id; entry 0 is unused.
  const std::vector<double>& stationary() const { return stationary_; }
  std::vector<int> Sample(Rng& rng, std::size_t length) const;

 private:
  int Draw(Rng& rng, const double* probs) const;

  std::size_t vocab_;
  std::vector<double> transition_;
  std::vector<double> stationary_;
};

struct Utterance {
  std::string id;
  nn::Tensor feats;                  // n_frames x d_feat
  std::vector<int> tokens;
  std::vector<std::size_t> ends;     // 1-based inclusive end frame per token

  std::size_t frames() const { return feats.rows(); }
  // 0-based first raw frame of token u.
  std::size_t start(std::size_t u) const { return u == 0 ? 0 : ends[u - 1]; }
  bool operator==(const Utterance& o) const {
    return id == o.id && tokens == o.tokens && ends == o.ends &&
           feats.shape() == o.feats.shape() && feats.values() == o.feats.values();
  }
};

// Renders tokens with per-token durations; fully determined by `rng`.
Utterance RenderUtterance(const CorpusSpec& spec, const std::vector<std::vector<double>>& means,
                          const MarkovSource& source, Rng& rng, std::string id);

// Per-token emission means, indexed by token id (entry 0 unused).
std::vector<std::vector<double>> EmissionMeans(const CorpusSpec& spec);

inline constexpr const char* kSplits[] = {"train", "dev", "test"};

// Writes <dir>/<split>.manifest and <dir>/<split>.feats for every split,
// plus <dir>/corpus.conf. Returns the number of utterances written.
std::size_t GenerateCorpus(const CorpusSpec& spec, const std::string& dir);

// Manifest layout:
//   #CASSMANIFEST<TAB>1<TAB>feats-file<TAB>d_feat<TAB>vocab
//   id<TAB>n_frames<TAB>tokens<TAB>ends<TAB>feature byte offset
// Tokens and ends are space separated. The feature file sits next to the
// manifest.
inline constexpr const char* kManifestMagic = "#CASSMANIFEST";

class ManifestWriter {
 public:
  ManifestWriter(const std::string& dir, const std::string& split, std::size_t d_feat,
                 std::size_t vocab);
  void Write(const Utterance& utt);
  void Close();

 private:
  std::string path_;
  std::ofstream os_;
  FeatureWriter feats_;
};

// Streams utterances in manifest order. Corrupt records raise kIo errors
// naming the manifest byte offset of the bad line.
class ManifestReader {
 public:
  explicit ManifestReader(const std::string& manifest_path);
  bool Next(Utterance& out);
  std::size_t d_feat() const { return d_feat_; }
  std::size_t vocab() const { return vocab_; }

 private:
  [[noreturn]] void Corrupt(const std::string& what) const;

  std::string path_;
  std::ifstream is_;
  std::unique_ptr<FeatureReader> feats_;
  std::size_t d_feat_ = 0;
  std::size_t vocab_ = 0;
  std::uint64_t line_offset_ = 0;
  std::uint64_t next_offset_ = 0;
};

std::vector<Utterance> LoadManifest(const std::string& manifest_path);
std::string ManifestPath(const std::string& dir, const std::string& split);

}  // namespace cassnat::data

#endif  // CASSNAT_DATA_CORPUS_H_
