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

#include "cassnat/data/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "cassnat/common/error.h"

namespace cassnat::data {
namespace {

// Strongly connected iff every token reaches token 1 and is reached from it.
bool Irreducible(std::size_t v, const std::vector<double>& p) {
  for (bool forward : {true, false}) {
    std::vector<char> seen(v, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < v; ++b) {
        const double w = forward ? p[a * v + b] : p[b * v + a];
        if (w > 0.0 && !seen[b]) {
          seen[b] = 1;
          stack.push_back(b);
        }
      }
    }
    if (std::count(seen.begin(), seen.end(), 1) != static_cast<std::ptrdiff_t>(v)) return false;
  }
  return true;
}

std::vector<double> RandomTransitions(const CorpusSpec& spec, Rng& rng) {
  const std::size_t v = spec.vocab;
  std::vector<double> p(v * v, 0.0);
  std::vector<std::size_t> pool;
  for (std::size_t a = 0; a < v; ++a) {
    pool.clear();
    for (std::size_t b = 0; b < v; ++b)
      if (b != a) pool.push_back(b);
    double total = 0.0;
    for (std::size_t k = 0; k < spec.successors; ++k) {
      const std::size_t j = k + rng.Index(pool.size() - k);
      std::swap(pool[k], pool[j]);
      const double w = rng.Uniform(0.5, 1.5);
      p[a * v + pool[k]] = w;
      total += w;
    }
    for (std::size_t b = 0; b < v; ++b) p[a * v + b] /= total;
  }
  return p;
}

template <typename T>
bool ParseNumber(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t end = s.find(sep, begin);
    out.push_back(s.substr(begin, end == std::string_view::npos ? end : end - begin));
    if (end == std::string_view::npos) return out;
    begin = end + 1;
  }
}

template <typename T>
std::string JoinNumbers(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(xs[i]);
  }
  return s;
}

}  // namespace

void CorpusSpec::Validate() const {
  CASSNAT_CHECK(vocab >= 2, ErrorKind::kUsage, "corpus vocab must be >= 2");
  CASSNAT_CHECK(d_feat >= 1, ErrorKind::kUsage, "d_feat must be >= 1");
  CASSNAT_CHECK(successors >= 1 && successors <= vocab - 1, ErrorKind::kUsage,
                "successors must be in [1, vocab-1]");
  CASSNAT_CHECK(subsample >= 1, ErrorKind::kUsage, "subsample must be >= 1");
  CASSNAT_CHECK(dur_min >= subsample, ErrorKind::kUsage,
                "dur_min (" + std::to_string(dur_min) + ") must be >= subsample (" +
                    std::to_string(subsample) + ")");
  CASSNAT_CHECK(dur_max >= dur_min, ErrorKind::kUsage, "dur_max must be >= dur_min");
  CASSNAT_CHECK(len_min >= 1 && len_max >= len_min, ErrorKind::kUsage,
                "need 1 <= len_min <= len_max");
  CASSNAT_CHECK(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::kUsage,
                "sigma must be finite and >= 0");
  CASSNAT_CHECK(mean_scale > 0.0 && std::isfinite(mean_scale), ErrorKind::kUsage,
                "mean_scale must be finite and > 0");
}

CorpusSpec CorpusSpec::FromConfig(const KeyValueConfig& kv) {
  CorpusSpec s;
  s.vocab = kv.GetUint("vocab", s.vocab);
  s.d_feat = kv.GetUint("d_feat", s.d_feat);
  s.successors = kv.GetUint("successors", s.successors);
  s.dur_min = kv.GetUint("dur_min", s.dur_min);
  s.dur_max = kv.GetUint("dur_max", s.dur_max);
  s.mean_scale = kv.GetDouble("mean_scale", s.mean_scale);
  s.sigma = kv.GetDouble("sigma", s.sigma);
  s.len_min = kv.GetUint("len_min", s.len_min);
  s.len_max = kv.GetUint("len_max", s.len_max);
  s.n_train = kv.GetUint("n_train", s.n_train);
  s.n_dev = kv.GetUint("n_dev", s.n_dev);
  s.n_test = kv.GetUint("n_test", s.n_test);
  s.subsample = kv.GetUint("subsample", s.subsample);
  s.seed = kv.GetUint("data_seed", s.seed);
  s.Validate();
  return s;
}

void CorpusSpec::ToConfig(KeyValueConfig& kv) const {
  kv.Set("vocab", std::to_string(vocab));
  kv.Set("d_feat", std::to_string(d_feat));
  kv.Set("successors", std::to_string(successors));
  kv.Set("dur_min", std::to_string(dur_min));
  kv.Set("dur_max", std::to_string(dur_max));
  kv.Set("mean_scale", FormatDouble(mean_scale));
  kv.Set("sigma", FormatDouble(sigma));
  kv.Set("len_min", std::to_string(len_min));
  kv.Set("len_max", std::to_string(len_max));
  kv.Set("n_train", std::to_string(n_train));
  kv.Set("n_dev", std::to_string(n_dev));
  kv.Set("n_test", std::to_string(n_test));
  kv.Set("subsample", std::to_string(subsample));
  kv.Set("data_seed", std::to_string(seed));
}

MarkovSource MarkovSource::Build(const CorpusSpec& spec) {
  spec.Validate();
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(DeriveSeed(spec.seed, "markov", attempt));
    std::vector<double> p = RandomTransitions(spec, rng);
    if (Irreducible(spec.vocab, p)) return MarkovSource(spec.vocab, std::move(p));
  }
  Fail(ErrorKind::kUsage, "could not draw an irreducible transition matrix; raise successors");
}

MarkovSource::MarkovSource(std::size_t vocab, std::vector<double> transition)
    : vocab_(vocab), transition_(std::move(transition)) {
  CASSNAT_CHECK(vocab_ >= 1 && transition_.size() == vocab_ * vocab_, ErrorKind::kUsage,
                "transition matrix must be vocab x vocab");
  for (std::size_t a = 0; a < vocab_; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < vocab_; ++b) {
      const double w = transition_[a * vocab_ + b];
      CASSNAT_CHECK(w >= 0.0 && std::isfinite(w), ErrorKind::kUsage,
                    "degenerate transition matrix: negative or non-finite entry");
      s += w;
    }
    CASSNAT_CHECK(std::abs(s - 1.0) < 1e-9, ErrorKind::kUsage,
                  "degenerate transition matrix: row " + std::to_string(a + 1) +
                      " sums to " + FormatDouble(s));
  }
  CASSNAT_CHECK(Irreducible(vocab_, transition_), ErrorKind::kUsage,
                "degenerate transition matrix: chain is reducible");
  // Power iteration on the lazy chain (P + I) / 2, which is aperiodic and
  // shares P's stationary distribution.
  std::vector<double> pi(vocab_, 1.0 / static_cast<double>(vocab_)), next(vocab_);
  for (int it = 0; it < 200000; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t a = 0; a < vocab_; ++a)
      for (std::size_t b = 0; b < vocab_; ++b)
        next[b] += pi[a] * 0.5 * (transition_[a * vocab_ + b] + (a == b ? 1.0 : 0.0));
    double delta = 0.0;
    for (std::size_t b = 0; b < vocab_; ++b) delta = std::max(delta, std::abs(next[b] - pi[b]));
    pi.swap(next);
    if (delta < 1e-15) break;
  }
  stationary_.assign(vocab_ + 1, 0.0);
  std::copy(pi.begin(), pi.end(), stationary_.begin() + 1);
}

int MarkovSource::Draw(Rng& rng, const double* probs) const {
  const double u = rng.Uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t b = 0; b < vocab_; ++b) {
    if (probs[b] <= 0.0) continue;
    acc += probs[b];
    last = b;
    if (u < acc) return static_cast<int>(b + 1);
  }
  return static_cast<int>(last + 1);
}

std::vector<int> MarkovSource::Sample(Rng& rng, std::size_t length) const {
  std::vector<int> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double* probs = i == 0 ? stationary_.data() + 1
                                 : transition_.data() + static_cast<std::size_t>(out.back() - 1) * vocab_;
    out.push_back(Draw(rng, probs));
  }
  return out;
}

std::vector<std::vector<double>> EmissionMeans(const CorpusSpec& spec) {
  Rng rng(DeriveSeed(spec.seed, "emission", 0));
  std::vector<std::vector<double>> means(spec.vocab + 1);
  for (std::size_t v = 1; v <= spec.vocab; ++v) {
    means[v].resize(spec.d_feat);
    for (double& m : means[v]) m = spec.mean_scale * rng.Normal();
  }
  return means;
}

Utterance RenderUtterance(const CorpusSpec& spec, const std::vector<std::vector<double>>& means,
                          const MarkovSource& source, Rng& rng, std::string id) {
  Utterance u;
  u.id = std::move(id);
  const std::size_t length = spec.len_min + rng.Index(spec.len_max - spec.len_min + 1);
  u.tokens = source.Sample(rng, length);
  std::vector<std::size_t> durations(length);
  std::size_t total = 0;
  for (auto& d : durations) {
    d = spec.dur_min + rng.Index(spec.dur_max - spec.dur_min + 1);
    total += d;
    u.ends.push_back(total);
  }
  u.feats = nn::Tensor::Zeros(total, spec.d_feat);
  std::size_t t = 0;
  for (std::size_t k = 0; k < length; ++k) {
    const auto& mean = means[static_cast<std::size_t>(u.tokens[k])];
    for (std::size_t r = 0; r < durations[k]; ++r, ++t)
      for (std::size_t c = 0; c < spec.d_feat; ++c)
        u.feats.at(t, c) = static_cast<float>(mean[c] + spec.sigma * rng.Normal());
  }
  return u;
}

std::string ManifestPath(const std::string& dir, const std::string& split) {
  return (std::filesystem::path(dir) / (split + ".manifest")).string();
}

std::size_t GenerateCorpus(const CorpusSpec& spec, const std::string& dir) {
  spec.Validate();
  std::filesystem::create_directories(dir);
  const MarkovSource source = MarkovSource::Build(spec);
  const auto means = EmissionMeans(spec);
  const std::size_t counts[] = {spec.n_train, spec.n_dev, spec.n_test};
  std::size_t written = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::string split = kSplits[s];
    ManifestWriter writer(dir, split, spec.d_feat, spec.vocab);
    for (std::size_t i = 0; i < counts[s]; ++i) {
      Rng rng(DeriveSeed(spec.seed, split, i));
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%05zu", split.c_str(), i);
      writer.Write(RenderUtterance(spec, means, source, rng, id));
      ++written;
    }
    writer.Close();
  }
  KeyValueConfig kv;
  spec.ToConfig(kv);
  kv.Save((std::filesystem::path(dir) / "corpus.conf").string());
  return written;
}

ManifestWriter::ManifestWriter(const std::string& dir, const std::string& split,
                               std::size_t d_feat, std::size_t vocab)
    : path_(ManifestPath(dir, split)),
      os_(path_, std::ios::binary | std::ios::trunc),
      feats_((std::filesystem::path(dir) / (split + ".feats")).string(),
             static_cast<std::uint32_t>(d_feat)) {
  CASSNAT_CHECK(os_.good(), ErrorKind::kIo, "cannot write " + path_);
  os_ << kManifestMagic << "\t1\t" << split << ".feats\t" << d_feat << '\t' << vocab << '\n';
}

void ManifestWriter::Write(const Utterance& utt) {
  CASSNAT_CHECK(utt.feats.cols() == feats_.width(), ErrorKind::kShape,
                utt.id + ": feature width differs from the manifest");
  std::vector<float> rows(utt.feats.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<float>(utt.feats[i]);
  const std::uint64_t offset = feats_.Append(rows);
  os_ << utt.id << '\t' << utt.frames() << '\t' << JoinNumbers(utt.tokens) << '\t'
      << JoinNumbers(utt.ends) << '\t' << offset << '\n';
  CASSNAT_CHECK(os_.good(), ErrorKind::kIo, "error writing " + path_);
}

void ManifestWriter::Close() {
  feats_.Close();
  os_.flush();
  CASSNAT_CHECK(os_.good(), ErrorKind::kIo, "error closing " + path_);
  os_.close();
}

ManifestReader::ManifestReader(const std::string& manifest_path)
    : path_(manifest_path), is_(manifest_path, std::ios::binary) {
  CASSNAT_CHECK(is_.good(), ErrorKind::kIo, "cannot open " + path_);
  std::string header;
  if (!std::getline(is_, header)) Corrupt("missing header");
  next_offset_ = header.size() + 1;
  const auto f = Split(header, '\t');
  if (f.size() != 5 || f[0] != kManifestMagic) Corrupt("bad magic");
  if (f[1] != "1") Corrupt("unsupported manifest version '" + std::string(f[1]) + "'");
  if (!ParseNumber(f[3], d_feat_) || d_feat_ == 0) Corrupt("bad d_feat");
  if (!ParseNumber(f[4], vocab_) || vocab_ == 0) Corrupt("bad vocab");
  const auto feats_path = std::filesystem::path(path_).parent_path() / std::string(f[2]);
  feats_ = std::make_unique<FeatureReader>(feats_path.string());
  if (feats_->width() != d_feat_)
    Corrupt("feature file width " + std::to_string(feats_->width()) + " != d_feat " +
            std::to_string(d_feat_));
}

void ManifestReader::Corrupt(const std::string& what) const {
  Fail(ErrorKind::kIo, path_ + ": corrupt record at byte offset " +
                           std::to_string(line_offset_) + ": " + what);
}

bool ManifestReader::Next(Utterance& out) {
  std::string line;
  line_offset_ = next_offset_;
  if (!std::getline(is_, line)) return false;
  if (is_.eof()) Corrupt("truncated record (no trailing newline)");
  next_offset_ += line.size() + 1;
  const auto f = Split(line, '\t');
  if (f.size() != 5) Corrupt("expected 5 tab-separated fields, got " + std::to_string(f.size()));
  Utterance u;
  u.id = std::string(f[0]);
  if (u.id.empty()) Corrupt("empty id");
  std::size_t frames = 0;
  if (!ParseNumber(f[1], frames) || frames == 0) Corrupt("bad frame count");
  for (auto tok : Split(f[2], ' ')) {
    int v = 0;
    if (!ParseNumber(tok, v) || v < 1 || static_cast<std::size_t>(v) > vocab_)
      Corrupt("bad token '" + std::string(tok) + "'");
    u.tokens.push_back(v);
  }
  std::size_t prev = 0;
  for (auto e : Split(f[3], ' ')) {
    std::size_t v = 0;
    if (!ParseNumber(e, v) || v <= prev) Corrupt("bad span end '" + std::string(e) + "'");
    u.ends.push_back(v);
    prev = v;
  }
  if (u.ends.size() != u.tokens.size()) Corrupt("span count differs from token count");
  if (u.ends.back() != frames) Corrupt("spans do not tile the frames");
  std::uint64_t offset = 0;
  if (!ParseNumber(f[4], offset)) Corrupt("bad feature offset");
  const std::vector<float> rows = feats_->Read(offset, frames);
  u.feats = nn::Tensor::Zeros(frames, d_feat_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!std::isfinite(rows[i])) Corrupt("non-finite feature value");
    u.feats[i] = rows[i];
  }
  out = std::move(u);
  return true;
}

std::vector<Utterance> LoadManifest(const std::string& manifest_path) {
  ManifestReader reader(manifest_path);
  std::vector<Utterance> out;
  Utterance u;
  while (reader.Next(u)) out.push_back(std::move(u));
  return out;
}

}  // namespace cassnat::data
