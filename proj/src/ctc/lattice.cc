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

#include "cassnat/ctc/lattice.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "cassnat/common/error.h"
#include "cassnat/common/random.h"

namespace cassnat::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Extended label sequence: blank, y1, blank, y2, ..., yU, blank.
std::vector<int> Extend(std::span<const int> ref) {
  std::vector<int> ext(2 * ref.size() + 1, kBlank);
  for (std::size_t u = 0; u < ref.size(); ++u) ext[2 * u + 1] = ref[u];
  return ext;
}

bool CanSkip(const std::vector<int>& ext, std::size_t s) {
  return s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2];
}

void CheckRef(std::span<const int> ref, std::size_t vocab, std::size_t frames) {
  CASSNAT_CHECK(!ref.empty(), ErrorKind::kInfeasible, "empty reference");
  for (int y : ref)
    CASSNAT_CHECK(y > 0 && static_cast<std::size_t>(y) < vocab,
                  ErrorKind::kInfeasible,
                  "reference token " + std::to_string(y) + " outside 1.." +
                      std::to_string(vocab - 1));
  CASSNAT_CHECK(Feasible(frames, ref), ErrorKind::kInfeasible,
                "reference of " + std::to_string(ref.size()) + " tokens needs " +
                    std::to_string(MinFramesFor(ref)) + " frames, have " +
                    std::to_string(frames));
}

}  // namespace

std::size_t MinFramesFor(std::span<const int> ref) {
  std::size_t n = ref.size();
  for (std::size_t i = 1; i < ref.size(); ++i)
    if (ref[i] == ref[i - 1]) ++n;
  return n;
}

bool Feasible(std::size_t frames, std::span<const int> ref) {
  return !ref.empty() && MinFramesFor(ref) <= frames;
}

ForwardBackwardResult CtcForwardBackward(const nn::Tensor& log_probs,
                                         std::span<const int> ref,
                                         bool want_occupancy) {
  const std::size_t T = log_probs.rows(), C = log_probs.cols();
  CheckRef(ref, C, T);
  const std::vector<int> ext = Extend(ref);
  const std::size_t S = ext.size();
  auto lp = [&](std::size_t t, std::size_t s) {
    return log_probs.at(t, static_cast<std::size_t>(ext[s]));
  };

  std::vector<double> alpha(T * S, kNegInf);
  alpha[0] = lp(0, 0);
  alpha[1] = lp(0, 1);
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = &alpha[(t - 1) * S];
    double* cur = &alpha[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      double a = prev[s];
      if (s >= 1) a = LogAdd(a, prev[s - 1]);
      if (CanSkip(ext, s)) a = LogAdd(a, prev[s - 2]);
      cur[s] = a == kNegInf ? kNegInf : a + lp(t, s);
    }
  }
  ForwardBackwardResult res;
  res.log_likelihood =
      LogAdd(alpha[(T - 1) * S + S - 1], alpha[(T - 1) * S + S - 2]);
  if (!want_occupancy) return res;

  std::vector<double> beta(T * S, kNegInf);
  beta[(T - 1) * S + S - 1] = lp(T - 1, S - 1);
  beta[(T - 1) * S + S - 2] = lp(T - 1, S - 2);
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* next = &beta[(t + 1) * S];
    double* cur = &beta[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      double b = next[s];
      if (s + 1 < S) b = LogAdd(b, next[s + 1]);
      if (s + 2 < S && CanSkip(ext, s + 2)) b = LogAdd(b, next[s + 2]);
      cur[s] = b == kNegInf ? kNegInf : b + lp(t, s);
    }
  }
  // alpha and beta both include the emission at t, so subtract it once.
  res.occupancy = nn::Tensor::Zeros(T, C);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      const double a = alpha[t * S + s], b = beta[t * S + s];
      if (a == kNegInf || b == kNegInf) continue;
      res.occupancy.at(t, static_cast<std::size_t>(ext[s])) +=
          std::exp(a + b - lp(t, s) - res.log_likelihood);
    }
  return res;
}

double CtcLoss(const PosteriorGrid& grid, std::span<const int> ref) {
  return -CtcForwardBackward(grid.LogProbTensor(), ref, false).log_likelihood;
}

nn::Var CtcLossOp(nn::Tape& tape, nn::Var logits, std::span<const int> ref) {
  std::vector<int> target(ref.begin(), ref.end());
  return tape.CustomLoss(logits, [target](const nn::Tensor& x, nn::Tensor& dx) {
    const std::size_t T = x.rows(), C = x.cols();
    nn::Tensor log_probs = nn::Tensor::Zeros(T, C);
    for (std::size_t t = 0; t < T; ++t) {
      auto r = x.row(t);
      const double mx = *std::max_element(r.begin(), r.end());
      double z = 0.0;
      for (double v : r) z += std::exp(v - mx);
      const double lse = mx + std::log(z);
      for (std::size_t k = 0; k < C; ++k) log_probs.at(t, k) = r[k] - lse;
    }
    auto fb = CtcForwardBackward(log_probs, target, true);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < C; ++k)
        dx.at(t, k) = std::exp(log_probs.at(t, k)) - fb.occupancy.at(t, k);
    return -fb.log_likelihood;
  });
}

Alignment ViterbiAlign(const PosteriorGrid& grid, std::span<const int> ref) {
  const std::size_t T = grid.frames();
  CheckRef(ref, grid.vocab(), T);
  const std::vector<int> ext = Extend(ref);
  const std::size_t S = ext.size();
  auto lp = [&](std::size_t t, std::size_t s) {
    return grid.log_prob(t, static_cast<std::size_t>(ext[s]));
  };

  std::vector<double> delta(T * S, kNegInf);
  std::vector<unsigned char> back(T * S, 0);  // 0 stay, 1 from s-1, 2 skip
  delta[0] = lp(0, 0);
  delta[1] = lp(0, 1);
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = &delta[(t - 1) * S];
    for (std::size_t s = 0; s < S; ++s) {
      double best = prev[s];
      unsigned char arg = 0;
      if (s >= 1 && prev[s - 1] > best) {
        best = prev[s - 1];
        arg = 1;
      }
      if (CanSkip(ext, s) && prev[s - 2] > best) {
        best = prev[s - 2];
        arg = 2;
      }
      if (best == kNegInf) continue;
      delta[t * S + s] = best + lp(t, s);
      back[t * S + s] = arg;
    }
  }
  std::size_t s = S - 1;
  if (delta[(T - 1) * S + S - 2] > delta[(T - 1) * S + S - 1]) s = S - 2;
  Alignment out;
  out.logprob = delta[(T - 1) * S + s];
  out.labels.resize(T);
  for (std::size_t t = T; t-- > 0;) {
    out.labels[t] = ext[s];
    s -= back[t * S + s];
  }
  return out;
}

Alignment BestPathAlign(const PosteriorGrid& grid) {
  Alignment out;
  out.labels.resize(grid.frames());
  for (std::size_t t = 0; t < grid.frames(); ++t) {
    out.labels[t] = grid.Top1(t);
    out.logprob += grid.log_prob(t, static_cast<std::size_t>(out.labels[t]));
  }
  return out;
}

BsaPath ParseBsaPath(const std::string& s) {
  if (s == "tracked") return BsaPath::kTracked;
  if (s == "realigned") return BsaPath::kRealigned;
  Fail(ErrorKind::kUsage, "unknown bsa_path: " + s);
}

namespace {

struct PrefixState {
  double blank_end = kNegInf;     // log P(prefix, last frame blank)
  double label_end = kNegInf;     // log P(prefix, last frame non-blank)
  double best_blank = kNegInf;    // best single path ending in blank
  double best_label = kNegInf;    // best single path ending in a label
  std::vector<int> path_blank;
  std::vector<int> path_label;

  double total() const { return LogAdd(blank_end, label_end); }
};

void OfferPath(double score, const std::vector<int>& base, int label,
               double& best, std::vector<int>& path) {
  if (score > best) {
    best = score;
    path = base;
    path.push_back(label);
  }
}

}  // namespace

BeamSearchResult BeamSearchAlign(const PosteriorGrid& grid, std::size_t beam,
                                 BsaPath path_mode) {
  CASSNAT_CHECK(beam >= 1, ErrorKind::kUsage, "beam width must be >= 1");
  const std::size_t T = grid.frames(), C = grid.vocab();
  std::map<TokenSeq, PrefixState> hyps;
  hyps[{}].blank_end = 0.0;
  hyps[{}].best_blank = 0.0;

  for (std::size_t t = 0; t < T; ++t) {
    std::map<TokenSeq, PrefixState> next;
    for (const auto& [prefix, st] : hyps) {
      const bool from_blank_better = st.best_blank >= st.best_label;
      const double best_any = std::max(st.best_blank, st.best_label);
      const std::vector<int>& path_any =
          from_blank_better ? st.path_blank : st.path_label;

      const double lpb = grid.log_prob(t, kBlank);
      PrefixState& same = next[prefix];
      same.blank_end = LogAdd(same.blank_end, st.total() + lpb);
      OfferPath(best_any + lpb, path_any, kBlank, same.best_blank, same.path_blank);

      const int last = prefix.empty() ? -1 : prefix.back();
      for (std::size_t k = 1; k < C; ++k) {
        const int c = static_cast<int>(k);
        const double lpc = grid.log_prob(t, k);
        TokenSeq ext = prefix;
        ext.push_back(c);
        if (c == last) {
          // Repeat without a blank collapses into the same prefix.
          PrefixState& stay = next[prefix];
          stay.label_end = LogAdd(stay.label_end, st.label_end + lpc);
          OfferPath(st.best_label + lpc, st.path_label, c, stay.best_label,
                    stay.path_label);
          PrefixState& grow = next[ext];
          grow.label_end = LogAdd(grow.label_end, st.blank_end + lpc);
          OfferPath(st.best_blank + lpc, st.path_blank, c, grow.best_label,
                    grow.path_label);
        } else {
          PrefixState& grow = next[ext];
          grow.label_end = LogAdd(grow.label_end, st.total() + lpc);
          OfferPath(best_any + lpc, path_any, c, grow.best_label, grow.path_label);
        }
      }
    }
    // Keep the `beam` most probable prefixes; ties keep map (lexicographic)
    // order.
    std::vector<std::pair<double, const TokenSeq*>> order;
    order.reserve(next.size());
    for (const auto& [prefix, st] : next) order.emplace_back(st.total(), &prefix);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::map<TokenSeq, PrefixState> kept;
    for (std::size_t i = 0; i < std::min(beam, order.size()); ++i)
      kept.emplace(*order[i].second, std::move(next[*order[i].second]));
    hyps = std::move(kept);
  }

  const TokenSeq* best_prefix = nullptr;
  double best_score = kNegInf;
  for (const auto& [prefix, st] : hyps)
    if (best_prefix == nullptr || st.total() > best_score) {
      best_prefix = &prefix;
      best_score = st.total();
    }
  const PrefixState& st = hyps.at(*best_prefix);
  BeamSearchResult res;
  res.prefix = *best_prefix;
  res.prefix_logprob = best_score;
  if (path_mode == BsaPath::kRealigned && Feasible(T, res.prefix)) {
    res.alignment = ViterbiAlign(grid, res.prefix);
  } else {
    const bool blank_wins = st.best_blank >= st.best_label;
    res.alignment.labels = blank_wins ? st.path_blank : st.path_label;
    res.alignment.logprob = blank_wins ? st.best_blank : st.best_label;
  }
  return res;
}

EsaDistribution ParseEsaDistribution(const std::string& s) {
  if (s == "top2-uniform") return EsaDistribution::kTop2Uniform;
  if (s == "top2-renormalized") return EsaDistribution::kTop2Renormalized;
  Fail(ErrorKind::kUsage, "unknown ESA distribution: " + s);
}

std::string ToString(EsaDistribution d) {
  return d == EsaDistribution::kTop2Uniform ? "top2-uniform" : "top2-renormalized";
}

void EsaConfig::Validate() const {
  CASSNAT_CHECK(threshold >= 0.0 && threshold <= 1.0, ErrorKind::kUsage,
                "ESA threshold must be in [0, 1]");
  CASSNAT_CHECK(samples >= 1, ErrorKind::kUsage, "ESA needs at least one sample");
}

std::vector<std::size_t> SelectLowConfidenceFrames(const PosteriorGrid& grid,
                                                   double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < grid.frames(); ++t)
    if (grid.prob(t, static_cast<std::size_t>(grid.Top1(t))) < threshold)
      out.push_back(t);
  return out;
}

std::vector<Alignment> EsaSample(const PosteriorGrid& grid, const EsaConfig& cfg,
                                 std::string_view stream) {
  cfg.Validate();
  const Alignment best = BestPathAlign(grid);
  const std::vector<std::size_t> selected =
      SelectLowConfidenceFrames(grid, cfg.threshold);
  std::vector<int> top2(grid.frames(), kBlank);
  std::vector<double> p_second(grid.frames(), 0.5);
  for (std::size_t t : selected) {
    top2[t] = grid.Top2(t);
    if (cfg.distribution == EsaDistribution::kTop2Renormalized) {
      const double p1 = grid.prob(t, static_cast<std::size_t>(best.labels[t]));
      const double p2 = grid.prob(t, static_cast<std::size_t>(top2[t]));
      p_second[t] = p2 / (p1 + p2);
    }
  }

  std::vector<Alignment> out;
  out.reserve(cfg.samples);
  out.push_back(best);
  for (std::size_t k = 1; k < cfg.samples; ++k) {
    Rng rng(DeriveSeed(cfg.seed, stream, k));
    Alignment a = best;
    for (std::size_t t : selected) {
      if (rng.Uniform() < p_second[t]) a.labels[t] = top2[t];
    }
    a.logprob = AlignmentLogProb(grid, a.labels);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace cassnat::ctc
