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

#include "cassnat/eval/report.h"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "cassnat/align/alignment_map.h"
#include "cassnat/common/config.h"
#include "cassnat/common/error.h"

namespace cassnat::eval {
namespace {

using Clock = std::chrono::steady_clock;

std::string Join(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(xs[i]);
  }
  return s;
}

double Rate(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

UtteranceRecord Score(const data::Utterance& utt, const DecodeResult& r) {
  UtteranceRecord rec;
  rec.id = utt.id;
  rec.raw_frames = utt.frames();
  rec.reference = utt.tokens;
  rec.hypothesis = r.hyp.tokens;
  rec.edits = Levenshtein(r.hyp.tokens, utt.tokens);
  rec.empty = r.hyp.empty;
  rec.candidates = r.hyp.candidates;
  rec.rank_score = r.hyp.rank_score;
  if (r.hyp.mode != DecodeMode::kAtGreedy) {
    rec.has_alignment = true;
    rec.alignment = r.hyp.alignment.labels;
    // The oracle alignment collapses to the reference whenever it exists.
    rec.oracle_feasible = ctc::Feasible(r.grid.frames(), utt.tokens);
    if (rec.oracle_feasible) {
      const std::vector<int> gen = align::Collapse(rec.alignment);
      rec.length_edits = Levenshtein(gen, utt.tokens);
      rec.length_error =
          static_cast<long>(gen.size()) - static_cast<long>(utt.tokens.size());
    }
  }
  return rec;
}

std::string Percent(const std::optional<double>& v, int width) {
  char buf[32];
  if (!v) {
    std::snprintf(buf, sizeof(buf), "%*s", width, "-");
  } else {
    std::snprintf(buf, sizeof(buf), "%*.2f", width, 100.0 * *v);
  }
  return buf;
}

}  // namespace

double HistogramBucket::wer() const { return Rate(edits.errors(), edits.ref_length); }

std::string ModeLabel(const DecodeOptions& o) {
  switch (o.mode) {
    case DecodeMode::kEsa:
      return "esa(S=" + std::to_string(o.esa.samples) + "," + ToString(o.ranker) + ")";
    case DecodeMode::kBsa:
      return "bsa(B=" + std::to_string(o.beam) + ")";
    default:
      return ToString(o.mode);
  }
}

EvalReport Evaluate(const Decoder& decoder, const std::vector<data::Utterance>& set,
                    std::size_t workers) {
  CASSNAT_CHECK(!set.empty(), ErrorKind::kUsage, "evaluation set is empty");
  workers = std::max<std::size_t>(1, std::min(workers, set.size()));
  std::vector<UtteranceRecord> records(set.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= set.size()) return;
      try {
        records[i] = Score(set[i], decoder.Decode({&set[i].feats, set[i].tokens, set[i].id}));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = set.size();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport rep;
  rep.name = ModeLabel(decoder.options());
  rep.mode = decoder.options().mode;
  EditCounts total, length_total;
  std::size_t mismatched_length = 0, feasible = 0;
  std::map<long, HistogramBucket> buckets;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const UtteranceRecord& r = records[i];
    total += r.edits;
    rep.empty += r.empty;
    if (r.has_alignment && r.oracle_feasible) {
      ++feasible;
      length_total += r.length_edits;
      mismatched_length += r.length_error != 0;
      HistogramBucket& b = buckets[r.length_error];
      b.length_error = r.length_error;
      ++b.utterances;
      b.edits += r.edits;
    }
  }
  rep.wer = Rate(total.errors(), total.ref_length);
  if (rep.mode != DecodeMode::kAtGreedy) {
    rep.mr = Rate(length_total.mismatches(), length_total.ref_length);
    rep.lper = Rate(mismatched_length, feasible);
  }
  for (auto& [k, b] : buckets) rep.histogram.push_back(b);
  rep.records = std::move(records);
  return rep;
}

double MeasureRtf(const Decoder& decoder, const std::vector<data::Utterance>& set) {
  CASSNAT_CHECK(!set.empty(), ErrorKind::kUsage, "RTF set is empty");
  decoder.Decode({&set.front().feats, set.front().tokens, set.front().id});
  double audio = 0.0;
  const auto t0 = Clock::now();
  for (const data::Utterance& u : set) {
    decoder.Decode({&u.feats, u.tokens, u.id});
    audio += static_cast<double>(u.frames()) * kFrameSeconds;
  }
  return std::chrono::duration<double>(Clock::now() - t0).count() / audio;
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json j;
  j["name"] = name;
  j["mode"] = ToString(mode);
  j["wer"] = wer;
  j["mr"] = mr ? nlohmann::json(*mr) : nlohmann::json();
  j["lper"] = lper ? nlohmann::json(*lper) : nlohmann::json();
  j["rtf"] = rtf ? nlohmann::json(*rtf) : nlohmann::json();
  j["utterances"] = records.size();
  j["empty_hypotheses"] = empty;
  auto& hist = j["length_error_histogram"] = nlohmann::json::array();
  for (const HistogramBucket& b : histogram)
    hist.push_back({{"length_error", b.length_error},
                    {"utterances", b.utterances},
                    {"ref_tokens", b.edits.ref_length},
                    {"errors", b.edits.errors()},
                    {"wer", b.wer()}});
  auto& utts = j["records"] = nlohmann::json::array();
  for (const UtteranceRecord& r : records) {
    nlohmann::json u{{"id", r.id},
                     {"raw_frames", r.raw_frames},
                     {"reference", r.reference},
                     {"hypothesis", r.hypothesis},
                     {"substitutions", r.edits.substitutions},
                     {"deletions", r.edits.deletions},
                     {"insertions", r.edits.insertions},
                     {"empty", r.empty},
                     {"candidates", r.candidates},
                     {"rank_score", r.rank_score}};
    if (r.has_alignment) {
      u["alignment"] = r.alignment;
      u["oracle_feasible"] = r.oracle_feasible;
      u["length_error"] = r.length_error;
      u["length_deletions"] = r.length_edits.deletions;
      u["length_insertions"] = r.length_edits.insertions;
    }
    utts.push_back(std::move(u));
  }
  return j;
}

std::string EvalReport::HistogramCsv() const {
  std::ostringstream os;
  os << "length_error,utterances,ref_tokens,errors,wer\n";
  for (const HistogramBucket& b : histogram)
    os << b.length_error << ',' << b.utterances << ',' << b.edits.ref_length << ','
       << b.edits.errors() << ',' << FormatDouble(b.wer()) << '\n';
  return os.str();
}

std::string FormatTable(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-18s %8s %8s %8s %10s %6s\n", "mode", "WER%", "MR%",
                "LPER%", "RTF", "utts");
  os << line;
  for (const EvalReport& r : reports) {
    char rtf[32];
    if (r.rtf) {
      std::snprintf(rtf, sizeof(rtf), "%10.5f", *r.rtf);
    } else {
      std::snprintf(rtf, sizeof(rtf), "%10s", "-");
    }
    std::snprintf(line, sizeof(line), "%-18s %s %s %s %s %6zu\n", r.name.c_str(),
                  Percent(r.wer, 8).c_str(), Percent(r.mr, 8).c_str(),
                  Percent(r.lper, 8).c_str(), rtf, r.records.size());
    os << line;
  }
  return os.str();
}

std::string FormatHypotheses(const EvalReport& report) {
  std::ostringstream os;
  for (const UtteranceRecord& r : report.records)
    os << r.id << '\t' << Join(r.hypothesis) << '\t' << Join(r.alignment) << '\t'
       << FormatDouble(r.rank_score) << '\n';
  return os.str();
}

}  // namespace cassnat::eval
