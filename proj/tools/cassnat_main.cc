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

// cassnat: data generation, training, decoding and evaluation.
//
// Exit codes: 0 ok, 1 usage, 2 io, 3 infeasible data, 4 internal.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cassnat/common/error.h"
#include "cassnat/eval/report.h"
#include "cassnat/pipeline/pipeline.h"

namespace {

namespace fs = std::filesystem;
using namespace cassnat;
using model::ModelKind;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::size_t workers = 1;
  bool json = false;
};

struct DecodeFlags {
  std::string mode, ranker, bsa_path, esa_distribution;
  std::size_t samples = 0, beam = 0;
  std::uint64_t esa_seed = 0;
  double threshold = -1.0;
};

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value configuration file")
      ->check(CLI::ExistingFile);
  app->add_option("-s,--set", c.sets, "override one key, KEY=VALUE (repeatable)");
  app->add_option("--workers", c.workers, "parallel decode workers")->check(CLI::PositiveNumber);
  app->add_flag("--json", c.json, "machine-readable stdout");
}

void AddDecodeFlags(CLI::App* app, DecodeFlags& d) {
  app->add_option("--mode", d.mode, "bpa|bsa|esa|oracle|at");
  app->add_option("--samples", d.samples, "ESA candidate count");
  app->add_option("--threshold", d.threshold, "ESA confidence threshold");
  app->add_option("--esa-distribution", d.esa_distribution, "top2-uniform|top2-renormalized");
  app->add_option("--esa-seed", d.esa_seed, "ESA sampling seed");
  app->add_option("--ranker", d.ranker, "self|at");
  app->add_option("--beam", d.beam, "BSA beam width");
  app->add_option("--bsa-path", d.bsa_path, "tracked|realigned");
}

// File first, then --set, then dedicated flags: later assignments win.
pipeline::RunConfig Resolve(const Common& c, const DecodeFlags* d = nullptr) {
  KeyValueConfig kv;
  if (!c.config_path.empty()) kv = KeyValueConfig::Load(c.config_path);
  for (const std::string& s : c.sets) {
    const auto eq = s.find('=');
    CASSNAT_CHECK(eq != std::string::npos && eq > 0, ErrorKind::kUsage,
                  "--set expects KEY=VALUE, got '" + s + "'");
    kv.Set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (d != nullptr) {
    if (!d->mode.empty()) kv.Set("mode", d->mode);
    if (!d->ranker.empty()) kv.Set("ranker", d->ranker);
    if (!d->bsa_path.empty()) kv.Set("bsa_path", d->bsa_path);
    if (!d->esa_distribution.empty()) kv.Set("esa_distribution", d->esa_distribution);
    if (d->samples) kv.Set("samples", std::to_string(d->samples));
    if (d->beam) kv.Set("beam", std::to_string(d->beam));
    if (d->esa_seed) kv.Set("esa_seed", std::to_string(d->esa_seed));
    if (d->threshold >= 0.0) kv.Set("threshold", FormatDouble(d->threshold));
  }
  return pipeline::RunConfig::Resolve(kv);
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  CASSNAT_CHECK(os.good(), ErrorKind::kIo, "cannot write " + path);
}

std::string FileLabel(const std::string& label) {
  std::string s;
  for (char ch : label) s += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

struct Models {
  std::unique_ptr<model::Model> nat, at;
};

Models LoadModels(const std::string& nat_dir, const std::string& at_dir) {
  Models m;
  if (!nat_dir.empty()) m.nat = pipeline::LoadTrained(nat_dir);
  if (!at_dir.empty()) m.at = pipeline::LoadTrained(at_dir);
  return m;
}

std::unique_ptr<eval::Decoder> MakeDecoder(const Models& m, const eval::DecodeOptions& o) {
  if (o.mode == eval::DecodeMode::kAtGreedy) {
    CASSNAT_CHECK(m.at != nullptr, ErrorKind::kUsage, "mode 'at' needs --at-model");
    return std::make_unique<eval::Decoder>(*m.at, o);
  }
  CASSNAT_CHECK(m.nat != nullptr, ErrorKind::kUsage, "mode '" + eval::ToString(o.mode) +
                                                          "' needs --model");
  return std::make_unique<eval::Decoder>(*m.nat, o, m.at.get());
}

void PrintProgress(const char* stage, const train::LogRow& r) {
  std::fprintf(stderr, "[%s] step %zu lr %.3g train %.4f dev %.4f dev_wer %.2f%%\n", stage, r.step,
               r.lr, r.train_loss, r.dev_loss, 100.0 * r.dev_wer);
}

int Run(int argc, char** argv) {
  CLI::App app{"Single-step non-autoregressive recognition with CTC alignments"};
  app.require_subcommand(1);

  Common gen_c, pre_c, train_c, dec_c, eval_c, rtf_c, dbg_c;
  DecodeFlags dec_d, eval_d;
  std::string data_dir, out, model_dir, at_dir, init_encoder, kind = "nat", split = "test";
  std::string modes, id;
  std::size_t limit = 0;
  bool no_reference = false;

  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
  AddCommon(gen, gen_c);
  gen->add_option("--out", out, "corpus directory")->required();

  CLI::App* pre = app.add_subcommand("pretrain-enc", "train the encoder and CTC head alone");
  AddCommon(pre, pre_c);
  pre->add_option("--data", data_dir, "corpus directory")->required();
  pre->add_option("--out", out, "output directory")->required();

  CLI::App* tr = app.add_subcommand("train", "train a NAT or AT model");
  AddCommon(tr, train_c);
  tr->add_option("--data", data_dir, "corpus directory")->required();
  tr->add_option("--out", out, "output directory")->required();
  tr->add_option("--kind", kind, "nat|at")->check(CLI::IsMember({"nat", "at"}));
  tr->add_option("--init-encoder", init_encoder, "pretrained encoder checkpoint")
      ->check(CLI::ExistingFile);

  CLI::App* dec = app.add_subcommand("decode", "decode a split and write hypotheses");
  AddCommon(dec, dec_c);
  AddDecodeFlags(dec, dec_d);
  dec->add_option("--model", model_dir, "trained NAT model directory");
  dec->add_option("--at-model", at_dir, "trained AT model directory");
  dec->add_option("--data", data_dir, "corpus directory")->required();
  dec->add_option("--split", split, "train|dev|test");
  dec->add_option("--limit", limit, "first N utterances (0 = all)");
  dec->add_option("--out", out, "hypothesis file (default stdout)");
  dec->add_flag("--no-reference", no_reference, "withhold reference transcriptions");

  CLI::App* ev = app.add_subcommand("evaluate", "score one or more decode modes");
  AddCommon(ev, eval_c);
  AddDecodeFlags(ev, eval_d);
  ev->add_option("--model", model_dir, "trained NAT model directory");
  ev->add_option("--at-model", at_dir, "trained AT model directory");
  ev->add_option("--data", data_dir, "corpus directory")->required();
  ev->add_option("--split", split, "train|dev|test");
  ev->add_option("--limit", limit, "first N utterances (0 = all)");
  ev->add_option("--modes", modes, "comma-separated modes (default: the configured mode)");
  ev->add_option("--out", out, "directory for reports, histograms and hypotheses");

  CLI::App* rtf = app.add_subcommand("bench-rtf", "serial batch-1 real-time factor");
  AddCommon(rtf, rtf_c);
  rtf->add_option("--model", model_dir, "trained NAT model directory");
  rtf->add_option("--at-model", at_dir, "trained AT model directory");
  rtf->add_option("--data", data_dir, "corpus directory")->required();
  rtf->add_option("--split", split, "train|dev|test");
  rtf->add_option("--limit", limit, "first N utterances (0 = all)");
  rtf->add_option("--modes", modes, "comma-separated modes")->default_val("bpa,esa,bsa,at");

  CLI::App* dbg = app.add_subcommand("align-debug", "dump one utterance's grid and alignments");
  AddCommon(dbg, dbg_c);
  dbg->add_option("--model", model_dir, "trained model directory")->required();
  dbg->add_option("--data", data_dir, "corpus directory")->required();
  dbg->add_option("--split", split, "train|dev|test");
  dbg->add_option("--id", id, "utterance id (default: the first)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (gen->parsed()) {
    const pipeline::RunConfig run = Resolve(gen_c);
    const std::size_t n = pipeline::GenerateData(run, out);
    if (gen_c.json) {
      std::cout << nlohmann::json{{"utterances", n}, {"dir", out}}.dump() << "\n";
    } else {
      std::cout << "wrote " << n << " utterances to " << out << "\n";
    }
    return 0;
  }

  if (pre->parsed() || tr->parsed()) {
    const Common& c = pre->parsed() ? pre_c : train_c;
    const ModelKind k = pre->parsed() ? ModelKind::kEncoder : model::ParseModelKind(kind);
    const pipeline::RunConfig run = Resolve(c);
    const std::string stage = model::ToString(k);
    const train::TrainResult r = pipeline::TrainStage(
        run, k, data_dir, out, init_encoder,
        [&](const train::LogRow& row) { PrintProgress(stage.c_str(), row); });
    if (c.json) {
      nlohmann::json j{{"steps", r.steps},
                       {"early_stopped", r.early_stopped},
                       {"skipped", r.skipped},
                       {"checkpoint", r.averaged}};
      if (!r.log.empty()) {
        j["dev_loss"] = r.log.back().dev_loss;
        j["dev_wer"] = r.log.back().dev_wer;
      }
      std::cout << j.dump() << "\n";
    } else {
      std::cout << stage << ": " << r.steps << " steps" << (r.early_stopped ? " (early stop)" : "")
                << ", averaged checkpoint " << r.averaged << "\n";
    }
    return 0;
  }

  if (dec->parsed()) {
    const pipeline::RunConfig run = Resolve(dec_c, &dec_d);
    const Models m = LoadModels(model_dir, at_dir);
    const auto decoder = MakeDecoder(m, run.decode);
    const auto set = pipeline::LoadSplit(data_dir, split, limit);
    std::ostringstream text;
    nlohmann::json j = nlohmann::json::array();
    for (const data::Utterance& u : set) {
      const std::span<const int> ref = no_reference ? std::span<const int>() : u.tokens;
      const eval::DecodeResult r = decoder->Decode({&u.feats, ref, u.id});
      eval::UtteranceRecord rec;
      rec.id = u.id;
      rec.hypothesis = r.hyp.tokens;
      rec.alignment = r.hyp.alignment.labels;
      rec.rank_score = r.hyp.rank_score;
      eval::EvalReport one;
      one.records.push_back(rec);
      text << eval::FormatHypotheses(one);
      j.push_back({{"id", u.id},
                   {"tokens", r.hyp.tokens},
                   {"alignment", r.hyp.alignment.labels},
                   {"rank_score", r.hyp.rank_score},
                   {"empty", r.hyp.empty}});
    }
    const std::string body = dec_c.json ? j.dump(1) + "\n" : text.str();
    if (out.empty()) {
      std::cout << body;
    } else {
      pipeline::WriteImmutableConfig(run.kv, out + ".conf");
      WriteText(out, body);
    }
    return 0;
  }

  if (ev->parsed()) {
    const pipeline::RunConfig run = Resolve(eval_c, &eval_d);
    const Models m = LoadModels(model_dir, at_dir);
    const auto set = pipeline::LoadSplit(data_dir, split, limit);
    std::vector<std::string> mode_list = SplitList(modes);
    if (mode_list.empty()) mode_list.push_back(eval::ToString(run.decode.mode));
    if (!out.empty()) {
      pipeline::WriteImmutableConfig(run.kv, (fs::path(out) / pipeline::kRunConfigName).string());
    }
    std::vector<eval::EvalReport> reports;
    for (const std::string& mode : mode_list) {
      eval::DecodeOptions o = run.decode;
      o.mode = eval::ParseDecodeMode(mode);
      const auto decoder = MakeDecoder(m, o);
      reports.push_back(eval::Evaluate(*decoder, set, eval_c.workers));
      std::fprintf(stderr, "[evaluate] %s done\n", reports.back().name.c_str());
      if (!out.empty()) {
        const fs::path base = fs::path(out) / FileLabel(reports.back().name);
        WriteText(base.string() + ".report.json", reports.back().ToJson().dump(1) + "\n");
        WriteText(base.string() + ".histogram.csv", reports.back().HistogramCsv());
        WriteText(base.string() + ".hyp", eval::FormatHypotheses(reports.back()));
      }
    }
    if (!out.empty()) WriteText((fs::path(out) / "summary.txt").string(), eval::FormatTable(reports));
    if (eval_c.json) {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& r : reports) {
        nlohmann::json s = r.ToJson();
        s.erase("records");
        j.push_back(s);
      }
      std::cout << j.dump(1) << "\n";
    } else {
      std::cout << eval::FormatTable(reports);
    }
    return 0;
  }

  if (rtf->parsed()) {
    const pipeline::RunConfig run = Resolve(rtf_c);
    const Models m = LoadModels(model_dir, at_dir);
    const auto set = pipeline::LoadSplit(data_dir, split, limit);
    std::vector<eval::EvalReport> rows;
    double nat_rtf = 0.0, at_rtf = 0.0;
    for (const std::string& mode : SplitList(modes)) {
      eval::DecodeOptions o = run.decode;
      o.mode = eval::ParseDecodeMode(mode);
      const auto decoder = MakeDecoder(m, o);
      eval::EvalReport r;
      r.name = eval::ModeLabel(o);
      r.mode = o.mode;
      r.wer = 0.0;
      r.rtf = eval::MeasureRtf(*decoder, set);
      if (o.mode == eval::DecodeMode::kBpa) nat_rtf = *r.rtf;
      if (o.mode == eval::DecodeMode::kAtGreedy) at_rtf = *r.rtf;
      rows.push_back(std::move(r));
    }
    if (rtf_c.json) {
      nlohmann::json j = nlohmann::json::object();
      for (const auto& r : rows) j[r.name] = *r.rtf;
      if (nat_rtf > 0.0 && at_rtf > 0.0) j["at_over_bpa"] = at_rtf / nat_rtf;
      std::cout << j.dump(1) << "\n";
    } else {
      std::printf("%-18s %10s\n", "mode", "RTF");
      for (const auto& r : rows) std::printf("%-18s %10.5f\n", r.name.c_str(), *r.rtf);
      if (nat_rtf > 0.0 && at_rtf > 0.0)
        std::printf("AT/BPA speed ratio: %.2fx\n", at_rtf / nat_rtf);
    }
    return 0;
  }

  if (dbg->parsed()) {
    Resolve(dbg_c);
    const auto m = pipeline::LoadTrained(model_dir);
    for (const data::Utterance& u : pipeline::LoadSplit(data_dir, split)) {
      if (!id.empty() && u.id != id) continue;
      std::cout << pipeline::AlignDebugReport(*m, u);
      return 0;
    }
    Fail(ErrorKind::kUsage, "no utterance '" + id + "' in split " + split);
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const cassnat::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return cassnat::ExitCode(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 4;
  }
}
