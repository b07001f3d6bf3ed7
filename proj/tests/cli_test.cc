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

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "gtest/gtest.h"

namespace {

namespace fs = std::filesystem;

const fs::path& Root() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / "cassnat_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    std::ofstream(p / "tiny.conf") << R"(# tiny end-to-end setup
vocab = 4
d_feat = 3
successors = 2
dur_min = 2
dur_max = 4
len_min = 2
len_max = 4
subsample = 2
sigma = 0.3
n_train = 16
n_dev = 4
n_test = 4
n_enc = 1
n_self = 1
n_mix = 1
n_at = 1
heads = 2
d_model = 8
d_ff = 12
pretrain.max_steps = 4
pretrain.eval_every = 2
pretrain.warmup_steps = 2
nat.max_steps = 4
nat.eval_every = 2
nat.warmup_steps = 2
at.max_steps = 4
at.eval_every = 2
at.warmup_steps = 2
)";
    return p;
  }();
  return root;
}

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with `args` inside the test root; stderr is discarded.
Result Cli(const std::string& args) {
  const fs::path out = Root() / "stdout.txt";
  const std::string cmd = "cd '" + Root().string() + "' && '" CASSNAT_CLI "' " + args + " > '" +
                          out.string() + "' 2>/dev/null";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(out);
  r.out.assign(std::istreambuf_iterator<char>(is), {});
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ASSERT_EQ(Cli("gen-data --config tiny.conf --out data").code, 0);
    ASSERT_EQ(Cli("pretrain-enc --config tiny.conf --data data --out pre").code, 0);
    ASSERT_EQ(Cli("train --config tiny.conf --data data --out nat --init-encoder pre/final.bin")
                  .code,
              0);
    ASSERT_EQ(
        Cli("train --config tiny.conf --kind at --data data --out at --init-encoder pre/final.bin")
            .code,
        0);
  }
};

TEST_F(CliTest, StagesWriteResolvedConfigs) {
  for (const char* dir : {"data", "pre", "nat", "at"}) {
    EXPECT_TRUE(fs::exists(Root() / dir / "run.conf")) << dir;
  }
  EXPECT_TRUE(fs::exists(Root() / "nat" / "final.bin"));
  EXPECT_TRUE(fs::exists(Root() / "nat" / "train_log.csv"));
}

TEST_F(CliTest, DecodeWritesHypotheses) {
  const Result r = Cli("decode --config tiny.conf --model nat --data data --mode esa --samples 5 "
                       "--threshold 0.7 --out hyp.txt");
  EXPECT_EQ(r.code, 0);
  std::ifstream is(Root() / "hyp.txt");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(is, line)) {
    EXPECT_EQ(line.rfind("test-", 0), 0u) << line;
    ++lines;
  }
  EXPECT_EQ(lines, 4u);
  EXPECT_TRUE(fs::exists(Root() / "hyp.txt.conf"));

  const Result j = Cli("decode --config tiny.conf --model nat --data data --mode bpa --json");
  EXPECT_EQ(j.code, 0);
  EXPECT_EQ(j.out.front(), '[');
}

TEST_F(CliTest, EvaluateAllModes) {
  const Result r = Cli("evaluate --config tiny.conf --model nat --at-model at --data data "
                       "--modes oracle,bpa,bsa,esa,at --ranker at --workers 2 --out eval");
  EXPECT_EQ(r.code, 0);
  for (const char* row : {"oracle", "bpa", "bsa(B=10)", "esa(S=50,at)", "at "})
    EXPECT_NE(r.out.find(row), std::string::npos) << row;
  EXPECT_TRUE(fs::exists(Root() / "eval" / "oracle.report.json"));
  EXPECT_TRUE(fs::exists(Root() / "eval" / "esa_S_50_at.histogram.csv"));
  EXPECT_TRUE(fs::exists(Root() / "eval" / "summary.txt"));
}

TEST_F(CliTest, BenchAndDebug) {
  const Result b = Cli("bench-rtf --config tiny.conf --model nat --at-model at --data data --json");
  EXPECT_EQ(b.code, 0);
  EXPECT_NE(b.out.find("at_over_bpa"), std::string::npos);
  const Result d = Cli("align-debug --config tiny.conf --model nat --data data --id test-00001");
  EXPECT_EQ(d.code, 0);
  EXPECT_NE(d.out.find("test-00001"), std::string::npos);
  EXPECT_NE(d.out.find("Z = {"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(Cli("").code, 1);
  EXPECT_EQ(Cli("frobnicate").code, 1);
  EXPECT_EQ(Cli("--help").code, 0);
  EXPECT_EQ(Cli("decode --model nat --data data --mode viterbi").code, 1);
  EXPECT_EQ(Cli("decode --config tiny.conf --model nat --data data --mode oracle --no-reference")
                .code,
            1);
  EXPECT_EQ(Cli("decode --config tiny.conf --model nat --data data --mode at").code, 1);
  EXPECT_EQ(Cli("decode --config tiny.conf --model missing --data data").code, 2);
  EXPECT_EQ(Cli("evaluate --config tiny.conf --model nat --data nowhere").code, 2);
  EXPECT_EQ(Cli("gen-data --config tiny.conf --out data -s sigma=0.4").code, 1);
  EXPECT_EQ(Cli("gen-data --config tiny.conf --out other -s bogus=1").code, 1);
  EXPECT_EQ(Cli("align-debug --config tiny.conf --model nat --data data --id nope").code, 1);
}

}  // namespace
