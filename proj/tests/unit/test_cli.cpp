// Copyright 2026 The leukmil Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "support.hpp"

#ifndef LEUKMIL_CLI_PATH
#error "LEUKMIL_CLI_PATH must point at the leukmil executable"
#endif

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const leukmil::testing::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(LEUKMIL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("help and usage errors") {
  leukmil::testing::TempDir dir("cli");
  CHECK(run(dir, "--help").code == 0);
  CHECK(run(dir, "evaluate --help").code == 0);
  const Run unknown = run(dir, "frobnicate");
  CHECK(unknown.code == 2);
  const auto line = nlohmann::json::parse(unknown.err.substr(0, unknown.err.find('\n')));
  CHECK(line.at("subcommand") == "frobnicate");
  CHECK(run(dir, "").code == 2);
  CHECK(run(dir, "train --stage 3 --pools x --out y").code == 2);
  CHECK(run(dir, "predict --bag x").code == 2);
}

TEST_CASE("synth, detect, train, predict and evaluate round trip") {
  leukmil::testing::TempDir dir("cli_flow");
  const std::string root = dir.path().string();
  REQUIRE(run(dir, "synth --out " + root + "/corpus --n-all 8 --n-healthy 8 --images-min 2 --images-max 2 "
                   "--test-fraction 0.25 --seed 3 --quiet").code == 0);
  CHECK(std::filesystem::exists(dir / "corpus/manifest.json"));
  CHECK(std::filesystem::exists(dir / "corpus/pools/pools.json"));

  REQUIRE(run(dir, "detect --oracle --manifest " + root + "/corpus/manifest.json --split test --out " + root +
                   "/det --quiet").code == 0);
  const auto det = read_json(dir / "det/detections.json");
  CHECK(det.at("detector") == "oracle");
  std::vector<std::filesystem::path> bags;
  for (const auto& e : std::filesystem::directory_iterator(dir / "det/bags")) bags.push_back(e.path());
  CHECK(bags.size() == 4);

  REQUIRE(run(dir, "generate-epoch --pools " + root + "/corpus/pools --length 6 --count 10 --cell-min 2 "
                   "--cell-max 6 --out " + root + "/epoch.json").code == 0);
  CHECK(read_json(dir / "epoch.json").at("sequences").size() == 10);

  REQUIRE(run(dir, "train --stage 1 --pools " + root + "/corpus/pools --epochs 1 --out " + root + "/s1.ckpt --quiet")
              .code == 0);
  CHECK(read_json(root + "/s1.ckpt.report.json").contains("config_digest"));
  {
    std::ofstream cfg(dir / "s2.json");
    cfg << R"({"stage": 2, "length": 4, "cell_range": [1, 3], "sequences_per_epoch": 64, "validation_sequences": 32})";
  }
  // Stage 2 refuses to start from scratch unless asked.
  CHECK(run(dir, "train --stage 2 --config " + root + "/s2.json --pools " + root + "/corpus/pools --epochs 1 --out " + root + "/bad.ckpt").code == 2);
  REQUIRE(run(dir, "train --stage 2 --config " + root + "/s2.json --pools " + root + "/corpus/pools --epochs 1 --init " + root + "/s1.ckpt --out " +
                   root + "/s2.ckpt --quiet").code == 0);

  REQUIRE(run(dir, "predict --ckpt " + root + "/s2.ckpt --bag " + bags.front().string() + " --json-out " + root +
                   "/pred.json --quiet").code == 0);
  const auto pred = read_json(dir / "pred.json");
  CHECK(pred.contains("probability"));
  CHECK(pred.contains("config_digest"));

  REQUIRE(run(dir, "evaluate --ckpt " + root + "/s2.ckpt --manifest " + root + "/corpus/manifest.json --attack "
                   "remove-blast --class-source gt --json-out " + root + "/eval.json --quiet").code == 0);
  const auto ev = read_json(dir / "eval.json");
  CHECK(ev.at("extra").at("attack") == "remove-blast");
  CHECK(ev.at("confusion").is_object());
  // Detector-sourced classes need a two-class detector checkpoint.
  CHECK(run(dir, "evaluate --ckpt " + root + "/s2.ckpt --manifest " + root + "/corpus/manifest.json --attack "
                 "remove-blast --class-source detector").code == 2);
  // A runtime failure (missing checkpoint) exits 1.
  CHECK(run(dir, "predict --ckpt " + root + "/missing.ckpt --bag " + bags.front().string()).code == 1);
}
