// Copyright 2026 The sheaflab Authors.
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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "sheaflab/sheaflab.hpp"

namespace sheaflab {
namespace {

namespace fs = std::filesystem;

const fs::path kData = SHEAFLAB_TEST_DATA;

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args, bool merge_stderr = true) {
  const std::string cmd = std::string("\"") + SHEAFLAB_CLI + "\" " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sheaflab_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<nlohmann::json> records(const std::string& out, const std::string& type) {
  std::vector<nlohmann::json> rs;
  std::istringstream in(out);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '{') continue;
    auto j = nlohmann::json::parse(line);
    if (j["record"] == type) rs.push_back(std::move(j));
  }
  return rs;
}

fs::path synth_dataset() {
  static const fs::path dir = [] {
    auto d = scratch("synth");
    EXPECT_EQ(run("synth --out " + (d / "sbm").string() + " --n 80 --seed 2").code, 0);
    return d / "sbm";
  }();
  return dir;
}

TEST(Cli, TrivialSheafIsIdentity) {
  const auto dir = scratch("trivial");
  const auto r = run("build-sheaf --dataset " + (kData / "toy3").string() + " --d 2 --kind trivial --out " +
                     (dir / "s.csv").string());
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(slurp(dir / "s.csv"));
  const auto s = read_sheaf_csv(in);
  ASSERT_EQ(s.transports.size(), 2u);
  for (const auto& t : s.transports) EXPECT_EQ(t.map, Eigen::MatrixXd::Identity(2, 2));
  const auto diag = nlohmann::json::parse(slurp(dir / "s.csv.diagnostics.json"));
  EXPECT_EQ(diag["padded_nodes"], 0);
  EXPECT_TRUE(diag.contains("build_seconds"));
}

TEST(Cli, ConnectionSheafIsReproducible) {
  const auto dir = scratch("repeat");
  const std::string base = "build-sheaf --dataset " + synth_dataset().string() + " --d 2 --kind connection --out ";
  ASSERT_EQ(run(base + (dir / "a.csv").string() + " --laplacian-out " + (dir / "a.txt").string()).code, 0);
  ASSERT_EQ(run(base + (dir / "b.csv").string() + " --laplacian-out " + (dir / "b.txt").string()).code, 0);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.txt"), slurp(dir / "b.txt"));
  EXPECT_FALSE(slurp(dir / "a.csv").empty());
}

TEST(Cli, StalkDimensionTooLarge) {
  const auto r = run("build-sheaf --dataset " + (kData / "toy3").string() + " --d 3 --out " +
                     (scratch("big") / "s.csv").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("stalk dimension exceeds feature dimension"), std::string::npos);
}

TEST(Cli, SpectrumOfPath) {
  const auto dir = scratch("spectrum");
  const auto r = run("spectrum --dataset " + (kData / "path2").string() + " --d 1 --kind trivial --out " +
                     (dir / "ev.csv").string());
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(slurp(dir / "ev.csv"));
  std::string header, a, b, extra;
  std::getline(in, header);
  std::getline(in, a);
  std::getline(in, b);
  EXPECT_EQ(header, "eigenvalue");
  EXPECT_NEAR(std::stod(a), 0.0, 1e-12);
  EXPECT_NEAR(std::stod(b), 2.0, 1e-12);
  EXPECT_FALSE(std::getline(in, extra));
}

TEST(Cli, SpectraInRange) {
  const auto dir = scratch("spectra");
  for (const std::string kind : {"connection", "rand-edge"}) {
    const auto out = dir / (kind + ".csv");
    ASSERT_EQ(run("spectrum --dataset " + synth_dataset().string() + " --kind " + kind + " --out " + out.string()).code,
              0);
    std::istringstream in(slurp(out));
    std::string line;
    std::getline(in, line);
    int count = 0;
    while (std::getline(in, line)) {
      const double v = std::stod(line);
      EXPECT_GE(v, -1e-9);
      EXPECT_LE(v, 2 + 1e-9);
      ++count;
    }
    EXPECT_EQ(count, 160);
  }
}

TEST(Cli, TrainAllSplits) {
  const auto r = run("train --dataset " + synth_dataset().string() + " --epochs 5 --split all --quiet", false);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(records(r.output, "summary").size(), 10u);
  const auto agg = records(r.output, "aggregate");
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_TRUE(agg[0].contains("mean_test_acc"));
  EXPECT_TRUE(agg[0].contains("std_test_acc"));
}

TEST(Cli, TrainEpochRecordsAndDeterminism) {
  const std::string args = "train --dataset " + synth_dataset().string() + " --epochs 6 --seed 4 --split 1";
  const auto a = run(args, false);
  const auto b = run(args, false);
  ASSERT_EQ(a.code, 0) << a.output;
  EXPECT_EQ(records(a.output, "epoch").size(), 6u);
  auto sa = records(a.output, "summary").at(0);
  auto sb = records(b.output, "summary").at(0);
  for (auto* s : {&sa, &sb}) {
    s->erase("sheaf_build_seconds");
    s->erase("mean_epoch_seconds");
  }
  EXPECT_EQ(sa, sb);
}

TEST(Cli, Baselines) {
  for (const std::string m : {"gcn", "mlp"}) {
    const auto r = run("train --dataset " + synth_dataset().string() + " --epochs 3 --quiet --model " + m, false);
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(records(r.output, "summary").at(0)["model"], m);
  }
}

TEST(Cli, SplitOutOfRange) {
  const auto r = run("train --dataset " + synth_dataset().string() + " --split 11");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("split out of range"), std::string::npos);
}

TEST(Cli, ConfigFile) {
  const auto dir = scratch("config");
  std::ofstream(dir / "good.json") << R"({"epochs": 4, "d": 1, "activation": "tanh"})";
  std::ofstream(dir / "bad.json") << R"({"epochz": 4})";
  const auto ok = run("train --dataset " + synth_dataset().string() + " --config " + (dir / "good.json").string(), false);
  ASSERT_EQ(ok.code, 0) << ok.output;
  EXPECT_EQ(records(ok.output, "epoch").size(), 4u);
  const auto bad = run("train --dataset " + synth_dataset().string() + " --config " + (dir / "bad.json").string());
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.output.find("unknown config key"), std::string::npos);
}

TEST(Cli, Bench) {
  const auto r = run("bench --dataset " + synth_dataset().string() + " --epochs 5", false);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto b = records(r.output, "bench").at(0);
  EXPECT_EQ(b["epochs"], 20);
  EXPECT_GE(b["sheaf_build_seconds"].get<double>(), 0.0);
  EXPECT_TRUE(b.contains("std_epoch_seconds"));
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("train").code, 1);
  EXPECT_EQ(run("train --dataset /nonexistent/dir").code, 2);
  EXPECT_EQ(run("build-sheaf --dataset " + (kData / "toy3").string() + " --kind sideways --out /tmp/x.csv").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, SynthHomophily) {
  const auto dir = scratch("synth_h");
  const auto r = run("synth --out " + (dir / "d").string() + " --n 100 --p-out 0", false);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(records(r.output, "synth").at(0)["homophily"], 1.0);
  EXPECT_EQ(load_dataset(dir / "d").graph.num_nodes(), 100u);
}

}  // namespace
}  // namespace sheaflab
