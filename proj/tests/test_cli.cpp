/*
 * Copyright 2026 The TEMN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Drives the installed command-line tool end to end in a scratch directory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("temn_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }

  // Runs the tool with `args`; stdout and stderr go to `log`.
  int run(const std::string& args, const std::string& log = "out.txt") const {
    const std::string cmd = std::string("\"") + TEMN_CLI + "\" " + args + " > \"" +
                            (dir / log).string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string read(const fs::path& rel) const {
    std::ifstream in(dir / rel);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  void write(const fs::path& rel, const std::string& text) const { std::ofstream(dir / rel) << text; }
  std::string at(const fs::path& rel) const { return "\"" + (dir / rel).string() + "\""; }
};

double report_value(const std::string& report, const std::string& key) {
  const auto pos = report.find(key + " = ");
  REQUIRE(pos != std::string::npos);
  return std::stod(report.substr(pos + key.size() + 3));
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("synth is byte-identical across runs and sensitive to the seed") {
  Scratch s;
  REQUIRE(s.run("synth --users 40 --out " + s.at("a")) == 0);
  REQUIRE(s.run("synth --users 40 --out " + s.at("b")) == 0);
  REQUIRE(s.run("synth --users 40 --seed 8 --out " + s.at("c")) == 0);
  CHECK(s.read("a/checkins.csv") == s.read("b/checkins.csv"));
  CHECK(s.read("a/ground_truth_users.csv") == s.read("b/ground_truth_users.csv"));
  CHECK(s.read("a/checkins.csv") != s.read("c/checkins.csv"));
  CHECK(s.read("a/run_manifest.txt").find("seed = 7\n") != std::string::npos);
}

TEST_CASE("prepare, tlda, train, evaluate, recommend and inspect") {
  Scratch s;
  REQUIRE(s.run("synth --users 80 --out " + s.at("syn")) == 0);
  REQUIRE(s.run("prepare --input " + s.at("syn/checkins.csv") + " --out " + s.at("split")) == 0);
  for (const char* f : {"train.csv", "validation.csv", "test.csv", "manifest.txt",
                        "sequences_train.csv", "run_manifest.txt"}) {
    CHECK(fs::exists(s.dir / "split" / f));
  }
  s.write("tlda.cfg", "burn_in = 30\nsamples = 2\nlag = 2\n");
  REQUIRE(s.run("tlda --split " + s.at("split") + " --patterns 3 --config " + s.at("tlda.cfg") +
                " --out " + s.at("topics")) == 0);
  CHECK(s.read("topics/run_manifest.txt").find("burn_in = 30\n") != std::string::npos);

  s.write("train.cfg", "dim_d = 6\nslots_h = 4\n");
  REQUIRE(s.run("train --split " + s.at("split") + " --topics " + s.at("topics") + " --config " +
                s.at("train.cfg") + " --scenario cpr --epochs 2 --out " + s.at("model")) == 0);
  const std::string manifest = s.read("model/run_manifest.txt");
  CHECK(manifest.find("scenario = cpr\n") != std::string::npos);
  CHECK(manifest.find("dim_d = 6\n") != std::string::npos);
  CHECK(manifest.find("patterns_pi = 3\n") != std::string::npos);
  CHECK(lines(s.read("model/training_log.tsv")).size() == 3);

  REQUIRE(s.run("evaluate --model " + s.at("model/model.bin") + " --split " + s.at("split") +
                " --out " + s.at("ev")) == 0);
  const std::string report = s.read("ev/report.txt");
  const double hr10 = report_value(report, "hr@10");
  CHECK(hr10 >= 0.0);
  CHECK(hr10 <= 1.0);
  CHECK(report_value(report, "ndcg@10") <= hr10);
  CHECK(report_value(report, "negatives_per_test") == 100);

  REQUIRE(s.run("evaluate --scorer oracle --split " + s.at("split") + " --out " + s.at("oracle")) == 0);
  CHECK(report_value(s.read("oracle/report.txt"), "hr@10") == 1.0);
  CHECK(report_value(s.read("oracle/report.txt"), "ndcg@1") == 1.0);

  // Recommendations skip training POIs and come in descending score order.
  const std::string train = s.read("split/train.csv");
  const std::string user = lines(train)[1].substr(0, lines(train)[1].find(','));
  REQUIRE(s.run("recommend --model " + s.at("model/model.bin") + " --user " + user + " --n 15",
                "rec.txt") == 0);
  const auto rec = lines(s.read("rec.txt"));
  REQUIRE(rec.size() == 16);
  double last = 1e300;
  for (std::size_t i = 1; i < rec.size(); ++i) {
    std::istringstream row(rec[i]);
    std::string u, rank, poi;
    double score;
    row >> u >> rank >> poi >> score;
    CHECK(u == user);
    CHECK(std::stoul(rank) == i);
    CHECK(score <= last);
    last = score;
    CHECK(train.find("\n" + user + "," + poi + ",") == std::string::npos);
  }

  REQUIRE(s.run("inspect --model " + s.at("model/model.bin") + " --top 4 --out " + s.at("insp")) == 0);
  CHECK(lines(s.read("insp/attention_by_pattern.tsv")).size() == 4);
  CHECK(lines(s.read("insp/pattern_venues.tsv")).size() == 13);
  CHECK(lines(s.read("insp/user_geo.tsv")).size() == 81);
}

TEST_CASE("errors exit nonzero with a one-line diagnostic") {
  Scratch s;
  CHECK(s.run("synth --no-such-flag") != 0);
  CHECK(s.run("prepare --input " + s.at("missing.csv") + " --out " + s.at("x")) != 0);
  CHECK(s.run("recommend --model " + s.at("missing.bin") + " --user u1", "err.txt") == 1);
  const auto err = lines(s.read("err.txt"));
  REQUIRE(err.size() == 1);
  CHECK(err[0].rfind("temn: error: ", 0) == 0);
  s.write("bad.cfg", "no_such_key = 3\n");
  CHECK(s.run("synth --config " + s.at("bad.cfg") + " --out " + s.at("y")) == 1);
  CHECK(s.run("train --split " + s.at("nope") + " --topics " + s.at("nope")) == 1);
}
