// Copyright 2026 The csran authors
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

// Exercises the shared-library C API and the CLI exit-code contract.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "csran.h"

namespace {

struct Config {
  csran_config* cfg = nullptr;
  Config() { REQUIRE(csran_config_create(&cfg) == CSRAN_OK); }
  ~Config() { csran_config_destroy(cfg); }
  void set(const char* key, const std::string& value) {
    REQUIRE(csran_config_set(cfg, key, value.c_str()) == CSRAN_OK);
  }
};

std::string fresh_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("csran_capi_" + std::string(tag) + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

void tiny_training_config(Config& c, const std::string& out_dir) {
  c.set("task", "paraphrase");
  c.set("synthetic_train", "24");
  c.set("synthetic_dev", "12");
  c.set("epochs", "2");
  c.set("batch_size", "8");
  c.set("word_dim", "6");
  c.set("char_dim", "3");
  c.set("char_hidden", "3");
  c.set("hidden", "4");
  c.set("stack_depth", "2");
  c.set("prediction_hidden", "8");
  c.set("max_len", "12");
  c.set("out_dir", out_dir);
  c.set("history_timing", "false");
}

// Runs the CLI binary (path from the CSRAN_CLI environment variable) and
// returns its exit code.
int run_cli(const std::string& args) {
  const char* cli = std::getenv("CSRAN_CLI");
  REQUIRE(cli != nullptr);
  const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("version and error strings") {
  CHECK(std::string(csran_version()).find('.') != std::string::npos);
  CHECK(csran_last_error() != nullptr);
}

TEST_CASE("config set/get round trip and unknown keys") {
  Config c;
  c.set("hidden", "12");
  char buf[32];
  REQUIRE(csran_config_get(c.cfg, "hidden", buf, sizeof(buf)) == CSRAN_OK);
  CHECK(std::string(buf) == "12");
  CHECK(csran_config_set(c.cfg, "no_such_key", "1") == CSRAN_ERR_CONFIG);
  CHECK(std::string(csran_last_error()).find("no_such_key") != std::string::npos);
  CHECK(csran_config_set(c.cfg, "hidden", "banana") == CSRAN_ERR_CONFIG);
  CHECK(csran_config_get(c.cfg, "hidden", buf, 1) == CSRAN_ERR_ARG);
  CHECK(csran_config_set(nullptr, "hidden", "1") == CSRAN_ERR_ARG);
}

TEST_CASE("config file loading") {
  Config c;
  const auto dir = fresh_dir("cfgfile");
  const auto path = dir + "/run.cfg";
  {
    std::ofstream out(path);
    out << "# comment\nhidden = 9\ntask = entailment3\n";
  }
  REQUIRE(csran_config_load_file(c.cfg, path.c_str()) == CSRAN_OK);
  char buf[32];
  csran_config_get(c.cfg, "hidden", buf, sizeof(buf));
  CHECK(std::string(buf) == "9");
  CHECK(csran_config_load_file(c.cfg, (dir + "/missing.cfg").c_str()) == CSRAN_ERR_CONFIG);
  std::filesystem::remove_all(dir);
}

TEST_CASE("train, eval and model handles through the C API") {
  const auto dir = fresh_dir("train");
  Config c;
  tiny_training_config(c, dir);

  char* report = nullptr;
  REQUIRE(csran_train(c.cfg, &report) == CSRAN_OK);
  REQUIRE(report != nullptr);
  const std::string rep(report);
  csran_string_free(report);
  CHECK(rep.find("seed_init=1") != std::string::npos);
  CHECK(rep.find("checkpoint=") != std::string::npos);
  const std::string ckpt = dir + "/checkpoint.csran";
  CHECK(std::filesystem::exists(ckpt));
  CHECK(std::filesystem::exists(dir + "/history.tsv"));

  // evaluating the saved checkpoint reproduces the in-memory dev report
  Config e;
  e.set("checkpoint", ckpt);
  e.set("task", "paraphrase");
  e.set("synthetic_dev", "12");
  e.set("batch_size", "8");
  e.set("max_len", "12");
  char* eval_report = nullptr;
  REQUIRE(csran_eval(e.cfg, &eval_report) == CSRAN_OK);
  const std::string eval_text(eval_report);
  csran_string_free(eval_report);
  CHECK(eval_text == slurp(dir + "/dev_report.txt"));
  CHECK(eval_text.find("accuracy=") != std::string::npos);
  CHECK(eval_text.find("f1=") != std::string::npos);

  // class-count mismatch: 3-class eval data against the 2-class checkpoint
  Config bad;
  bad.set("checkpoint", ckpt);
  bad.set("task", "entailment3");
  bad.set("synthetic_dev", "12");
  CHECK(csran_eval(bad.cfg, nullptr) == CSRAN_ERR_CONFIG);

  // opaque model handle scores a raw pair
  csran_model* model = nullptr;
  REQUIRE(csran_model_open(ckpt.c_str(), &model) == CSRAN_OK);
  char* info = nullptr;
  REQUIRE(csran_model_info(model, &info) == CSRAN_OK);
  const std::string info_text(info);
  csran_string_free(info);
  CHECK(info_text.find("\"task\":\"paraphrase\"") != std::string::npos);
  double scores[4] = {0, 0, 0, 0};
  size_t written = 0;
  REQUIRE(csran_model_score_pair(model, "tok1 tok2 tok3", "tok3 tok2 tok1", scores, 4,
                                 &written) == CSRAN_OK);
  CHECK(written == 2);
  CHECK(scores[0] + scores[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(csran_model_score_pair(model, "", "x", scores, 4, &written) == CSRAN_ERR_DATA);
  csran_model_close(model);

  CHECK(csran_model_open((dir + "/nope.csran").c_str(), &model) == CSRAN_ERR_DATA);
  std::filesystem::remove_all(dir);
}

TEST_CASE("determinism: rerunning training reproduces the history file") {
  const auto dir1 = fresh_dir("det1");
  const auto dir2 = fresh_dir("det2");
  for (const auto& dir : {dir1, dir2}) {
    Config c;
    tiny_training_config(c, dir);
    REQUIRE(csran_train(c.cfg, nullptr) == CSRAN_OK);
  }
  CHECK(slurp(dir1 + "/history.tsv") == slurp(dir2 + "/history.tsv"));
  CHECK(slurp(dir1 + "/history.tsv") == slurp(dir2 + "/history.tsv"));
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("gradcheck through the C API, including the negative control") {
  Config c;
  c.set("synthetic_train", "8");
  c.set("word_dim", "4");
  c.set("char_dim", "0");
  c.set("char_hidden", "0");
  c.set("hidden", "3");
  c.set("prediction_hidden", "5");
  c.set("fm_factor", "2");
  char* report = nullptr;
  REQUIRE(csran_gradcheck(c.cfg, &report) == CSRAN_OK);
  const std::string text(report);
  csran_string_free(report);
  CHECK(text.find("encoder.l0") != std::string::npos);
  CHECK(text.find("head.l0") != std::string::npos);
  CHECK(text.find("FAIL") == std::string::npos);
  // every parameter group appears exactly once
  auto count = [&](const std::string& needle) {
    size_t n = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
      ++n;
      pos += needle.size();
    }
    return n;
  };
  CHECK(count("encoder.l0\t") == 1);
  CHECK(count("agg.l0\t") == 1);

  // deliberately corrupted backward rule trips the tolerance
  Config bad;
  bad.set("synthetic_train", "8");
  bad.set("word_dim", "4");
  bad.set("char_dim", "0");
  bad.set("char_hidden", "0");
  bad.set("hidden", "3");
  bad.set("prediction_hidden", "5");
  bad.set("fm_factor", "2");
  bad.set("debug_corrupt_backward", "true");
  char* bad_report = nullptr;
  CHECK(csran_gradcheck(bad.cfg, &bad_report) == CSRAN_ERR_TOLERANCE);
  const std::string bad_text(bad_report ? bad_report : "");
  csran_string_free(bad_report);
  CHECK(bad_text.find("FAIL") != std::string::npos);
}

TEST_CASE("depth list parsing errors") {
  Config c;
  c.set("synthetic_train", "8");
  c.set("synthetic_dev", "8");
  CHECK(csran_depth_sweep(c.cfg, "1,banana", nullptr) == CSRAN_ERR_CONFIG);
  CHECK(csran_depth_sweep(c.cfg, "7", nullptr) == CSRAN_ERR_CONFIG);  // outside [1,5]
  CHECK(csran_depth_sweep(c.cfg, "", nullptr) == CSRAN_ERR_CONFIG);
}

namespace {

void sweep_config(Config& c) {
  c.set("task", "paraphrase");
  c.set("synthetic_train", "16");
  c.set("synthetic_dev", "8");
  c.set("epochs", "1");
  c.set("batch_size", "8");
  c.set("word_dim", "4");
  c.set("char_dim", "0");
  c.set("char_hidden", "0");
  c.set("hidden", "3");
  c.set("prediction_hidden", "5");
  c.set("max_len", "8");
  c.set("history_timing", "false");
}

std::string run_sweep(bool parallel, const std::string& out_dir) {
  Config c;
  sweep_config(c);
  c.set("out_dir", out_dir);
  c.set("sweep_parallel", parallel ? "true" : "false");
  char* report = nullptr;
  REQUIRE(csran_depth_sweep(c.cfg, "1,3", &report) == CSRAN_OK);
  std::string text(report);
  csran_string_free(report);
  return text;
}

}  // namespace

TEST_CASE("depth sweep emits depth x variant rows; parallel mode agrees") {
  const auto dir = fresh_dir("sweep");
  const auto seq = run_sweep(false, dir);
  CHECK(slurp(dir + "/depth_sweep.tsv") == seq);
  int data_rows = 0;
  std::istringstream in(seq);
  std::string line;
  std::vector<int> depths;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++data_rows;
    depths.push_back(std::stoi(line));
  }
  CHECK(data_rows == 4);  // depths {1,3} x {csran, baseline}
  CHECK(depths == std::vector<int>{1, 1, 3, 3});  // requested list order

  // scheduling must not change any result
  CHECK(run_sweep(true, dir) == seq);
  std::filesystem::remove_all(dir);
}

TEST_CASE("eval can dump affinity matrices") {
  const auto dir = fresh_dir("dump");
  Config c;
  tiny_training_config(c, dir);
  REQUIRE(csran_train(c.cfg, nullptr) == CSRAN_OK);

  Config e;
  e.set("checkpoint", dir + "/checkpoint.csran");
  e.set("task", "paraphrase");
  e.set("synthetic_dev", "12");
  e.set("max_len", "12");
  e.set("dump_affinity", "2");
  e.set("out_dir", dir);
  REQUIRE(csran_eval(e.cfg, nullptr) == CSRAN_OK);
  REQUIRE(std::filesystem::exists(dir + "/affinity_pair000.tsv"));
  REQUIRE(std::filesystem::exists(dir + "/affinity_pair001.tsv"));
  const auto text = slurp(dir + "/affinity_pair000.tsv");
  CHECK(text.find("stacks 2 x 2") != std::string::npos);
  CHECK(text.find('\t') != std::string::npos);
  CHECK(text.find(':') != std::string::npos);  // argmax layer pairs p:q
  std::filesystem::remove_all(dir);
}

TEST_CASE("cli exit codes") {
  // usage / config errors exit 2
  CHECK(run_cli("train --train_file /nonexistent/train.tsv") == 2);
  CHECK(run_cli("train --set bogus_key=1") == 2);
  CHECK(run_cli("eval") == 2);  // missing checkpoint
  CHECK(run_cli("bogus-subcommand") != 0);

  // smoke train exits 0 and writes a checkpoint
  const auto dir = fresh_dir("cli");
  const std::string flags =
      " --task paraphrase --synthetic_train 16 --synthetic_dev 8 --epochs 1 --batch_size 8"
      " --word_dim 4 --char_dim 0 --char_hidden 0 --hidden 3 --prediction_hidden 5"
      " --max_len 8 --out_dir " + dir;
  CHECK(run_cli("train" + flags) == 0);
  CHECK(std::filesystem::exists(dir + "/checkpoint.csran"));

  // tolerance failure exits 1
  CHECK(run_cli("gradcheck --synthetic_train 8 --word_dim 4 --char_dim 0 --char_hidden 0"
                " --hidden 3 --prediction_hidden 5 --fm_factor 2"
                " --set debug_corrupt_backward=true") == 1);
  std::filesystem::remove_all(dir);
}
