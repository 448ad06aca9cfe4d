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

// Command line driver. Talks to the library exclusively through the C API in
// csran.h. Exit codes: 0 success, 1 assertion/tolerance failure, 2 usage or
// configuration error.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csran.h"

namespace {

int exit_code_for(csran_status st) {
  switch (st) {
    case CSRAN_OK:
      return 0;
    case CSRAN_ERR_TOLERANCE:
    case CSRAN_ERR_RUNTIME:
      return 1;
    default:
      return 2;
  }
}

struct ConfigHandle {
  csran_config* cfg = nullptr;
  ConfigHandle() { csran_config_create(&cfg); }
  ~ConfigHandle() { csran_config_destroy(cfg); }
};

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> sets;
};

// Registers --config and --set plus direct flags for the common keys; every
// flag maps onto a config key so config files and flags are interchangeable.
void add_common(CLI::App* cmd, CommonArgs& args, std::vector<std::pair<std::string, std::string>>& kv) {
  cmd->add_option("-c,--config", args.config_file, "flat key = value config file");
  cmd->add_option("--set", args.sets, "override KEY=VALUE (repeatable)");
  static const char* keys[] = {
      "task",        "train_file",  "dev_file",     "test_file",   "embedding_file",
      "checkpoint",  "out_dir",     "synthetic_train", "synthetic_dev", "synthetic_seed",
      "min_count",   "max_len",     "max_word_len", "word_dim",    "char_dim",
      "char_hidden", "hidden",      "stack_depth",  "agg_depth",   "prediction_layers",
      "prediction_hidden", "num_classes", "fm_factor", "use_highway", "use_mar",
      "use_csra",    "dropout",     "precision",    "lr",          "beta1",
      "beta2",       "adam_eps",    "clip_norm",    "batch_size",  "epochs",
      "patience",    "dev_metric",  "seed_init",    "seed_shuffle", "history_timing",
      "dump_affinity", "sweep_seeds", "sweep_parallel", "gradcheck_epsilon"};
  kv.reserve(std::size(keys));  // CLI11 keeps references into the slots
  for (const char* key : keys) {
    kv.emplace_back(key, "");
    auto& slot = kv.back().second;
    cmd->add_option("--" + std::string(key), slot, "config key " + std::string(key));
  }
}

int apply_config(const ConfigHandle& h, const CommonArgs& args,
                 const std::vector<std::pair<std::string, std::string>>& kv) {
  if (!args.config_file.empty() &&
      csran_config_load_file(h.cfg, args.config_file.c_str()) != CSRAN_OK) {
    std::fprintf(stderr, "error: %s\n", csran_last_error());
    return 2;
  }
  for (const auto& [key, value] : kv) {
    if (value.empty()) continue;
    if (csran_config_set(h.cfg, key.c_str(), value.c_str()) != CSRAN_OK) {
      std::fprintf(stderr, "error: %s\n", csran_last_error());
      return 2;
    }
  }
  for (const auto& s : args.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects KEY=VALUE, got '%s'\n", s.c_str());
      return 2;
    }
    if (csran_config_set(h.cfg, s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()) != CSRAN_OK) {
      std::fprintf(stderr, "error: %s\n", csran_last_error());
      return 2;
    }
  }
  return 0;
}

void print_seeds(const ConfigHandle& h) {
  char init_buf[32] = "?", shuf_buf[32] = "?";
  csran_config_get(h.cfg, "seed_init", init_buf, sizeof(init_buf));
  csran_config_get(h.cfg, "seed_shuffle", shuf_buf, sizeof(shuf_buf));
  std::printf("seeds: init=%s shuffle/dropout=%s\n", init_buf, shuf_buf);
}

int finish(csran_status st, char* report) {
  if (report) {
    if (report[0]) std::fputs(report, stdout);
    csran_string_free(report);
  }
  if (st != CSRAN_OK) std::fprintf(stderr, "error: %s\n", csran_last_error());
  return exit_code_for(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csran: co-stack residual affinity networks for text sequence matching"};
  app.require_subcommand(1);

  struct Cmd {
    CLI::App* sub = nullptr;
    CommonArgs args;
    std::vector<std::pair<std::string, std::string>> kv;
  };
  Cmd train, eval, gradcheck, ablate, sweep;
  std::string depths = "1,2,3";

  train.sub = app.add_subcommand("train", "train a model, write checkpoint + history");
  eval.sub = app.add_subcommand("eval", "evaluate a checkpoint on a data file");
  gradcheck.sub = app.add_subcommand("gradcheck", "finite-difference gradient check");
  ablate.sub = app.add_subcommand("ablate", "train original / no_mar / no_csra / no_both");
  sweep.sub = app.add_subcommand("depth-sweep", "compare stack depths against the baseline");
  sweep.sub->add_option("--depths", depths, "comma-separated stack depths (default 1,2,3)");

  for (Cmd* c : {&train, &eval, &gradcheck, &ablate, &sweep}) add_common(c->sub, c->args, c->kv);

  CLI11_PARSE(app, argc, argv);

  auto run = [&](Cmd& c, auto&& fn, bool seeds) -> int {
    ConfigHandle h;
    if (!h.cfg) {
      std::fprintf(stderr, "error: %s\n", csran_last_error());
      return 2;
    }
    if (int rc = apply_config(h, c.args, c.kv)) return rc;
    if (seeds) print_seeds(h);
    char* report = nullptr;
    const csran_status st = fn(h, &report);
    return finish(st, report);
  };

  if (train.sub->parsed())
    return run(train, [](ConfigHandle& h, char** r) { return csran_train(h.cfg, r); }, true);
  if (eval.sub->parsed())
    return run(eval, [](ConfigHandle& h, char** r) { return csran_eval(h.cfg, r); }, false);
  if (gradcheck.sub->parsed())
    return run(gradcheck, [](ConfigHandle& h, char** r) { return csran_gradcheck(h.cfg, r); },
               true);
  if (ablate.sub->parsed())
    return run(ablate, [](ConfigHandle& h, char** r) { return csran_ablate(h.cfg, r); }, true);
  if (sweep.sub->parsed())
    return run(sweep,
               [&](ConfigHandle& h, char** r) {
                 return csran_depth_sweep(h.cfg, depths.c_str(), r);
               },
               true);
  return 2;
}
