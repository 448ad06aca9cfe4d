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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"

namespace csran {

// Flat run configuration. Everything is settable through `key = value` config
// files and string key/value pairs (the CLI maps flags onto the same keys).
struct RunConfig {
  // task and data
  std::string task = "paraphrase";
  std::string train_file, dev_file, test_file;
  std::string embedding_file;
  std::string checkpoint;
  std::string out_dir = "runs/latest";
  int synthetic_train = 0;  // generate instead of reading train_file
  int synthetic_dev = 0;
  uint64_t synthetic_seed = 13;
  int min_count = 1;
  int max_len = 64;
  int max_word_len = 16;

  // model
  int word_dim = 8;
  int char_dim = 4;
  int char_hidden = 4;
  int hidden = 6;
  int stack_depth = 2;
  int agg_depth = 1;
  int prediction_layers = 2;
  int prediction_hidden = 8;
  int num_classes = 0;  // 0 = derived from task
  int fm_factor = 4;
  bool use_highway = true;
  bool use_mar = true;
  bool use_csra = true;
  double dropout = 0.1;
  std::string precision = "f32";

  // optimization
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  int batch_size = 32;
  int epochs = 20;
  int patience = 5;
  std::string dev_metric = "auto";

  // seeds (printed at startup; all randomness flows from these two)
  uint64_t seed_init = 1;
  uint64_t seed_shuffle = 2;

  // reporting and harness behavior
  bool history_timing = true;   // wall-clock column in history files
  int dump_affinity = 0;        // export affinity matrices for this many pairs
  int sweep_seeds = 1;          // seeds per depth-sweep cell
  bool sweep_parallel = false;  // run sweep cells on worker threads
  double gradcheck_epsilon = 1e-5;
  bool debug_corrupt_backward = false;  // negative-control hook

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Parses a flat `key = value` file ('#' starts a comment).
  void load_file(const std::string& path);

  // Cross-field validation; command-specific requirements live with the
  // commands. Throws ConfigError naming the offending field.
  void validate() const;
};

}  // namespace csran
