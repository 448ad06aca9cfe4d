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

#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

namespace csran {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int r = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(detail::cat(key, ": cannot parse integer from '", v, "'"));
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    uint64_t r = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(detail::cat(key, ": cannot parse integer from '", v, "'"));
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(detail::cat(key, ": cannot parse number from '", v, "'"));
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(detail::cat(key, ": cannot parse boolean from '", v, "'"));
}

std::string from_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define STR_FIELD(name) \
  {#name, {[](RunConfig& c, const std::string&, const std::string& v) { c.name = v; }, \
           [](const RunConfig& c) { return c.name; }}}
#define INT_FIELD(name) \
  {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = to_int(k, v); }, \
           [](const RunConfig& c) { return std::to_string(c.name); }}}
#define U64_FIELD(name) \
  {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = to_u64(k, v); }, \
           [](const RunConfig& c) { return std::to_string(c.name); }}}
#define DBL_FIELD(name) \
  {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = to_double(k, v); }, \
           [](const RunConfig& c) { return from_double(c.name); }}}
#define BOOL_FIELD(name) \
  {#name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.name = to_bool(k, v); }, \
           [](const RunConfig& c) { return c.name ? "true" : "false"; }}}

const std::map<std::string, Field>& field_table() {
  static const std::map<std::string, Field> table = {
      STR_FIELD(task),
      STR_FIELD(train_file),
      STR_FIELD(dev_file),
      STR_FIELD(test_file),
      STR_FIELD(embedding_file),
      STR_FIELD(checkpoint),
      STR_FIELD(out_dir),
      INT_FIELD(synthetic_train),
      INT_FIELD(synthetic_dev),
      U64_FIELD(synthetic_seed),
      INT_FIELD(min_count),
      INT_FIELD(max_len),
      INT_FIELD(max_word_len),
      INT_FIELD(word_dim),
      INT_FIELD(char_dim),
      INT_FIELD(char_hidden),
      INT_FIELD(hidden),
      INT_FIELD(stack_depth),
      INT_FIELD(agg_depth),
      INT_FIELD(prediction_layers),
      INT_FIELD(prediction_hidden),
      INT_FIELD(num_classes),
      INT_FIELD(fm_factor),
      BOOL_FIELD(use_highway),
      BOOL_FIELD(use_mar),
      BOOL_FIELD(use_csra),
      DBL_FIELD(dropout),
      STR_FIELD(precision),
      DBL_FIELD(lr),
      DBL_FIELD(beta1),
      DBL_FIELD(beta2),
      DBL_FIELD(adam_eps),
      DBL_FIELD(clip_norm),
      INT_FIELD(batch_size),
      INT_FIELD(epochs),
      INT_FIELD(patience),
      STR_FIELD(dev_metric),
      U64_FIELD(seed_init),
      U64_FIELD(seed_shuffle),
      BOOL_FIELD(history_timing),
      INT_FIELD(dump_affinity),
      INT_FIELD(sweep_seeds),
      BOOL_FIELD(sweep_parallel),
      DBL_FIELD(gradcheck_epsilon),
      BOOL_FIELD(debug_corrupt_backward),
  };
  return table;
}

#undef STR_FIELD
#undef INT_FIELD
#undef U64_FIELD
#undef DBL_FIELD
#undef BOOL_FIELD

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = field_table().find(key);
  if (it == field_table().end())
    throw ConfigError(detail::cat("unknown config key '", key, "'"));
  it->second.set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  auto it = field_table().find(key);
  if (it == field_table().end())
    throw ConfigError(detail::cat("unknown config key '", key, "'"));
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, f] : field_table()) {
      (void)f;
      v.push_back(k);
    }
    return v;
  }();
  return names;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(detail::cat("cannot open config file '", path, "'"));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(detail::cat(path, " line ", line_no, ": expected 'key = value'"));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(detail::cat(path, " line ", line_no, ": ", e.what()));
    }
  }
}

void RunConfig::validate() const {
  auto at_least = [](int v, int lo, const char* field) {
    if (v < lo) throw ConfigError(detail::cat(field, " must be >= ", lo, ", got ", v));
  };
  if (task != "paraphrase" && task != "entailment3" && task != "ranking")
    throw ConfigError(detail::cat("task: unknown kind '", task, "'"));
  if (precision != "f32" && precision != "f64")
    throw ConfigError(detail::cat("precision: expected f32 or f64, got '", precision, "'"));
  at_least(word_dim, 1, "word_dim");
  at_least(hidden, 1, "hidden");
  at_least(stack_depth, 1, "stack_depth");
  at_least(agg_depth, 1, "agg_depth");
  at_least(prediction_layers, 1, "prediction_layers");
  at_least(prediction_hidden, 1, "prediction_hidden");
  at_least(fm_factor, 1, "fm_factor");
  at_least(batch_size, 1, "batch_size");
  at_least(max_len, 1, "max_len");
  at_least(max_word_len, 1, "max_word_len");
  at_least(min_count, 1, "min_count");
  at_least(patience, 1, "patience");
  if (char_dim < 0 || char_hidden < 0)
    throw ConfigError("char_dim and char_hidden must be >= 0");
  if ((char_dim > 0) != (char_hidden > 0))
    throw ConfigError("char_dim and char_hidden must be zero or positive together");
  if (epochs < 0) throw ConfigError(detail::cat("epochs must be >= 0, got ", epochs));
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError(detail::cat("dropout must lie in [0, 1), got ", dropout));
  if (lr < 0.0) throw ConfigError("lr must be >= 0");
  if (num_classes != 0 && num_classes < 2)
    throw ConfigError(detail::cat("num_classes must be 0 (derive from task) or >= 2, got ",
                                  num_classes));
  if (task == "ranking" && num_classes != 0 && num_classes != 2)
    throw ConfigError("num_classes: pointwise ranking uses a two-class softmax");
  if (synthetic_train < 0 || synthetic_dev < 0)
    throw ConfigError("synthetic_train and synthetic_dev must be >= 0");
  if (sweep_seeds < 1) throw ConfigError("sweep_seeds must be >= 1");
  if (dump_affinity < 0) throw ConfigError("dump_affinity must be >= 0");
  if (gradcheck_epsilon <= 0.0) throw ConfigError("gradcheck_epsilon must be > 0");
  if (dev_metric != "auto" && dev_metric != "accuracy" && dev_metric != "f1" &&
      dev_metric != "map" && dev_metric != "mrr")
    throw ConfigError(detail::cat("dev_metric: unknown metric '", dev_metric, "'"));
}

}  // namespace csran
