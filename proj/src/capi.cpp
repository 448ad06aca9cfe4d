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

// extern-C boundary: opaque handles over the C++ core, status codes, and a
// thread-local last-error message. No exception escapes this layer.

#include "csran.h"

#include <cstring>
#include <memory>
#include <string>
#include <variant>

#include "checkpoint.hpp"
#include "runner.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

csran_status fail(csran_status st, const std::string& msg) {
  set_error(msg);
  return st;
}

template <class F>
csran_status boundary(F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    return fail(csran::status_for_exception(e), e.what());
  } catch (...) {
    return fail(CSRAN_ERR_RUNTIME, "unknown error");
  }
}

csran_status finish(const csran::CommandResult& res, char** report_out) {
  if (report_out) *report_out = dup_string(res.report);
  if (res.status != CSRAN_OK) set_error(res.error.empty() ? "command failed" : res.error);
  return res.status;
}

}  // namespace

struct csran_config {
  csran::RunConfig cfg;
};

struct csran_model {
  csran::CheckpointInfo info;
  csran::Vocab words, chars;
  std::variant<std::unique_ptr<csran::CsranModel<float>>,
               std::unique_ptr<csran::CsranModel<double>>> model;
  std::string path;
};

namespace {

template <class T>
void score_pair_impl(const csran::CsranModel<T>& net, const csran_model& m, const char* text_a,
                     const char* text_b, double* scores, size_t scores_len, size_t* written) {
  csran::RawPair raw;
  raw.a = text_a;
  raw.b = text_b;
  if (csran::tokenize(raw.a).empty() || csran::tokenize(raw.b).empty())
    throw csran::DataError("score_pair: empty text");
  auto pairs = csran::encode_pairs({raw}, m.words, m.chars, 64, 16);
  auto batches = csran::make_batches(pairs, 1, 0, false, false);
  csran::Rng noop(0);
  auto logits = net.forward(batches.front(), false, noop);
  const int c = logits->cols();
  if (static_cast<size_t>(c) > scores_len)
    throw csran::ContractError(csran::detail::cat("score_pair: need room for ", c, " scores"));
  // softmax over the single row
  double hi = logits->at(0, 0);
  for (int j = 1; j < c; ++j) hi = std::max(hi, static_cast<double>(logits->at(0, j)));
  double z = 0.0;
  for (int j = 0; j < c; ++j) z += std::exp(static_cast<double>(logits->at(0, j)) - hi);
  for (int j = 0; j < c; ++j)
    scores[j] = std::exp(static_cast<double>(logits->at(0, j)) - hi) / z;
  if (written) *written = static_cast<size_t>(c);
  csran::detach_graph(logits);
}

}  // namespace

extern "C" {

const char* csran_version(void) { return "0.1.0"; }

const char* csran_last_error(void) { return g_last_error.c_str(); }

void csran_string_free(char* s) { std::free(s); }

csran_status csran_config_create(csran_config** out) {
  if (!out) return fail(CSRAN_ERR_ARG, "csran_config_create: null out pointer");
  return boundary([&] {
    *out = new csran_config();
    return CSRAN_OK;
  });
}

void csran_config_destroy(csran_config* cfg) { delete cfg; }

csran_status csran_config_load_file(csran_config* cfg, const char* path) {
  if (!cfg || !path) return fail(CSRAN_ERR_ARG, "csran_config_load_file: null argument");
  return boundary([&] {
    cfg->cfg.load_file(path);
    return CSRAN_OK;
  });
}

csran_status csran_config_set(csran_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(CSRAN_ERR_ARG, "csran_config_set: null argument");
  return boundary([&] {
    cfg->cfg.set(key, value);
    return CSRAN_OK;
  });
}

csran_status csran_config_get(const csran_config* cfg, const char* key, char* buf, size_t buflen) {
  if (!cfg || !key || !buf) return fail(CSRAN_ERR_ARG, "csran_config_get: null argument");
  return boundary([&]() -> csran_status {
    const std::string v = cfg->cfg.get(key);
    if (v.size() + 1 > buflen)
      return fail(CSRAN_ERR_ARG, "csran_config_get: buffer too small");
    std::memcpy(buf, v.c_str(), v.size() + 1);
    return CSRAN_OK;
  });
}

csran_status csran_train(const csran_config* cfg, char** report_out) {
  if (!cfg) return fail(CSRAN_ERR_ARG, "csran_train: null config");
  return boundary([&] { return finish(csran::run_train(cfg->cfg), report_out); });
}

csran_status csran_eval(const csran_config* cfg, char** report_out) {
  if (!cfg) return fail(CSRAN_ERR_ARG, "csran_eval: null config");
  return boundary([&] { return finish(csran::run_eval(cfg->cfg), report_out); });
}

csran_status csran_gradcheck(const csran_config* cfg, char** report_out) {
  if (!cfg) return fail(CSRAN_ERR_ARG, "csran_gradcheck: null config");
  return boundary([&] { return finish(csran::run_gradcheck(cfg->cfg), report_out); });
}

csran_status csran_ablate(const csran_config* cfg, char** report_out) {
  if (!cfg) return fail(CSRAN_ERR_ARG, "csran_ablate: null config");
  return boundary([&] { return finish(csran::run_ablate(cfg->cfg), report_out); });
}

csran_status csran_depth_sweep(const csran_config* cfg, const char* depths_csv,
                               char** report_out) {
  if (!cfg || !depths_csv) return fail(CSRAN_ERR_ARG, "csran_depth_sweep: null argument");
  return boundary([&] {
    auto depths = csran::parse_depth_list(depths_csv);
    return finish(csran::run_depth_sweep(cfg->cfg, depths), report_out);
  });
}

csran_status csran_model_open(const char* checkpoint_path, csran_model** out) {
  if (!checkpoint_path || !out) return fail(CSRAN_ERR_ARG, "csran_model_open: null argument");
  return boundary([&] {
    auto m = std::make_unique<csran_model>();
    m->info = csran::read_checkpoint_info(checkpoint_path);
    m->words = csran::vocab_from_tokens(m->info.vocab_words);
    m->chars = csran::vocab_from_tokens(m->info.vocab_chars);
    m->path = checkpoint_path;
    csran::Rng rng(1);
    if (m->info.config.precision == csran::Precision::f64) {
      auto net = std::make_unique<csran::CsranModel<double>>(m->info.config, m->words.size(),
                                                             m->chars.size(), rng);
      csran::load_checkpoint_params(checkpoint_path, m->info, *net);
      m->model = std::move(net);
    } else {
      auto net = std::make_unique<csran::CsranModel<float>>(m->info.config, m->words.size(),
                                                            m->chars.size(), rng);
      csran::load_checkpoint_params(checkpoint_path, m->info, *net);
      m->model = std::move(net);
    }
    *out = m.release();
    return CSRAN_OK;
  });
}

void csran_model_close(csran_model* m) { delete m; }

csran_status csran_model_info(const csran_model* m, char** json_out) {
  if (!m || !json_out) return fail(CSRAN_ERR_ARG, "csran_model_info: null argument");
  return boundary([&] {
    nlohmann::json j;
    j["task"] = m->info.task;
    j["precision"] = csran::precision_name(m->info.config.precision);
    j["num_classes"] = m->info.config.num_classes;
    j["stack_depth"] = m->info.config.stack_depth;
    j["hidden"] = m->info.config.hidden;
    j["use_mar"] = m->info.config.use_mar;
    j["use_csra"] = m->info.config.use_csra;
    j["vocab_words"] = m->words.size();
    j["vocab_chars"] = m->chars.size();
    std::visit([&](const auto& net) { j["parameters"] = net->param_count(); }, m->model);
    *json_out = dup_string(j.dump());
    return CSRAN_OK;
  });
}

csran_status csran_model_score_pair(const csran_model* m, const char* text_a, const char* text_b,
                                    double* scores, size_t scores_len, size_t* written) {
  if (!m || !text_a || !text_b || !scores)
    return fail(CSRAN_ERR_ARG, "csran_model_score_pair: null argument");
  return boundary([&] {
    std::visit(
        [&](const auto& net) {
          score_pair_impl(*net, *m, text_a, text_b, scores, scores_len, written);
        },
        m->model);
    return CSRAN_OK;
  });
}

}  // extern "C"
