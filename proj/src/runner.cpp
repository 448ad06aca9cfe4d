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

#include "runner.hpp"

#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "checkpoint.hpp"
#include "train.hpp"

namespace csran {

namespace {

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  va_list copy;
  va_copy(copy, args);
  const int len = std::vsnprintf(nullptr, 0, format, copy);
  va_end(copy);
  std::string out(len > 0 ? len : 0, '\0');
  std::vsnprintf(out.data(), out.size() + 1, format, args);
  va_end(args);
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(detail::cat("cannot write '", path, "'"));
  out << content;
  if (!out) throw DataError(detail::cat("failed writing '", path, "'"));
}

struct Corpus {
  TaskKind task = TaskKind::paraphrase;
  Vocab words, chars;
  std::vector<TokenizedPair> train, dev;
  EncodeStats stats;
  int num_classes = 2;
};

std::vector<RawPair> load_raw(const std::string& file, int synthetic, uint64_t seed,
                              TaskKind task, const char* field) {
  if (!file.empty()) {
    if (!std::filesystem::exists(file))
      throw ConfigError(detail::cat(field, ": file '", file, "' does not exist"));
    return read_pairs(file, task);
  }
  if (synthetic > 0) return gen_synthetic(task, synthetic, seed);
  throw ConfigError(detail::cat(field, ": no data configured (set ", field,
                                " or the matching synthetic_* size)"));
}

Corpus load_corpus(const RunConfig& cfg, bool need_dev) {
  Corpus c;
  c.task = task_from_string(cfg.task);
  c.num_classes = cfg.num_classes > 0 ? cfg.num_classes : task_num_classes(c.task);
  auto train_raw =
      load_raw(cfg.train_file, cfg.synthetic_train, cfg.synthetic_seed, c.task, "train_file");
  std::vector<RawPair> dev_raw;
  if (!cfg.dev_file.empty() || cfg.synthetic_dev > 0)
    dev_raw = load_raw(cfg.dev_file, cfg.synthetic_dev, cfg.synthetic_seed + 1, c.task,
                       "dev_file");
  else if (need_dev)
    throw ConfigError("dev_file: command needs dev data (set dev_file or synthetic_dev)");
  for (const auto& p : train_raw)
    if (p.label < 0 || p.label >= c.num_classes)
      throw DataError(detail::cat("training label ", p.label, " outside [0, ", c.num_classes, ")"));
  c.words = build_vocab(train_raw, cfg.min_count);
  c.chars = build_char_vocab(train_raw, 1);
  c.train = encode_pairs(train_raw, c.words, c.chars, cfg.max_len, cfg.max_word_len, &c.stats);
  if (!dev_raw.empty())
    c.dev = encode_pairs(dev_raw, c.words, c.chars, cfg.max_len, cfg.max_word_len, &c.stats);
  return c;
}

ModelConfig model_config_from(const RunConfig& cfg, TaskKind task) {
  ModelConfig mc;
  mc.word_dim = cfg.word_dim;
  mc.char_dim = cfg.char_dim;
  mc.char_hidden = cfg.char_hidden;
  mc.hidden = cfg.hidden;
  mc.stack_depth = cfg.stack_depth;
  mc.agg_depth = cfg.agg_depth;
  mc.prediction_layers = cfg.prediction_layers;
  mc.prediction_hidden = cfg.prediction_hidden;
  mc.num_classes = cfg.num_classes > 0 ? cfg.num_classes : task_num_classes(task);
  mc.fm_factor = cfg.fm_factor;
  mc.use_highway = cfg.use_highway;
  mc.use_mar = cfg.use_mar;
  mc.use_csra = cfg.use_csra;
  mc.dropout = cfg.dropout;
  mc.precision = precision_from_string(cfg.precision);
  return mc;
}

TrainOptions train_options_from(const RunConfig& cfg) {
  TrainOptions opt;
  opt.batch_size = cfg.batch_size;
  opt.epochs = cfg.epochs;
  opt.patience = cfg.patience;
  opt.lr = cfg.lr;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.adam_eps = cfg.adam_eps;
  opt.clip_norm = cfg.clip_norm;
  opt.shuffle_seed = cfg.seed_shuffle;
  opt.dev_metric = cfg.dev_metric;
  opt.timing = cfg.history_timing;
  return opt;
}

template <class T>
CsranModel<T> build_model(const ModelConfig& mc, const Corpus& corpus, const RunConfig& cfg,
                          std::string* notes) {
  Rng init_rng(cfg.seed_init);
  CsranModel<T> model(mc, corpus.words.size(), corpus.chars.size(), init_rng);
  if (!cfg.embedding_file.empty()) {
    auto load = load_embeddings(cfg.embedding_file, corpus.words, mc.word_dim);
    model.set_pretrained_words(load);
    if (notes) *notes += fmt("embedding_coverage=%.4f\n", load.coverage);
  }
  return model;
}

// --------------------------------------------------------------------------

template <class T>
CommandResult train_impl(const RunConfig& cfg) {
  CommandResult res;
  auto corpus = load_corpus(cfg, /*need_dev=*/false);
  const auto mc = model_config_from(cfg, corpus.task);
  std::string notes;
  auto model = build_model<T>(mc, corpus, cfg, &notes);
  auto summary = train_model(model, corpus.train, corpus.dev, corpus.task, train_options_from(cfg));

  std::filesystem::create_directories(cfg.out_dir);
  const std::string ckpt_path = cfg.out_dir + "/checkpoint.csran";
  save_checkpoint(ckpt_path, model, task_name(corpus.task), corpus.words, corpus.chars);
  write_text_file(cfg.out_dir + "/history.tsv", history_to_text(summary.history));

  std::string dev_report;
  if (!corpus.dev.empty()) {
    auto dev_batches = make_batches(corpus.dev, cfg.batch_size, 0,
                                    corpus.task == TaskKind::ranking, /*shuffle=*/false);
    dev_report = evaluate_model(model, dev_batches, corpus.task).to_text();
    write_text_file(cfg.out_dir + "/dev_report.txt", dev_report);
  }

  res.report = fmt("seed_init=%llu\nseed_shuffle=%llu\n",
                   static_cast<unsigned long long>(cfg.seed_init),
                   static_cast<unsigned long long>(cfg.seed_shuffle));
  res.report += notes;
  res.report += fmt("train_examples=%zu\ndev_examples=%zu\nparameters=%lld\n",
                    corpus.train.size(), corpus.dev.size(),
                    static_cast<long long>(model.param_count()));
  if (corpus.stats.truncated_seqs || corpus.stats.truncated_words)
    res.report += fmt("truncated_seqs=%d\ntruncated_words=%d\n", corpus.stats.truncated_seqs,
                      corpus.stats.truncated_words);
  res.report += fmt("epochs_run=%zu\nbest_epoch=%d\nbest_dev_%s=%.6f\ncheckpoint=%s\n",
                    summary.history.size(), summary.best_epoch,
                    summary.dev_metric_name.c_str(), summary.best_dev, ckpt_path.c_str());
  if (!dev_report.empty()) res.report += "---\n" + dev_report;
  return res;
}

// --------------------------------------------------------------------------

template <class T>
void dump_affinities(const CsranModel<T>& model, const std::vector<Batch>& batches, int limit,
                     const std::string& dir) {
  std::filesystem::create_directories(dir);
  Rng noop(0);
  int written = 0;
  for (const auto& b : batches) {
    if (written >= limit) break;
    typename CsranModel<T>::AffinityDump dump;
    auto logits = model.forward(b, false, noop, &dump);
    detach_graph(logits);
    for (int i = 0; i < b.size && written < limit; ++i, ++written) {
      const auto [la, lb] = dump.dims[i];
      std::string text = fmt("# affinity %d x %d, stacks %d x %d\n", la, lb, dump.ka, dump.kb);
      for (int r = 0; r < la; ++r) {
        for (int col = 0; col < lb; ++col)
          text += fmt("%s%.9g", col ? "\t" : "", static_cast<double>(dump.s[i][r * lb + col]));
        text += "\n";
      }
      text += "\n";
      for (int r = 0; r < la; ++r) {
        for (int col = 0; col < lb; ++col) {
          const int pq = dump.argmax[i][r * lb + col];
          text += fmt("%s%d:%d", col ? "\t" : "", pq / dump.kb, pq % dump.kb);
        }
        text += "\n";
      }
      write_text_file(dir + fmt("/affinity_pair%03d.tsv", written), text);
    }
  }
}

template <class T>
CommandResult eval_impl(const RunConfig& cfg, const CheckpointInfo& info) {
  CommandResult res;
  const TaskKind task = task_from_string(info.task);
  if (task_from_string(cfg.task) != task)
    throw ConfigError(detail::cat("task: configured '", cfg.task, "' (",
                                  task_num_classes(task_from_string(cfg.task)),
                                  " classes) does not match checkpoint trained for '", info.task,
                                  "' (", info.config.num_classes, " classes)"));
  const bool from_test = !cfg.test_file.empty();
  const std::string data_file = from_test ? cfg.test_file : cfg.dev_file;
  std::vector<RawPair> raw;
  if (!data_file.empty()) {
    if (!std::filesystem::exists(data_file))
      throw ConfigError(detail::cat(from_test ? "test_file" : "dev_file", ": file '", data_file,
                                    "' does not exist"));
    raw = read_pairs(data_file, task);
  } else if (cfg.synthetic_dev > 0) {
    raw = gen_synthetic(task, cfg.synthetic_dev, cfg.synthetic_seed + 1);
  } else {
    throw ConfigError("test_file: no evaluation data configured (set test_file, dev_file or synthetic_dev)");
  }
  for (const auto& p : raw)
    if (p.label < 0 || p.label >= info.config.num_classes)
      throw DataError(detail::cat("evaluation label ", p.label, " outside [0, ",
                                  info.config.num_classes, ")"));

  Vocab words = vocab_from_tokens(info.vocab_words);
  Vocab chars = vocab_from_tokens(info.vocab_chars);
  Rng init_rng(cfg.seed_init);
  CsranModel<T> model(info.config, words.size(), chars.size(), init_rng);
  load_checkpoint_params(cfg.checkpoint, info, model);

  auto pairs = encode_pairs(raw, words, chars, cfg.max_len, cfg.max_word_len);
  auto batches = make_batches(pairs, cfg.batch_size, 0, task == TaskKind::ranking, false);
  auto report = evaluate_model(model, batches, task);
  res.report = report.to_text();
  std::filesystem::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir + "/eval_report.txt", res.report);
  if (cfg.dump_affinity > 0)
    dump_affinities(model, batches, cfg.dump_affinity, cfg.out_dir);
  return res;
}

// --------------------------------------------------------------------------

struct CorruptGuard {
  explicit CorruptGuard(bool enable) { testing::corrupt_tanh_backward = enable; }
  ~CorruptGuard() { testing::corrupt_tanh_backward = false; }
};

std::string gradcheck_group(const std::string& param_name) {
  size_t first = param_name.find('.');
  if (first == std::string::npos) return param_name;
  size_t second = param_name.find('.', first + 1);
  return second == std::string::npos ? param_name : param_name.substr(0, second);
}

CommandResult gradcheck_impl(const RunConfig& cfg_in) {
  CommandResult res;
  RunConfig cfg = cfg_in;  // forced preconditions: f64, no dropout, tiny batch
  cfg.precision = "f64";
  cfg.dropout = 0.0;
  cfg.batch_size = 2;
  cfg.max_len = 5;
  if (cfg.train_file.empty() && cfg.synthetic_train == 0) cfg.synthetic_train = 8;

  auto corpus = load_corpus(cfg, false);
  const auto mc = model_config_from(cfg, corpus.task);
  std::string notes;
  auto model = build_model<double>(mc, corpus, cfg, &notes);
  auto batches = make_batches(corpus.train, cfg.batch_size, 0, corpus.task == TaskKind::ranking,
                              false);
  const Batch& batch = batches.front();

  CorruptGuard guard(cfg.debug_corrupt_backward);
  auto params = model.parameters(true);
  auto forward = [&]() {
    Rng noop(0);
    auto logits = model.forward(batch, /*training=*/false, noop);
    return model_loss(logits, batch.labels);
  };
  std::vector<GradCheckResult<double>> per_param;
  grad_check<double>(forward, params, cfg.gradcheck_epsilon, &per_param, /*refine=*/true);

  // aggregate per group; aggregation/prediction parameters never pass
  // through the max-affinity path, so they get the tighter tolerance
  std::map<std::string, double> group_err;
  for (const auto& r : per_param) {
    auto& v = group_err[gradcheck_group(r.name)];
    v = std::max(v, r.max_rel_err);
  }
  bool ok = true;
  std::string first_bad;
  res.report = fmt("parameters=%lld\nepsilon=%g\n", static_cast<long long>(model.param_count()),
                   cfg.gradcheck_epsilon);
  for (const auto& [group, err] : group_err) {
    const bool max_path = group.rfind("agg.", 0) != 0 && group.rfind("head.", 0) != 0;
    const double tol = max_path ? 1e-3 : 1e-5;
    const bool pass = err <= tol;
    if (!pass && first_bad.empty()) first_bad = group;
    ok = ok && pass;
    res.report += fmt("%s\t%.3e\t%.0e\t%s\n", group.c_str(), err, tol, pass ? "pass" : "FAIL");
  }
  if (!ok) {
    res.status = CSRAN_ERR_TOLERANCE;
    res.error = detail::cat("gradient check failed for parameter group '", first_bad, "'");
  }
  return res;
}

// --------------------------------------------------------------------------

template <class T>
double train_variant(const RunConfig& cfg, const Corpus& corpus, bool use_mar, bool use_csra,
                     int stack_depth, uint64_t seed_offset, int64_t* params_out) {
  RunConfig vcfg = cfg;
  vcfg.use_mar = use_mar;
  vcfg.use_csra = use_csra;
  vcfg.stack_depth = stack_depth;
  vcfg.seed_init = cfg.seed_init + seed_offset;
  vcfg.seed_shuffle = cfg.seed_shuffle + seed_offset;
  const auto mc = model_config_from(vcfg, corpus.task);
  auto model = build_model<T>(mc, corpus, vcfg, nullptr);
  if (params_out) *params_out = model.param_count();
  auto summary = train_model(model, corpus.train, corpus.dev, corpus.task, train_options_from(vcfg));
  return summary.best_dev;
}

template <class T>
CommandResult ablate_impl(const RunConfig& cfg) {
  CommandResult res;
  auto corpus = load_corpus(cfg, /*need_dev=*/true);
  const struct {
    const char* name;
    bool use_mar, use_csra;
  } variants[] = {{"original", true, true},
                  {"no_mar", false, true},
                  {"no_csra", true, false},
                  {"no_both", false, false}};
  const std::string metric =
      cfg.dev_metric == "auto" ? default_dev_metric(corpus.task) : cfg.dev_metric;
  res.report = fmt("variant\tparams\tdev_%s\n", metric.c_str());
  for (const auto& v : variants) {
    int64_t params = 0;
    const double dev =
        train_variant<T>(cfg, corpus, v.use_mar, v.use_csra, cfg.stack_depth, 0, &params);
    res.report += fmt("%s\t%lld\t%.6f\n", v.name, static_cast<long long>(params), dev);
  }
  std::filesystem::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir + "/ablation.tsv", res.report);
  return res;
}

// --------------------------------------------------------------------------

template <class T>
CommandResult depth_sweep_impl(const RunConfig& cfg, const std::vector<int>& depths) {
  CommandResult res;
  for (int d : depths)
    if (d < 1 || d > 5)
      throw ConfigError(detail::cat("depths: stack depth ", d, " outside [1, 5]"));
  auto corpus = load_corpus(cfg, /*need_dev=*/true);
  const std::string metric =
      cfg.dev_metric == "auto" ? default_dev_metric(corpus.task) : cfg.dev_metric;

  struct Cell {
    int depth;
    const char* variant;
    bool use_mar, use_csra;
    std::vector<double> per_seed;
  };
  std::vector<Cell> cells;
  for (int d : depths) {
    cells.push_back({d, "csran", true, true, {}});
    cells.push_back({d, "baseline", false, false, {}});
  }
  for (auto& c : cells) c.per_seed.resize(cfg.sweep_seeds, 0.0);

  auto run_cell_seed = [&](Cell& c, int s) {
    c.per_seed[s] = train_variant<T>(cfg, corpus, c.use_mar, c.use_csra, c.depth,
                                     static_cast<uint64_t>(s), nullptr);
  };
  if (cfg.sweep_parallel) {
    std::vector<std::pair<int, int>> jobs;
    for (size_t ci = 0; ci < cells.size(); ++ci)
      for (int s = 0; s < cfg.sweep_seeds; ++s) jobs.emplace_back(static_cast<int>(ci), s);
    std::atomic<size_t> next{0};
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1))
          run_cell_seed(cells[jobs[j].first], jobs[j].second);
      });
    for (auto& t : pool) t.join();
  } else {
    for (auto& c : cells)
      for (int s = 0; s < cfg.sweep_seeds; ++s) run_cell_seed(c, s);
  }

  res.report = fmt("# depth\tvariant\tdev_%s (mean of %d seed%s)\n", metric.c_str(),
                   cfg.sweep_seeds, cfg.sweep_seeds == 1 ? "" : "s");
  for (const auto& c : cells) {
    double mean = 0.0;
    for (double v : c.per_seed) mean += v;
    mean /= c.per_seed.size();
    res.report += fmt("%d\t%s\t%.6f\n", c.depth, c.variant, mean);
  }
  if (cfg.sweep_seeds > 1)
    for (const auto& c : cells)
      for (int s = 0; s < cfg.sweep_seeds; ++s)
        res.report += fmt("# seed\t%d\t%s\t%d\t%.6f\n", c.depth, c.variant, s, c.per_seed[s]);
  std::filesystem::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir + "/depth_sweep.tsv", res.report);
  return res;
}

// --------------------------------------------------------------------------

template <class F>
CommandResult guarded(const RunConfig& cfg, F&& body) {
  try {
    cfg.validate();
    return body();
  } catch (const std::exception& e) {
    CommandResult res;
    res.status = status_for_exception(e);
    res.error = e.what();
    return res;
  }
}

}  // namespace

csran_status status_for_exception(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return CSRAN_ERR_CONFIG;
  if (dynamic_cast<const FormatError*>(&e)) return CSRAN_ERR_DATA;
  if (dynamic_cast<const DataError*>(&e)) return CSRAN_ERR_DATA;
  if (dynamic_cast<const VocabError*>(&e)) return CSRAN_ERR_DATA;
  if (dynamic_cast<const NumericError*>(&e)) return CSRAN_ERR_RUNTIME;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return CSRAN_ERR_IO;
  return CSRAN_ERR_RUNTIME;
}

std::vector<int> parse_depth_list(const std::string& csv) {
  std::vector<int> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    try {
      size_t used = 0;
      out.push_back(std::stoi(cur, &used));
      if (used != cur.size()) throw std::invalid_argument(cur);
    } catch (const std::exception&) {
      throw ConfigError(detail::cat("depths: cannot parse '", cur, "'"));
    }
    cur.clear();
  };
  for (char c : csv) {
    if (c == ',' || c == ' ')
      flush();
    else
      cur.push_back(c);
  }
  flush();
  if (out.empty()) throw ConfigError("depths: empty depth list");
  return out;
}

CommandResult run_train(const RunConfig& cfg) {
  return guarded(cfg, [&] {
    return cfg.precision == "f64" ? train_impl<double>(cfg) : train_impl<float>(cfg);
  });
}

CommandResult run_eval(const RunConfig& cfg) {
  return guarded(cfg, [&]() -> CommandResult {
    if (cfg.checkpoint.empty()) throw ConfigError("checkpoint: required for eval");
    auto info = read_checkpoint_info(cfg.checkpoint);
    return info.config.precision == Precision::f64 ? eval_impl<double>(cfg, info)
                                                   : eval_impl<float>(cfg, info);
  });
}

CommandResult run_gradcheck(const RunConfig& cfg) {
  return guarded(cfg, [&] { return gradcheck_impl(cfg); });
}

CommandResult run_ablate(const RunConfig& cfg) {
  return guarded(cfg, [&] {
    return cfg.precision == "f64" ? ablate_impl<double>(cfg) : ablate_impl<float>(cfg);
  });
}

CommandResult run_depth_sweep(const RunConfig& cfg, const std::vector<int>& depths) {
  return guarded(cfg, [&] {
    return cfg.precision == "f64" ? depth_sweep_impl<double>(cfg, depths)
                                  : depth_sweep_impl<float>(cfg, depths);
  });
}

}  // namespace csran
