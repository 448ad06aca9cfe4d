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

// The full model: input encoder (words + char BiLSTM + highway), stacked
// recurrent encoders with CAFE refinement, co-stack residual affinity,
// bidirectional alignment, matching + aggregation BiLSTM, sum pooling and a
// dense prediction head. Ablation switches:
//   use_mar = false   drops the CAFE blocks between encoder layers
//   use_csra = false  scores affinity from the last layer pair only; the
//                     alignment itself still runs over the concatenated
//                     stacks, so the parameter count is unchanged
// Encoder and aggregation parameters are shared between the two sequences.

#pragma once

#include <string>
#include <vector>

#include "cafe.hpp"
#include "csra.hpp"
#include "data.hpp"
#include "layers.hpp"

namespace csran {

enum class Precision { f32, f64 };

inline Precision precision_from_string(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError(detail::cat("precision: expected f32 or f64, got '", s, "'"));
}

inline const char* precision_name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

struct ModelConfig {
  int word_dim = 8;
  int char_dim = 4;      // 0 disables the character encoder
  int char_hidden = 4;
  int hidden = 6;        // per-direction encoder and aggregation width
  int stack_depth = 2;
  int agg_depth = 1;
  int prediction_layers = 2;
  int prediction_hidden = 8;
  int num_classes = 2;
  int fm_factor = 4;
  bool use_highway = true;
  bool use_mar = true;
  bool use_csra = true;
  double dropout = 0.1;
  Precision precision = Precision::f32;

  bool char_enabled() const { return char_dim > 0 && char_hidden > 0; }
  // char word representations are projected to word_dim before concatenation
  int word_rep_dim() const { return word_dim + (char_enabled() ? word_dim : 0); }

  void validate() const {
    auto positive = [](int v, const char* field) {
      if (v < 1) throw ConfigError(detail::cat(field, " must be >= 1, got ", v));
    };
    positive(word_dim, "word_dim");
    positive(hidden, "hidden");
    positive(stack_depth, "stack_depth");
    positive(agg_depth, "agg_depth");
    positive(prediction_layers, "prediction_layers");
    positive(prediction_hidden, "prediction_hidden");
    positive(fm_factor, "fm_factor");
    if (num_classes < 2) throw ConfigError(detail::cat("num_classes must be >= 2, got ", num_classes));
    if (char_dim < 0 || char_hidden < 0)
      throw ConfigError("char_dim and char_hidden must be >= 0");
    if (char_enabled() != (char_dim > 0))
      throw ConfigError("char_dim and char_hidden must be zero or positive together");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError(detail::cat("dropout must lie in [0, 1), got ", dropout));
  }
};

template <class T>
struct CsranModel {
  ModelConfig cfg;
  EmbeddingTable<T> words;
  EmbeddingTable<T> chars;
  CharEncoder<T> char_enc;
  Highway<T> highway;
  MarEncoder<T> encoder;
  std::vector<BiLstm<T>> agg;
  std::vector<Dense<T>> head;

  CsranModel(const ModelConfig& cfg_, int word_vocab, int char_vocab, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    words.init(rng, word_vocab, cfg.word_dim, /*trainable=*/true);
    if (cfg.char_enabled()) {
      chars.init(rng, char_vocab, cfg.char_dim, /*trainable=*/true);
      char_enc.init(rng, cfg.char_dim, cfg.char_hidden, cfg.word_dim);
    }
    const int rep = cfg.word_rep_dim();
    if (cfg.use_highway) highway.init(rng, rep, 2);
    encoder.init(rng, rep, cfg.hidden, cfg.stack_depth, cfg.use_mar, cfg.fm_factor);
    const int kd = cfg.stack_depth * 2 * cfg.hidden;
    agg.resize(cfg.agg_depth);
    for (int i = 0; i < cfg.agg_depth; ++i)
      agg[i].init(rng, i == 0 ? 4 * kd : 2 * cfg.hidden, cfg.hidden);
    head.resize(cfg.prediction_layers + 1);
    int in = 4 * cfg.hidden;  // pooled z width
    for (int i = 0; i < cfg.prediction_layers; ++i) {
      head[i].init(rng, in, cfg.prediction_hidden, /*relu=*/true);
      in = cfg.prediction_hidden;
    }
    head.back().init(rng, in, cfg.num_classes, /*relu=*/false);
  }

  // Loads frozen pretrained word vectors; rows present in the file are
  // copied and never updated, missing rows keep their random init.
  void set_pretrained_words(const EmbeddingLoad& load) {
    if (static_cast<int>(load.found.size()) != words.vocab_size())
      throw DimensionError("pretrained rows do not match vocabulary size");
    const int d = cfg.word_dim;
    for (int r = 0; r < words.vocab_size(); ++r)
      if (load.found[r]) {
        for (int c = 0; c < d; ++c)
          words.table->data[static_cast<size_t>(r) * d + c] =
              static_cast<T>(load.matrix[static_cast<size_t>(r) * d + c]);
        words.frozen_rows[r] = 1;
      }
  }

  // Diagnostics captured by the last forward pass (affinity matrices per
  // pair), populated only when requested.
  struct AffinityDump {
    std::vector<std::vector<T>> s;          // row-major len_a x len_b
    std::vector<std::vector<int>> argmax;   // winning layer pair per cell
    std::vector<std::pair<int, int>> dims;
    int ka = 0, kb = 0;
  };

  TensorPtr<T> forward(const Batch& batch, bool training, Rng& drop_rng,
                       AffinityDump* dump = nullptr) const {
    const int n = batch.size;
    auto xa = embed_side(batch.a_ids, batch.a_chars, batch.la, batch.a_wlen, batch.a_char_lens,
                         n, training, drop_rng);
    auto xb = embed_side(batch.b_ids, batch.b_chars, batch.lb, batch.b_wlen, batch.b_char_lens,
                         n, training, drop_rng);
    auto [sa, sb] = encoder.encode(xa, batch.la, batch.a_lens, xb, batch.lb, batch.b_lens,
                                   cfg.dropout, training, drop_rng);

    // per-pair co-stack affinity + alignment + matching vectors
    const int k = cfg.stack_depth;
    const int kd = k * 2 * cfg.hidden;
    std::vector<TensorPtr<T>> match_a, match_b;
    for (int i = 0; i < n; ++i) {
      auto slices_a = sa.slices(i);
      auto slices_b = sb.slices(i);
      Affinity<T> aff =
          cfg.use_csra
              ? costack_affinity(slices_a, slices_b)
              : costack_affinity(std::vector<TensorPtr<T>>{slices_a.back()},
                                 std::vector<TensorPtr<T>>{slices_b.back()});
      auto a_cat = concat_stack(slices_a);
      auto b_cat = concat_stack(slices_b);
      auto [b_bar, a_bar] = bidir_align(a_cat, b_cat, aff.s);
      match_a.push_back(build_match(a_cat, b_bar));
      if (batch.a_lens[i] < batch.la)
        match_a.push_back(zeros<T>({batch.la - batch.a_lens[i], 4 * kd}));
      match_b.push_back(build_match(b_cat, a_bar));
      if (batch.b_lens[i] < batch.lb)
        match_b.push_back(zeros<T>({batch.lb - batch.b_lens[i], 4 * kd}));
      if (dump) {
        dump->s.push_back(aff.s->data);
        dump->argmax.push_back(aff.argmax_pq);
        dump->dims.emplace_back(batch.a_lens[i], batch.b_lens[i]);
        dump->ka = aff.ka;
        dump->kb = aff.kb;
      }
    }
    auto grid_a = match_a.size() == 1 ? match_a[0] : concat(match_a, 0);
    auto grid_b = match_b.size() == 1 ? match_b[0] : concat(match_b, 0);

    // shared aggregation BiLSTM stack
    for (const auto& layer : agg) {
      grid_a = dropout(grid_a, cfg.dropout, training, drop_rng);
      grid_b = dropout(grid_b, cfg.dropout, training, drop_rng);
      grid_a = layer.forward_grid(grid_a, n, batch.la, batch.a_lens);
      grid_b = layer.forward_grid(grid_b, n, batch.lb, batch.b_lens);
    }

    // temporal sum pooling over real positions, z = [sum a' ; sum b']
    std::vector<TensorPtr<T>> zs;
    zs.reserve(n);
    for (int i = 0; i < n; ++i) {
      std::vector<int> rows_a(batch.a_lens[i]), rows_b(batch.b_lens[i]);
      for (int t = 0; t < batch.a_lens[i]; ++t) rows_a[t] = i * batch.la + t;
      for (int t = 0; t < batch.b_lens[i]; ++t) rows_b[t] = i * batch.lb + t;
      zs.push_back(concat<T>({pool_sum(gather_rows(grid_a, rows_a)),
                              pool_sum(gather_rows(grid_b, rows_b))}, 1));
    }
    auto z = zs.size() == 1 ? zs[0] : concat(zs, 0);

    for (size_t i = 0; i < head.size(); ++i) {
      z = dropout(z, cfg.dropout, training, drop_rng);
      z = head[i].forward(z);
    }
    return z;  // n x num_classes logits
  }

  NamedParams<T> parameters(bool trainable_only = true) const {
    NamedParams<T> out;
    if (!trainable_only || words.trainable) out.emplace_back("words.table", words.table);
    if (cfg.char_enabled()) {
      out.emplace_back("chars.table", chars.table);
      char_enc.collect("char_enc", out);
    }
    if (cfg.use_highway) highway.collect("highway", out);
    encoder.collect("encoder", out);
    for (size_t i = 0; i < agg.size(); ++i) agg[i].collect("agg.l" + std::to_string(i), out);
    for (size_t i = 0; i < head.size(); ++i) head[i].collect("head.l" + std::to_string(i), out);
    return out;
  }

  // Trainable parameter count; frozen pretrained rows are excluded.
  int64_t param_count() const {
    int64_t c = 0;
    int64_t frozen = 0;
    for (int r = 0; r < words.vocab_size(); ++r)
      if (words.frozen_rows[r]) ++frozen;
    c += static_cast<int64_t>(words.vocab_size() - frozen) * cfg.word_dim;
    if (cfg.char_enabled()) {
      c += static_cast<int64_t>(chars.vocab_size() - 1) * cfg.char_dim;  // PAD row frozen
      c += char_enc.param_count();
    }
    if (cfg.use_highway) c += highway.param_count();
    c += encoder.param_count();
    for (const auto& l : agg) c += l.param_count();
    for (const auto& l : head) c += l.param_count();
    return c;
  }

  void zero_grads() const {
    for (auto& [name, p] : parameters(false)) {
      (void)name;
      p->zero_grad();
    }
  }

  // Clears gradient of rows that must never move (PAD and pretrained rows).
  void scrub_grads() const {
    words.scrub_grad();
    if (cfg.char_enabled()) chars.scrub_grad();
  }

 private:
  TensorPtr<T> embed_side(const std::vector<int>& word_ids, const std::vector<int>& char_ids,
                          int len, int wlen, const std::vector<int>& char_lens, int n,
                          bool training, Rng& drop_rng) const {
    auto rep = words.lookup(word_ids);  // (n*len) x word_dim
    if (cfg.char_enabled()) {
      auto ce = chars.lookup(char_ids);  // (n*len*wlen) x char_dim
      auto cw = char_enc.encode(ce, n * len, wlen, char_lens);
      rep = concat<T>({rep, cw}, 1);
    }
    rep = dropout(rep, cfg.dropout, training, drop_rng);
    if (cfg.use_highway) rep = highway.forward(rep);
    return rep;
  }
};

// Mean softmax cross-entropy training loss.
template <class T>
TensorPtr<T> model_loss(const TensorPtr<T>& logits, const std::vector<int>& labels) {
  return cross_entropy(logits, labels);
}

// argmax class per row
template <class T>
std::vector<int> predict_classes(const TensorPtr<T>& logits) {
  const int n = logits->rows(), c = logits->cols();
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (logits->at(i, j) > logits->at(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

// Pointwise ranking score: probability of the positive class (class 1).
template <class T>
std::vector<double> ranking_scores(const TensorPtr<T>& logits) {
  logits->require_rank2();
  if (logits->cols() != 2) throw ContractError("ranking_scores: expected two-class logits");
  const int n = logits->rows();
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const double d = static_cast<double>(logits->at(i, 0)) - static_cast<double>(logits->at(i, 1));
    out[i] = 1.0 / (1.0 + std::exp(d));
  }
  return out;
}

}  // namespace csran
