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

// Reusable layers: dense, highway, embeddings, dropout and the BiLSTM used
// throughout the encoder. Sequences are handled in "grid" form: a batch of N
// right-padded sequences of padded length L is a (N*L) x width matrix in
// row-major (sequence-major) order, with per-sequence true lengths alongside.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace csran {

template <class T>
using NamedParams = std::vector<std::pair<std::string, TensorPtr<T>>>;

template <class T>
TensorPtr<T> glorot_param(Rng& rng, int fan_in, int fan_out) {
  const double lim = glorot_limit(fan_in, fan_out);
  std::vector<T> d(static_cast<size_t>(fan_in) * fan_out);
  for (auto& v : d) v = static_cast<T>(rng.uniform(-lim, lim));
  return tensor<T>({fan_in, fan_out}, std::move(d), true);
}

// Validates that a binary mask is a contiguous prefix of ones and returns its
// length. Right padding only.
inline int prefix_len(const std::vector<uint8_t>& mask) {
  size_t n = mask.size();
  size_t len = 0;
  while (len < n && mask[len]) ++len;
  for (size_t i = len; i < n; ++i)
    if (mask[i]) throw DataError("mask must be a contiguous prefix of ones (right padding only)");
  return static_cast<int>(len);
}

// ---------------------------------------------------------------------------

template <class T>
struct Dense {
  TensorPtr<T> W, b;
  bool relu_act = false;

  void init(Rng& rng, int in, int out, bool relu_activation) {
    W = glorot_param<T>(rng, in, out);
    b = zeros<T>({out}, true);
    relu_act = relu_activation;
  }

  TensorPtr<T> forward(const TensorPtr<T>& x) const {
    auto y = add(matmul(x, W), b);
    return relu_act ? relu(y) : y;
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".W", W);
    out.emplace_back(prefix + ".b", b);
  }

  int64_t param_count() const { return W->numel() + b->numel(); }
};

// ---------------------------------------------------------------------------

// Transform/carry highway block: y = t * relu(Wh x + bh) + (1 - t) * x with
// t = sigmoid(Wt x + bt). Carry-gate bias starts at -1 so the block is close
// to the identity early in training.
template <class T>
struct Highway {
  struct Layer {
    TensorPtr<T> Wt, bt, Wh, bh;
  };
  std::vector<Layer> layers;
  int width = 0;

  void init(Rng& rng, int d, int depth) {
    width = d;
    layers.resize(depth);
    for (auto& l : layers) {
      l.Wt = glorot_param<T>(rng, d, d);
      l.bt = full<T>({d}, T(-1), true);
      l.Wh = glorot_param<T>(rng, d, d);
      l.bh = zeros<T>({d}, true);
    }
  }

  TensorPtr<T> forward(const TensorPtr<T>& x) const {
    if (x->cols() != width)
      throw DimensionError(detail::cat("highway: input width ", x->cols(),
                                       " does not match layer width ", width));
    auto h = x;
    for (const auto& l : layers) {
      auto t = sigmoid(add(matmul(h, l.Wt), l.bt));
      auto tr = relu(add(matmul(h, l.Wh), l.bh));
      h = add(mul(t, tr), mul(add_scalar(neg(t), T(1)), h));
    }
    return h;
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    for (size_t i = 0; i < layers.size(); ++i) {
      const auto p = prefix + ".l" + std::to_string(i);
      out.emplace_back(p + ".Wt", layers[i].Wt);
      out.emplace_back(p + ".bt", layers[i].bt);
      out.emplace_back(p + ".Wh", layers[i].Wh);
      out.emplace_back(p + ".bh", layers[i].bh);
    }
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& l : layers)
      n += l.Wt->numel() + l.bt->numel() + l.Wh->numel() + l.bh->numel();
    return n;
  }
};

// ---------------------------------------------------------------------------

// Embedding table. Row 0 is the padding vector: always zero, never updated.
// Individual rows can additionally be frozen (pretrained vectors).
template <class T>
struct EmbeddingTable {
  TensorPtr<T> table;  // V x d
  std::vector<uint8_t> frozen_rows;
  bool trainable = true;

  void init(Rng& rng, int vocab, int dim, bool trainable_) {
    table = glorot_param<T>(rng, vocab, dim);
    table->requires_grad = trainable_;
    trainable = trainable_;
    frozen_rows.assign(vocab, 0);
    frozen_rows[0] = 1;
    for (int c = 0; c < dim; ++c) table->data[c] = T(0);  // PAD row
  }

  int vocab_size() const { return table->shape[0]; }
  int dim() const { return table->shape[1]; }

  TensorPtr<T> lookup(const std::vector<int>& ids) const {
    for (int id : ids)
      if (id < 0 || id >= vocab_size())
        throw VocabError(detail::cat("embedding id ", id, " outside vocabulary of size ",
                                     vocab_size()));
    return gather_rows(table, ids);
  }

  // Zero the gradient of frozen rows so the optimizer never moves them.
  void scrub_grad() const {
    if (table->grad.empty()) return;
    const int d = dim();
    for (int r = 0; r < vocab_size(); ++r)
      if (frozen_rows[r])
        std::fill(table->grad.begin() + static_cast<int64_t>(r) * d,
                  table->grad.begin() + static_cast<int64_t>(r + 1) * d, T(0));
  }
};

// ---------------------------------------------------------------------------

// Inverted dropout: scales kept units by 1/(1-rate) during training and is
// the identity in evaluation mode.
template <class T>
TensorPtr<T> dropout(const TensorPtr<T>& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError(detail::cat("dropout rate ", rate, " outside [0, 1)"));
  if (!training || rate == 0.0) return x;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> m(x->numel());
  for (auto& v : m) v = rng.uniform() < rate ? T(0) : scale;
  return mul(x, tensor<T>(x->shape, std::move(m)));
}

// ---------------------------------------------------------------------------

// One direction of an LSTM. Gate order inside the fused 4h preactivation:
// input, forget, candidate, output.
template <class T>
struct LstmDir {
  TensorPtr<T> Wx, Wh, b;
  int in = 0, hidden = 0;

  void init(Rng& rng, int in_, int hidden_) {
    in = in_;
    hidden = hidden_;
    Wx = glorot_param<T>(rng, in, 4 * hidden);
    Wh = glorot_param<T>(rng, hidden, 4 * hidden);
    b = zeros<T>({4 * hidden}, true);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".Wx", Wx);
    out.emplace_back(prefix + ".Wh", Wh);
    out.emplace_back(prefix + ".b", b);
  }

  int64_t param_count() const { return Wx->numel() + Wh->numel() + b->numel(); }
};

template <class T>
struct BiLstm {
  LstmDir<T> fw, bw;
  int in = 0, hidden = 0;

  void init(Rng& rng, int in_, int hidden_) {
    in = in_;
    hidden = hidden_;
    fw.init(rng, in_, hidden_);
    bw.init(rng, in_, hidden_);
  }

  int out_width() const { return 2 * hidden; }

  // x is a (N*L) x in grid; lens[i] is the true length of sequence i.
  // Returns the (N*L) x 2h output grid; rows at padded positions are zero and
  // state never crosses a padded position.
  TensorPtr<T> forward_grid(const TensorPtr<T>& x, int n, int len, const std::vector<int>& lens) const {
    std::vector<TensorPtr<T>> of, ob;
    run_dir(x, n, len, lens, /*reverse=*/false, fw, &of, nullptr);
    run_dir(x, n, len, lens, /*reverse=*/true, bw, &ob, nullptr);
    std::vector<TensorPtr<T>> per_pos(len);
    for (int t = 0; t < len; ++t) per_pos[t] = concat<T>({of[t], ob[t]}, 1);
    auto tmajor = len == 1 ? per_pos[0] : concat(per_pos, 0);  // (L*N) x 2h, position-major
    if (n == 1 || len == 1) return tmajor;
    std::vector<int> perm(static_cast<size_t>(n) * len);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < len; ++t) perm[static_cast<size_t>(i) * len + t] = t * n + i;
    return gather_rows(tmajor, perm);
  }

  // Final-state encoding: concatenation of the forward direction's state at
  // the last real position and the backward direction's state at position 0.
  TensorPtr<T> forward_final(const TensorPtr<T>& x, int n, int len, const std::vector<int>& lens) const {
    TensorPtr<T> cf, cb;
    run_dir(x, n, len, lens, false, fw, nullptr, &cf);
    run_dir(x, n, len, lens, true, bw, nullptr, &cb);
    return concat<T>({cf, cb}, 1);
  }

  // Single sequence with an explicit binary mask (must be a prefix of ones).
  TensorPtr<T> forward_seq(const TensorPtr<T>& x, const std::vector<uint8_t>& mask) const {
    if (static_cast<int>(mask.size()) != x->rows())
      throw DimensionError("bilstm: mask length does not match sequence length");
    return forward_grid(x, 1, x->rows(), {prefix_len(mask)});
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    fw.collect(prefix + ".fw", out);
    bw.collect(prefix + ".bw", out);
  }

  int64_t param_count() const { return fw.param_count() + bw.param_count(); }

 private:
  void run_dir(const TensorPtr<T>& x, int n, int len, const std::vector<int>& lens, bool reverse,
               const LstmDir<T>& dir, std::vector<TensorPtr<T>>* outputs, TensorPtr<T>* final_h) const {
    if (static_cast<int>(lens.size()) != n)
      throw DimensionError("bilstm: lens size does not match batch");
    if (x->rows() != n * len || x->cols() != in)
      throw DimensionError(detail::cat("bilstm: grid shape ", shape_str(x->shape),
                                       " does not match batch ", n, " x ", len, " x ", in));
    const int h = hidden;
    auto h_prev = zeros<T>({n, h});
    auto c_prev = zeros<T>({n, h});
    if (outputs) outputs->assign(len, nullptr);
    for (int s = 0; s < len; ++s) {
      const int t = reverse ? len - 1 - s : s;
      std::vector<int> rows(n);
      bool any_masked = false, all_masked = true;
      std::vector<T> mdata(static_cast<size_t>(n) * h);
      for (int i = 0; i < n; ++i) {
        rows[i] = i * len + t;
        const bool live = t < lens[i];
        if (!live) any_masked = true;
        if (live) all_masked = false;
        std::fill(mdata.begin() + static_cast<int64_t>(i) * h,
                  mdata.begin() + static_cast<int64_t>(i + 1) * h, live ? T(1) : T(0));
      }
      if (all_masked) {
        if (outputs) (*outputs)[t] = zeros<T>({n, h});
        continue;  // state passes through unchanged
      }
      auto xt = gather_rows(x, rows);
      auto pre = add(add(matmul(xt, dir.Wx), matmul(h_prev, dir.Wh)), dir.b);
      auto gi = sigmoid(slice_cols(pre, 0, h));
      auto gf = sigmoid(slice_cols(pre, h, 2 * h));
      auto gc = tanh(slice_cols(pre, 2 * h, 3 * h));
      auto go = sigmoid(slice_cols(pre, 3 * h, 4 * h));
      auto c = add(mul(gf, c_prev), mul(gi, gc));
      auto hh = mul(go, tanh(c));
      if (!any_masked) {
        if (outputs) (*outputs)[t] = hh;
        h_prev = hh;
        c_prev = c;
      } else {
        auto m = tensor<T>({n, h}, mdata);
        std::vector<T> imdata(mdata.size());
        for (size_t i = 0; i < mdata.size(); ++i) imdata[i] = T(1) - mdata[i];
        auto im = tensor<T>({n, h}, std::move(imdata));
        auto h_out = mul(hh, m);
        if (outputs) (*outputs)[t] = h_out;
        c_prev = add(mul(c, m), mul(c_prev, im));
        h_prev = add(h_out, mul(h_prev, im));
      }
    }
    if (final_h) *final_h = h_prev;
  }
};

// ---------------------------------------------------------------------------

// Character-level word encoder: BiLSTM over a word's characters, final states
// concatenated and projected down to the configured width.
template <class T>
struct CharEncoder {
  BiLstm<T> lstm;
  Dense<T> proj;

  void init(Rng& rng, int char_dim, int char_hidden, int out_dim) {
    lstm.init(rng, char_dim, char_hidden);
    proj.init(rng, 2 * char_hidden, out_dim, /*relu=*/true);
  }

  // char_emb is a (W*Lc) x char_dim grid of embedded characters for W words.
  TensorPtr<T> encode(const TensorPtr<T>& char_emb, int words, int max_chars,
                      const std::vector<int>& char_lens) const {
    auto finals = lstm.forward_final(char_emb, words, max_chars, char_lens);
    return proj.forward(finals);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    lstm.collect(prefix + ".lstm", out);
    proj.collect(prefix + ".proj", out);
  }

  int64_t param_count() const { return lstm.param_count() + proj.param_count(); }
};

}  // namespace csran
