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

// CAFE blocks and the multi-level attention refinement (MAR) encoder.
//
// A CAFE block soft-aligns the two sequences, builds concat / multiply /
// subtract matching vectors against the aligned summaries, and compresses
// each to a scalar with a factorization machine. Three inter-attention and
// three intra-attention scalars are appended to every position, so a d-wide
// input leaves the block d+6 wide. The MAR encoder interleaves CAFE blocks
// between the stacked BiLSTM layers; the next layer projects the widened
// representation back to 2h.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "layers.hpp"

namespace csran {

// Factorization machine: M(x) = w0 + sum_i w_i x_i
//                              + sum_i sum_{j>i} <v_i, v_j> x_i x_j.
// The pairwise term is evaluated through the O(n*k) identity
// 0.5 * sum_f ((x.v_f)^2 - (x^2).(v_f^2)).
template <class T>
struct FmParams {
  TensorPtr<T> w0;  // {1}
  TensorPtr<T> w;   // n x 1
  TensorPtr<T> v;   // n x k
  int n = 0, factor = 0;

  void init(Rng& rng, int n_, int factor_) {
    n = n_;
    factor = factor_;
    w0 = zeros<T>({1}, true);
    w = glorot_param<T>(rng, n, 1);
    v = glorot_param<T>(rng, n, factor);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".w0", w0);
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".v", v);
  }

  int64_t param_count() const { return 1 + w->numel() + v->numel(); }
};

// Applies the FM to every row of X; returns an m x 1 column of scalars.
template <class T>
TensorPtr<T> fm_eval(const TensorPtr<T>& x, const FmParams<T>& p) {
  if (x->cols() != p.n)
    throw DimensionError(detail::cat("fm_eval: input width ", x->cols(),
                                     " does not match parameter width ", p.n));
  auto lin = matmul(x, p.w);                      // m x 1
  auto xv = matmul(x, p.v);                       // m x k
  auto x2v2 = matmul(mul(x, x), mul(p.v, p.v));   // m x k
  auto pair_term = mul_scalar(sum(sub(mul(xv, xv), x2v2), 1), T(0.5));
  return add(add(lin, reshape(pair_term, {x->rows(), 1})), p.w0);
}

// ---------------------------------------------------------------------------

template <class T>
struct CafeParams {
  Dense<T> proj;        // alignment projection F for inter-attention
  FmParams<T> fm_cat, fm_mul, fm_sub;
  Dense<T> proj_intra;  // separate parameters for intra-attention
  FmParams<T> fm_icat, fm_imul, fm_isub;
  int width = 0;

  void init(Rng& rng, int d, int factor) {
    width = d;
    proj.init(rng, d, d, /*relu=*/true);
    fm_cat.init(rng, 2 * d, factor);
    fm_mul.init(rng, d, factor);
    fm_sub.init(rng, d, factor);
    proj_intra.init(rng, d, d, /*relu=*/true);
    fm_icat.init(rng, 2 * d, factor);
    fm_imul.init(rng, d, factor);
    fm_isub.init(rng, d, factor);
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    proj.collect(prefix + ".proj", out);
    fm_cat.collect(prefix + ".fm_cat", out);
    fm_mul.collect(prefix + ".fm_mul", out);
    fm_sub.collect(prefix + ".fm_sub", out);
    proj_intra.collect(prefix + ".proj_intra", out);
    fm_icat.collect(prefix + ".fm_icat", out);
    fm_imul.collect(prefix + ".fm_imul", out);
    fm_isub.collect(prefix + ".fm_isub", out);
  }

  int64_t param_count() const {
    return proj.param_count() + fm_cat.param_count() + fm_mul.param_count() +
           fm_sub.param_count() + proj_intra.param_count() + fm_icat.param_count() +
           fm_imul.param_count() + fm_isub.param_count();
  }
};

// E_ij = F(a_i) . F(b_j)
template <class T>
TensorPtr<T> score_align(const TensorPtr<T>& a, const TensorPtr<T>& b, const Dense<T>& proj) {
  if (a->cols() != b->cols())
    throw DimensionError(detail::cat("score_align: widths ", a->cols(), " and ", b->cols(),
                                     " disagree"));
  return matmul(proj.forward(a), transpose(proj.forward(b)));
}

// Softmax-normalized bidirectional alignment. Returns
//   first:  A summarized for each position of B  (len_b x d)
//   second: B summarized for each position of A  (len_a x d)
// Masks (one entry per position, when given) exclude padded positions from
// the normalization.
template <class T>
std::pair<TensorPtr<T>, TensorPtr<T>> soft_align(const TensorPtr<T>& e, const TensorPtr<T>& a,
                                                 const TensorPtr<T>& b,
                                                 const std::vector<uint8_t>& mask_a = {},
                                                 const std::vector<uint8_t>& mask_b = {}) {
  auto a_for_b = matmul(transpose(softmax(e, 0, mask_a)), a);
  auto b_for_a = matmul(softmax(e, 1, mask_b), b);
  return {a_for_b, b_for_a};
}

// Three scalar features per position: FM over [aligned; x], aligned * x and
// aligned - x. Returns len x 3.
template <class T>
TensorPtr<T> matching_features(const TensorPtr<T>& x, const TensorPtr<T>& aligned,
                               const FmParams<T>& fm_cat, const FmParams<T>& fm_mul,
                               const FmParams<T>& fm_sub) {
  auto f_cat = fm_eval(concat<T>({aligned, x}, 1), fm_cat);
  auto f_mul = fm_eval(mul(aligned, x), fm_mul);
  auto f_sub = fm_eval(sub(aligned, x), fm_sub);
  return concat<T>({f_cat, f_mul, f_sub}, 1);
}

// Self-alignment features of one sequence (len x 3).
template <class T>
TensorPtr<T> intra_features(const TensorPtr<T>& x, const CafeParams<T>& p) {
  auto e = score_align(x, x, p.proj_intra);
  auto aligned = matmul(softmax(e, 1), x);
  return matching_features(x, aligned, p.fm_icat, p.fm_imul, p.fm_isub);
}

// Full CAFE block over one sequence pair (true-length inputs, no padding).
// The first d output columns are the unchanged input.
template <class T>
std::pair<TensorPtr<T>, TensorPtr<T>> cafe_block(const TensorPtr<T>& a, const TensorPtr<T>& b,
                                                 const CafeParams<T>& p) {
  auto e = score_align(a, b, p.proj);
  auto [a_for_b, b_for_a] = soft_align(e, a, b);
  auto inter_a = matching_features(a, b_for_a, p.fm_cat, p.fm_mul, p.fm_sub);
  auto inter_b = matching_features(b, a_for_b, p.fm_cat, p.fm_mul, p.fm_sub);
  auto out_a = concat<T>({a, inter_a, intra_features(a, p)}, 1);
  auto out_b = concat<T>({b, inter_b, intra_features(b, p)}, 1);
  return {out_a, out_b};
}

// ---------------------------------------------------------------------------

// Per-layer BiLSTM output grids for one side of the batch.
template <class T>
struct StackedStates {
  std::vector<TensorPtr<T>> layers;  // each (n*len) x 2h
  int n = 0, len = 0;
  std::vector<int> lens;

  int depth() const { return static_cast<int>(layers.size()); }

  // True-length slices of every layer for one pair.
  std::vector<TensorPtr<T>> slices(int i) const {
    std::vector<int> rows(lens[i]);
    for (int t = 0; t < lens[i]; ++t) rows[t] = i * len + t;
    std::vector<TensorPtr<T>> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(gather_rows(l, rows));
    return out;
  }
};

// Stacked BiLSTM encoder with optional CAFE refinement between layers.
// Every layer's output sequence is recorded; CAFE blocks sit after every
// layer except the last, whose output feeds the co-stack affinity directly.
template <class T>
struct MarEncoder {
  std::vector<BiLstm<T>> stack;
  std::vector<CafeParams<T>> cafe;
  bool use_mar = true;
  int depth = 0, hidden = 0;

  void init(Rng& rng, int input_dim, int hidden_, int depth_, bool use_mar_, int fm_factor) {
    if (depth_ < 1) throw ConfigError("stack_depth must be >= 1");
    depth = depth_;
    hidden = hidden_;
    use_mar = use_mar_;
    stack.resize(depth);
    const int refined = use_mar ? 2 * hidden + 6 : 2 * hidden;
    for (int i = 0; i < depth; ++i)
      stack[i].init(rng, i == 0 ? input_dim : refined, hidden);
    if (use_mar) {
      cafe.resize(depth - 1);
      for (auto& c : cafe) c.init(rng, 2 * hidden, fm_factor);
    }
  }

  std::pair<StackedStates<T>, StackedStates<T>> encode(
      const TensorPtr<T>& xa, int la, const std::vector<int>& lens_a, const TensorPtr<T>& xb,
      int lb, const std::vector<int>& lens_b, double drop_rate, bool training,
      Rng& drop_rng) const {
    const int n = static_cast<int>(lens_a.size());
    StackedStates<T> sa{{}, n, la, lens_a};
    StackedStates<T> sb{{}, n, lb, lens_b};
    auto cur_a = xa;
    auto cur_b = xb;
    for (int level = 0; level < depth; ++level) {
      if (level > 0) {
        cur_a = dropout(cur_a, drop_rate, training, drop_rng);
        cur_b = dropout(cur_b, drop_rate, training, drop_rng);
      }
      auto out_a = stack[level].forward_grid(cur_a, n, la, lens_a);
      auto out_b = stack[level].forward_grid(cur_b, n, lb, lens_b);
      sa.layers.push_back(out_a);
      sb.layers.push_back(out_b);
      if (level + 1 < depth) {
        if (use_mar) {
          auto widened = refine(out_a, out_b, sa, sb, cafe[level]);
          cur_a = widened.first;
          cur_b = widened.second;
        } else {
          cur_a = out_a;
          cur_b = out_b;
        }
      }
    }
    return {std::move(sa), std::move(sb)};
  }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    for (int i = 0; i < depth; ++i)
      stack[i].collect(prefix + ".l" + std::to_string(i), out);
    for (size_t i = 0; i < cafe.size(); ++i)
      cafe[i].collect(prefix + ".cafe" + std::to_string(i), out);
  }

  int64_t param_count() const {
    int64_t c = 0;
    for (const auto& l : stack) c += l.param_count();
    for (const auto& b : cafe) c += b.param_count();
    return c;
  }

 private:
  // Runs the CAFE block pair by pair on true-length slices and rebuilds the
  // padded grids (padding rows are zero constants).
  std::pair<TensorPtr<T>, TensorPtr<T>> refine(const TensorPtr<T>& out_a, const TensorPtr<T>& out_b,
                                               const StackedStates<T>& sa, const StackedStates<T>& sb,
                                               const CafeParams<T>& block) const {
    const int n = sa.n, la = sa.len, lb = sb.len;
    const int w = 2 * hidden + 6;
    std::vector<TensorPtr<T>> parts_a, parts_b;
    for (int i = 0; i < n; ++i) {
      std::vector<int> rows_a(sa.lens[i]), rows_b(sb.lens[i]);
      for (int t = 0; t < sa.lens[i]; ++t) rows_a[t] = i * la + t;
      for (int t = 0; t < sb.lens[i]; ++t) rows_b[t] = i * lb + t;
      auto [wa, wb] = cafe_block(gather_rows(out_a, rows_a), gather_rows(out_b, rows_b), block);
      parts_a.push_back(wa);
      if (sa.lens[i] < la) parts_a.push_back(zeros<T>({la - sa.lens[i], w}));
      parts_b.push_back(wb);
      if (sb.lens[i] < lb) parts_b.push_back(zeros<T>({lb - sb.lens[i], w}));
    }
    return {parts_a.size() == 1 ? parts_a[0] : concat(parts_a, 0),
            parts_b.size() == 1 ? parts_b[0] : concat(parts_b, 0)};
  }
};

}  // namespace csran
