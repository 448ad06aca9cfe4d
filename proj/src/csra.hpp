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

// Co-stack residual affinity: the word-pair affinity is the maximum dot
// product over all k x k layer pairs of the two stacked feature hierarchies.
// The gradient of each cell flows only to the winning layer pair. Alignment
// then runs bidirectionally over the per-position concatenation of all
// stacked outputs.

#pragma once

#include <utility>
#include <vector>

#include "tensor.hpp"

namespace csran {

template <class T>
struct Affinity {
  TensorPtr<T> s;               // len_a x len_b scores
  std::vector<int> argmax_pq;   // winning layer pair per cell, index p * kb + q
  int ka = 0, kb = 0;
};

// a_layers / b_layers are the per-layer true-length slices of one pair
// (each len x 2h). With a single layer this reduces exactly to the plain
// dot-product affinity.
template <class T>
Affinity<T> costack_affinity(const std::vector<TensorPtr<T>>& a_layers,
                             const std::vector<TensorPtr<T>>& b_layers) {
  if (a_layers.empty() || b_layers.empty())
    throw DimensionError("costack_affinity: empty stack");
  for (const auto& a : a_layers)
    for (const auto& b : b_layers)
      if (a->cols() != b->cols())
        throw DimensionError(detail::cat("costack_affinity: widths ", a->cols(), " and ",
                                         b->cols(), " disagree"));
  Affinity<T> aff;
  aff.ka = static_cast<int>(a_layers.size());
  aff.kb = static_cast<int>(b_layers.size());
  std::vector<TensorPtr<T>> cand;
  cand.reserve(static_cast<size_t>(aff.ka) * aff.kb);
  for (const auto& a : a_layers)
    for (const auto& b : b_layers) cand.push_back(matmul(a, transpose(b)));
  aff.s = max_over(cand, &aff.argmax_pq);
  return aff;
}

// Per-position concatenation of all stacked outputs: len x (k * 2h).
template <class T>
TensorPtr<T> concat_stack(const std::vector<TensorPtr<T>>& layers) {
  if (layers.empty()) throw DimensionError("concat_stack: empty stack");
  return layers.size() == 1 ? layers[0] : concat(layers, 1);
}

// Softmax-normalized attentive summaries driven by the affinity matrix.
// Returns {b_bar (len_a x w): B summarized for each position of A,
//          a_bar (len_b x w): A summarized for each position of B}.
template <class T>
std::pair<TensorPtr<T>, TensorPtr<T>> bidir_align(const TensorPtr<T>& a_cat,
                                                  const TensorPtr<T>& b_cat,
                                                  const TensorPtr<T>& s,
                                                  const std::vector<uint8_t>& mask_a = {},
                                                  const std::vector<uint8_t>& mask_b = {}) {
  if (s->rows() != a_cat->rows() || s->cols() != b_cat->rows())
    throw DimensionError(detail::cat("bidir_align: affinity ", shape_str(s->shape),
                                     " does not match sequences ", a_cat->rows(), " and ",
                                     b_cat->rows()));
  auto b_bar = matmul(softmax(s, 1, mask_b), b_cat);
  auto a_bar = matmul(transpose(softmax(s, 0, mask_a)), a_cat);
  return {b_bar, a_bar};
}

// Matching vector per position: [aligned - x, aligned * x, aligned, x].
template <class T>
TensorPtr<T> build_match(const TensorPtr<T>& x, const TensorPtr<T>& aligned) {
  if (x->shape != aligned->shape)
    throw DimensionError(detail::cat("build_match: shapes ", shape_str(x->shape), " and ",
                                     shape_str(aligned->shape), " disagree"));
  return concat<T>({sub(aligned, x), mul(aligned, x), aligned, x}, 1);
}

// Temporal sum over the true-length rows; 1 x w.
template <class T>
TensorPtr<T> pool_sum(const TensorPtr<T>& x) {
  return reshape(sum(x, 0), {1, x->cols()});
}

}  // namespace csran
