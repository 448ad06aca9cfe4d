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
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"

namespace csran {

enum class TaskKind { paraphrase, entailment3, ranking };

TaskKind task_from_string(const std::string& s);
const char* task_name(TaskKind t);
int task_num_classes(TaskKind t);

// One raw example. For ranking tasks `a` is the query, `b` a candidate,
// `label` its relevance and `group` the query group id.
struct RawPair {
  std::string a, b;
  int label = 0;
  int group = -1;
};

struct TokenizedPair {
  std::vector<int> a_words, b_words;
  std::vector<std::vector<int>> a_chars, b_chars;  // aligned with word positions
  int label = 0;
  int group = -1;
};

// Token ids. 0 is PAD, 1 is UNK; remaining ids are assigned by
// (count desc, token asc) so two builds over the same corpus agree.
struct Vocab {
  std::vector<std::string> id2tok;
  std::unordered_map<std::string, int> tok2id;

  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();
  int size() const { return static_cast<int>(id2tok.size()); }
  int id(const std::string& tok) const {
    auto it = tok2id.find(tok);
    return it == tok2id.end() ? kUnk : it->second;
  }
  const std::string& token(int id) const;
  int add(const std::string& tok);  // assigns the next id (loading only)
};

// whitespace split + lowercasing; punctuation stays attached
std::vector<std::string> tokenize(const std::string& text);
std::vector<std::string> utf8_chars(const std::string& token);

// TSV readers. Classification: label \t textA \t textB.
// Ranking: group_id \t relevance \t query \t candidate.
std::vector<RawPair> read_pairs(const std::string& path, TaskKind task);

Vocab build_vocab(const std::vector<RawPair>& pairs, int min_count);
Vocab build_char_vocab(const std::vector<RawPair>& pairs, int min_count);

struct EncodeStats {
  int truncated_seqs = 0;
  int truncated_words = 0;
};

std::vector<TokenizedPair> encode_pairs(const std::vector<RawPair>& pairs, const Vocab& words,
                                        const Vocab& chars, int max_len, int max_word_len,
                                        EncodeStats* stats = nullptr);

// Right-padded batch with prefix-mask semantics (true lengths). Word ids are
// (size * len) row-major; char ids are (size * len * wlen).
struct Batch {
  int size = 0;
  int la = 0, lb = 0;
  std::vector<int> a_ids, b_ids;
  std::vector<int> a_lens, b_lens;
  int a_wlen = 0, b_wlen = 0;
  std::vector<int> a_chars, b_chars;
  std::vector<int> a_char_lens, b_char_lens;  // per word position
  std::vector<int> labels;
  std::vector<int> groups;
};

// Shuffles deterministically under the seed and packs batches. Ranking
// groups are kept whole: a batch is extended past batch_size rather than
// splitting a group. With shuffle off the corpus order is preserved
// (evaluation path).
std::vector<Batch> make_batches(const std::vector<TokenizedPair>& pairs, int batch_size,
                                uint64_t shuffle_seed, bool group_aware, bool shuffle = true);

// Deterministic synthetic corpora. Paraphrase positives are token-permuted
// copies, negatives fresh resamples; entailment3 maps subset / disjoint /
// partial-overlap token sets to the three labels; ranking groups contain one
// candidate sharing the query's hidden key token among distractors.
std::vector<RawPair> gen_synthetic(TaskKind task, int size, uint64_t seed);

struct EmbeddingLoad {
  std::vector<double> matrix;   // vocab_size x dim, row-major
  std::vector<uint8_t> found;   // per vocab row
  double coverage = 0.0;        // fraction of non-reserved vocab found
};

// Text format: token followed by `dim` space-separated decimals per line.
EmbeddingLoad load_embeddings(const std::string& path, const Vocab& vocab, int dim);

}  // namespace csran
