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

#include "data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "rng.hpp"

namespace csran {

TaskKind task_from_string(const std::string& s) {
  if (s == "paraphrase") return TaskKind::paraphrase;
  if (s == "entailment3") return TaskKind::entailment3;
  if (s == "ranking") return TaskKind::ranking;
  throw ConfigError(detail::cat("task: unknown kind '", s,
                                "' (expected paraphrase, entailment3 or ranking)"));
}

const char* task_name(TaskKind t) {
  switch (t) {
    case TaskKind::paraphrase: return "paraphrase";
    case TaskKind::entailment3: return "entailment3";
    case TaskKind::ranking: return "ranking";
  }
  return "?";
}

int task_num_classes(TaskKind t) { return t == TaskKind::entailment3 ? 3 : 2; }

Vocab::Vocab() {
  id2tok = {"<pad>", "<unk>"};
  tok2id = {{"<pad>", 0}, {"<unk>", 1}};
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size())
    throw VocabError(detail::cat("token id ", id, " outside vocabulary of size ", size()));
  return id2tok[id];
}

int Vocab::add(const std::string& tok) {
  auto it = tok2id.find(tok);
  if (it != tok2id.end()) return it->second;
  const int id = size();
  id2tok.push_back(tok);
  tok2id.emplace(tok, id);
  return id;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::string> utf8_chars(const std::string& token) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < token.size()) {
    const unsigned char b = token[i];
    size_t n = 1;
    if ((b & 0xE0) == 0xC0) n = 2;
    else if ((b & 0xF0) == 0xE0) n = 3;
    else if ((b & 0xF8) == 0xF0) n = 4;
    n = std::min(n, token.size() - i);
    out.push_back(token.substr(i, n));
    i += n;
  }
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

int parse_int(const std::string& s, const std::string& what, int line_no) {
  try {
    size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(detail::cat("line ", line_no, ": cannot parse ", what, " from '", s, "'"));
  }
}

}  // namespace

std::vector<RawPair> read_pairs(const std::string& path, TaskKind task) {
  std::ifstream in(path);
  if (!in) throw DataError(detail::cat("cannot open pair file '", path, "'"));
  std::vector<RawPair> out;
  std::string line;
  int line_no = 0;
  const bool ranking = task == TaskKind::ranking;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    const size_t want = ranking ? 4 : 3;
    if (fields.size() != want)
      throw FormatError(detail::cat("line ", line_no, ": expected ", want, " tab-separated fields, got ",
                                    fields.size()));
    RawPair p;
    if (ranking) {
      p.group = parse_int(fields[0], "group id", line_no);
      p.label = parse_int(fields[1], "relevance", line_no);
      if (p.label != 0 && p.label != 1)
        throw FormatError(detail::cat("line ", line_no, ": relevance must be 0 or 1"));
      p.a = fields[2];
      p.b = fields[3];
    } else {
      p.label = parse_int(fields[0], "label", line_no);
      p.a = fields[1];
      p.b = fields[2];
    }
    if (tokenize(p.a).empty() || tokenize(p.b).empty())
      throw FormatError(detail::cat("line ", line_no, ": empty text field"));
    out.push_back(std::move(p));
  }
  if (out.empty()) throw DataError(detail::cat("pair file '", path, "' contains no examples"));
  return out;
}

namespace {

Vocab vocab_from_counts(std::map<std::string, int64_t>& counts, int min_count) {
  std::vector<std::pair<std::string, int64_t>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  Vocab v;
  for (const auto& [tok, cnt] : items)
    if (cnt >= min_count) v.add(tok);
  return v;
}

}  // namespace

Vocab build_vocab(const std::vector<RawPair>& pairs, int min_count) {
  if (pairs.empty()) throw DataError("build_vocab: empty corpus");
  std::map<std::string, int64_t> counts;
  for (const auto& p : pairs) {
    for (const auto& t : tokenize(p.a)) ++counts[t];
    for (const auto& t : tokenize(p.b)) ++counts[t];
  }
  return vocab_from_counts(counts, min_count);
}

Vocab build_char_vocab(const std::vector<RawPair>& pairs, int min_count) {
  if (pairs.empty()) throw DataError("build_char_vocab: empty corpus");
  std::map<std::string, int64_t> counts;
  for (const auto& p : pairs) {
    for (const auto& t : tokenize(p.a))
      for (const auto& c : utf8_chars(t)) ++counts[c];
    for (const auto& t : tokenize(p.b))
      for (const auto& c : utf8_chars(t)) ++counts[c];
  }
  return vocab_from_counts(counts, min_count);
}

namespace {

void encode_side(const std::string& text, const Vocab& words, const Vocab& chars, int max_len,
                 int max_word_len, std::vector<int>& word_ids,
                 std::vector<std::vector<int>>& char_ids, EncodeStats* stats) {
  auto toks = tokenize(text);
  if (toks.empty()) throw DataError("encode_pairs: empty sequence");
  if (static_cast<int>(toks.size()) > max_len) {
    toks.resize(max_len);
    if (stats) ++stats->truncated_seqs;
  }
  for (const auto& t : toks) {
    word_ids.push_back(words.id(t));
    auto cs = utf8_chars(t);
    if (static_cast<int>(cs.size()) > max_word_len) {
      cs.resize(max_word_len);
      if (stats) ++stats->truncated_words;
    }
    std::vector<int> ids;
    ids.reserve(cs.size());
    for (const auto& c : cs) ids.push_back(chars.id(c));
    char_ids.push_back(std::move(ids));
  }
}

}  // namespace

std::vector<TokenizedPair> encode_pairs(const std::vector<RawPair>& pairs, const Vocab& words,
                                        const Vocab& chars, int max_len, int max_word_len,
                                        EncodeStats* stats) {
  std::vector<TokenizedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    TokenizedPair tp;
    tp.label = p.label;
    tp.group = p.group;
    encode_side(p.a, words, chars, max_len, max_word_len, tp.a_words, tp.a_chars, stats);
    encode_side(p.b, words, chars, max_len, max_word_len, tp.b_words, tp.b_chars, stats);
    out.push_back(std::move(tp));
  }
  return out;
}

namespace {

void fill_batch_side(const std::vector<const TokenizedPair*>& items, bool side_a, int& len_out,
                     int& wlen_out, std::vector<int>& ids, std::vector<int>& lens,
                     std::vector<int>& char_ids, std::vector<int>& char_lens) {
  int len = 1, wlen = 1;
  for (const auto* p : items) {
    const auto& w = side_a ? p->a_words : p->b_words;
    const auto& c = side_a ? p->a_chars : p->b_chars;
    len = std::max(len, static_cast<int>(w.size()));
    for (const auto& cs : c) wlen = std::max(wlen, static_cast<int>(cs.size()));
  }
  len_out = len;
  wlen_out = wlen;
  const int n = static_cast<int>(items.size());
  ids.assign(static_cast<size_t>(n) * len, Vocab::kPad);
  lens.resize(n);
  char_ids.assign(static_cast<size_t>(n) * len * wlen, Vocab::kPad);
  char_lens.assign(static_cast<size_t>(n) * len, 0);
  for (int i = 0; i < n; ++i) {
    const auto& w = side_a ? items[i]->a_words : items[i]->b_words;
    const auto& c = side_a ? items[i]->a_chars : items[i]->b_chars;
    lens[i] = static_cast<int>(w.size());
    for (size_t t = 0; t < w.size(); ++t) {
      ids[static_cast<size_t>(i) * len + t] = w[t];
      char_lens[static_cast<size_t>(i) * len + t] = static_cast<int>(c[t].size());
      for (size_t j = 0; j < c[t].size(); ++j)
        char_ids[(static_cast<size_t>(i) * len + t) * wlen + j] = c[t][j];
    }
  }
}

Batch build_batch(const std::vector<const TokenizedPair*>& items) {
  Batch b;
  b.size = static_cast<int>(items.size());
  fill_batch_side(items, true, b.la, b.a_wlen, b.a_ids, b.a_lens, b.a_chars, b.a_char_lens);
  fill_batch_side(items, false, b.lb, b.b_wlen, b.b_ids, b.b_lens, b.b_chars, b.b_char_lens);
  for (const auto* p : items) {
    b.labels.push_back(p->label);
    b.groups.push_back(p->group);
  }
  return b;
}

}  // namespace

std::vector<Batch> make_batches(const std::vector<TokenizedPair>& pairs, int batch_size,
                                uint64_t shuffle_seed, bool group_aware, bool shuffle) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (pairs.empty()) return {};
  Rng rng(shuffle_seed);
  std::vector<Batch> out;
  if (!group_aware) {
    std::vector<const TokenizedPair*> order;
    order.reserve(pairs.size());
    for (const auto& p : pairs) order.push_back(&p);
    if (shuffle) rng.shuffle(order);
    for (size_t i = 0; i < order.size(); i += batch_size) {
      std::vector<const TokenizedPair*> items(
          order.begin() + i, order.begin() + std::min(order.size(), i + batch_size));
      out.push_back(build_batch(items));
    }
    return out;
  }
  // group-aware: shuffle whole groups, never split one across batches
  std::vector<int> group_order;
  std::map<int, std::vector<const TokenizedPair*>> by_group;
  for (const auto& p : pairs) {
    if (!by_group.count(p.group)) group_order.push_back(p.group);
    by_group[p.group].push_back(&p);
  }
  if (shuffle) rng.shuffle(group_order);
  std::vector<const TokenizedPair*> pending;
  for (int g : group_order) {
    const auto& members = by_group[g];
    if (!pending.empty() &&
        pending.size() + members.size() > static_cast<size_t>(batch_size)) {
      out.push_back(build_batch(pending));
      pending.clear();
    }
    pending.insert(pending.end(), members.begin(), members.end());
  }
  if (!pending.empty()) out.push_back(build_batch(pending));
  return out;
}

// ---------------------------------------------------------------------------
// synthetic corpora

namespace {

std::string join(const std::vector<std::string>& toks) {
  std::string s;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) s += ' ';
    s += toks[i];
  }
  return s;
}

std::string tok(int i) { return "tok" + std::to_string(i); }

std::vector<std::string> sample_tokens(Rng& rng, int len, int vocab) {
  std::vector<std::string> out(len);
  for (auto& t : out) t = tok(rng.uniform_int(vocab));
  return out;
}

}  // namespace

std::vector<RawPair> gen_synthetic(TaskKind task, int size, uint64_t seed) {
  Rng rng(seed);
  std::vector<RawPair> out;
  out.reserve(size);
  constexpr int kVocab = 30;
  switch (task) {
    case TaskKind::paraphrase: {
      for (int i = 0; i < size; ++i) {
        const int len = 5 + rng.uniform_int(5);
        auto a = sample_tokens(rng, len, kVocab);
        RawPair p;
        p.label = rng.uniform() < 0.5 ? 1 : 0;
        p.a = join(a);
        if (p.label == 1) {
          auto b = a;
          rng.shuffle(b);
          p.b = join(b);
        } else {
          p.b = join(sample_tokens(rng, 5 + rng.uniform_int(5), kVocab));
        }
        out.push_back(std::move(p));
      }
      break;
    }
    case TaskKind::entailment3: {
      for (int i = 0; i < size; ++i) {
        const int len = 6 + rng.uniform_int(4);
        auto a = sample_tokens(rng, len, kVocab);
        RawPair p;
        p.a = join(a);
        p.label = rng.uniform_int(3);
        if (p.label == 0) {
          // entail: b's tokens are a subset of a's
          const int blen = 3 + rng.uniform_int(len - 3);
          std::vector<std::string> b(blen);
          for (auto& t : b) t = a[rng.uniform_int(len)];
          p.b = join(b);
        } else if (p.label == 1) {
          // contradict: token sets disjoint
          std::vector<std::string> b;
          while (static_cast<int>(b.size()) < len) {
            auto t = tok(rng.uniform_int(kVocab));
            if (std::find(a.begin(), a.end(), t) == a.end()) b.push_back(t);
          }
          p.b = join(b);
        } else {
          // neutral: partial overlap, at least one in and one out
          std::vector<std::string> b;
          b.push_back(a[rng.uniform_int(len)]);
          while (true) {
            auto t = tok(rng.uniform_int(kVocab));
            if (std::find(a.begin(), a.end(), t) == a.end()) {
              b.push_back(t);
              break;
            }
          }
          for (int j = 0; j < len - 2; ++j) {
            if (rng.uniform() < 0.5)
              b.push_back(a[rng.uniform_int(len)]);
            else
              b.push_back(tok(rng.uniform_int(kVocab)));
          }
          rng.shuffle(b);
          p.b = join(b);
        }
        out.push_back(std::move(p));
      }
      break;
    }
    case TaskKind::ranking: {
      constexpr int kKeys = 12;
      constexpr int kGroupSize = 4;
      int group = 0;
      while (static_cast<int>(out.size()) < size) {
        const int key = rng.uniform_int(kKeys);
        auto query = sample_tokens(rng, 3 + rng.uniform_int(4), kVocab);
        query.insert(query.begin() + rng.uniform_int(static_cast<int>(query.size()) + 1),
                     "key" + std::to_string(key));
        const int pos_slot = rng.uniform_int(kGroupSize);
        for (int c = 0; c < kGroupSize && static_cast<int>(out.size()) < size; ++c) {
          RawPair p;
          p.group = group;
          p.a = join(query);
          auto cand = sample_tokens(rng, 3 + rng.uniform_int(4), kVocab);
          if (c == pos_slot) {
            cand.insert(cand.begin() + rng.uniform_int(static_cast<int>(cand.size()) + 1),
                        "key" + std::to_string(key));
            p.label = 1;
          } else {
            int other = rng.uniform_int(kKeys - 1);
            if (other >= key) ++other;
            cand.insert(cand.begin() + rng.uniform_int(static_cast<int>(cand.size()) + 1),
                        "key" + std::to_string(other));
            p.label = 0;
          }
          p.b = join(cand);
          out.push_back(std::move(p));
        }
        ++group;
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

EmbeddingLoad load_embeddings(const std::string& path, const Vocab& vocab, int dim) {
  std::ifstream in(path);
  if (!in) throw DataError(detail::cat("cannot open embedding file '", path, "'"));
  EmbeddingLoad load;
  load.matrix.assign(static_cast<size_t>(vocab.size()) * dim, 0.0);
  load.found.assign(vocab.size(), 0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    const int id = vocab.id(token);
    const bool keep = id != Vocab::kUnk || token == vocab.token(Vocab::kUnk);
    std::vector<double> vec(dim);
    for (int i = 0; i < dim; ++i)
      if (!(ss >> vec[i]))
        throw FormatError(detail::cat("line ", line_no, ": expected ", dim,
                                      " values for token '", token, "'"));
    double extra;
    if (ss >> extra)
      throw FormatError(detail::cat("line ", line_no, ": more than ", dim,
                                    " values for token '", token, "'"));
    if (keep && id != Vocab::kPad && !load.found[id]) {
      load.found[id] = 1;
      std::copy(vec.begin(), vec.end(), load.matrix.begin() + static_cast<size_t>(id) * dim);
    }
  }
  int hit = 0;
  for (int i = 2; i < vocab.size(); ++i) hit += load.found[i];
  load.coverage = vocab.size() > 2 ? static_cast<double>(hit) / (vocab.size() - 2) : 0.0;
  return load;
}

}  // namespace csran
