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

#include "metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace csran {

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw DimensionError(detail::cat("accuracy: ", preds.size(), " predictions vs ",
                                     labels.size(), " labels"));
  if (preds.empty()) throw DataError("accuracy: empty input");
  int correct = 0;
  for (size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  return static_cast<double>(correct) / preds.size();
}

double f1_binary(const std::vector<int>& preds, const std::vector<int>& labels, int positive) {
  if (preds.size() != labels.size())
    throw DimensionError("f1_binary: prediction/label length mismatch");
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive, l = labels[i] == positive;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  if (tp == 0) return 0.0;  // covers P+R == 0 as well
  const double prec = static_cast<double>(tp) / (tp + fp);
  const double rec = static_cast<double>(tp) / (tp + fn);
  return 2.0 * prec * rec / (prec + rec);
}

namespace {

// indices of group items ranked by score desc, stable on ties
std::vector<size_t> ranked_order(const RankedGroup& g) {
  std::vector<size_t> idx(g.items.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t x, size_t y) {
    return g.items[x].first > g.items[y].first;
  });
  return idx;
}

bool has_relevant(const RankedGroup& g) {
  for (const auto& [s, r] : g.items) {
    (void)s;
    if (r) return true;
  }
  return false;
}

}  // namespace

std::pair<double, double> map_mrr(const std::vector<RankedGroup>& groups, int* skipped) {
  if (groups.empty()) throw DataError("map_mrr: empty group set");
  double ap_sum = 0.0, rr_sum = 0.0;
  int used = 0, skip = 0;
  for (const auto& g : groups) {
    if (g.items.empty()) throw DataError("map_mrr: group without candidates");
    if (!has_relevant(g)) {
      ++skip;
      continue;
    }
    auto order = ranked_order(g);
    int rel_seen = 0;
    double ap = 0.0, rr = 0.0;
    for (size_t rank = 0; rank < order.size(); ++rank) {
      if (g.items[order[rank]].second) {
        ++rel_seen;
        ap += static_cast<double>(rel_seen) / (rank + 1);
        if (rel_seen == 1) rr = 1.0 / (rank + 1);
      }
    }
    ap_sum += ap / rel_seen;
    rr_sum += rr;
    ++used;
  }
  if (skipped) *skipped = skip;
  if (used == 0) throw DataError("map_mrr: no group has a relevant candidate");
  return {ap_sum / used, rr_sum / used};
}

std::map<int, double> recall_at_k(const std::vector<RankedGroup>& groups,
                                  const std::vector<int>& ks, int* skipped) {
  if (groups.empty()) throw DataError("recall_at_k: empty group set");
  std::map<int, double> hits;
  for (int k : ks) hits[k] = 0.0;
  int used = 0, skip = 0;
  for (const auto& g : groups) {
    if (!has_relevant(g)) {
      ++skip;
      continue;
    }
    auto order = ranked_order(g);
    int first_rel = 0;
    for (size_t rank = 0; rank < order.size(); ++rank)
      if (g.items[order[rank]].second) {
        first_rel = static_cast<int>(rank) + 1;
        break;
      }
    for (int k : ks)
      if (first_rel <= k) hits[k] += 1.0;
    ++used;
  }
  if (skipped) *skipped = skip;
  if (used == 0) throw DataError("recall_at_k: no group has a relevant candidate");
  for (auto& [k, v] : hits) {
    (void)k;
    v /= used;
  }
  return hits;
}

std::string MetricReport::to_text() const {
  std::string out = "task=" + task + "\n";
  out += "examples=" + std::to_string(examples) + "\n";
  if (groups > 0) out += "groups=" + std::to_string(groups) + "\n";
  for (const auto& [k, v] : values) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out += k + "=" + buf + "\n";
  }
  return out;
}

}  // namespace csran
