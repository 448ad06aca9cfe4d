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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metrics.hpp"
#include "rng.hpp"

using namespace csran;

namespace {

// definition-level brute-force oracles, kept independent of metrics.cpp

double oracle_accuracy(const std::vector<int>& p, const std::vector<int>& l) {
  int ok = 0;
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i] == l[i]) ++ok;
  return double(ok) / p.size();
}

double oracle_f1(const std::vector<int>& p, const std::vector<int>& l, int pos) {
  double tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] == pos && l[i] == pos) ++tp;
    if (p[i] == pos && l[i] != pos) ++fp;
    if (p[i] != pos && l[i] == pos) ++fn;
  }
  if (tp + fp == 0 || tp + fn == 0) return 0.0;
  const double prec = tp / (tp + fp), rec = tp / (tp + fn);
  return prec + rec == 0 ? 0.0 : 2 * prec * rec / (prec + rec);
}

// ranks a group by score desc (stable) and walks the relevance pattern
std::vector<int> oracle_relevance_by_rank(const RankedGroup& g) {
  std::vector<size_t> idx(g.items.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return g.items[a].first > g.items[b].first; });
  std::vector<int> rel;
  for (size_t i : idx) rel.push_back(g.items[i].second);
  return rel;
}

double oracle_ap(const std::vector<int>& rel_by_rank) {
  double ap = 0;
  int seen = 0;
  for (size_t r = 0; r < rel_by_rank.size(); ++r)
    if (rel_by_rank[r]) {
      ++seen;
      ap += double(seen) / (r + 1);
    }
  return seen ? ap / seen : -1;
}

double oracle_rr(const std::vector<int>& rel_by_rank) {
  for (size_t r = 0; r < rel_by_rank.size(); ++r)
    if (rel_by_rank[r]) return 1.0 / (r + 1);
  return -1;
}

RankedGroup group_from(std::initializer_list<std::pair<double, int>> items) {
  RankedGroup g;
  for (auto& it : items) g.items.push_back(it);
  return g;
}

}  // namespace

TEST_CASE("accuracy") {
  CHECK(accuracy({1, 2, 0}, {1, 2, 0}) == 1.0);
  CHECK(accuracy({1, 0, 1}, {1, 1, 1}) == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(accuracy({}, {}), DataError);
  CHECK_THROWS_AS(accuracy({1}, {1, 2}), DimensionError);
}

TEST_CASE("f1") {
  CHECK(f1_binary({1, 0, 1, 1}, {1, 0, 1, 1}, 1) == 1.0);
  // TP=2, FP=1, FN=1: P = R = 2/3
  CHECK(f1_binary({1, 1, 1, 0}, {1, 1, 0, 1}, 1) == doctest::Approx(2.0 / 3));
  // no positive predictions and no positive labels: 0 by convention
  CHECK(f1_binary({0, 0}, {0, 0}, 1) == 0.0);
}

TEST_CASE("classification metrics match brute force on random instances") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng.uniform_int(30);
    std::vector<int> p(n), l(n);
    for (int i = 0; i < n; ++i) {
      p[i] = rng.uniform_int(2);
      l[i] = rng.uniform_int(2);
    }
    CHECK(accuracy(p, l) == oracle_accuracy(p, l));
    CHECK(f1_binary(p, l, 1) == doctest::Approx(oracle_f1(p, l, 1)).epsilon(1e-12));
  }
}

TEST_CASE("accuracy and f1 are permutation invariant") {
  Rng rng(2);
  std::vector<int> p(40), l(40), order(40);
  for (int i = 0; i < 40; ++i) {
    p[i] = rng.uniform_int(2);
    l[i] = rng.uniform_int(2);
    order[i] = i;
  }
  rng.shuffle(order);
  std::vector<int> p2, l2;
  for (int i : order) {
    p2.push_back(p[i]);
    l2.push_back(l[i]);
  }
  CHECK(accuracy(p, l) == accuracy(p2, l2));
  CHECK(f1_binary(p, l, 1) == f1_binary(p2, l2, 1));
}

TEST_CASE("map and mrr worked examples") {
  // relevance by rank [1, 0, 1]: AP = (1/1 + 2/3)/2 = 5/6, MRR = 1
  auto g = group_from({{3.0, 1}, {2.0, 0}, {1.0, 1}});
  auto [map1, mrr1] = map_mrr({g});
  CHECK(map1 == doctest::Approx(5.0 / 6).epsilon(1e-12));
  CHECK(mrr1 == 1.0);

  // all candidates relevant
  auto all_rel = group_from({{3.0, 1}, {2.0, 1}});
  auto [map2, mrr2] = map_mrr({all_rel});
  CHECK(map2 == 1.0);
  CHECK(mrr2 == 1.0);

  // two groups: MAP is the unweighted mean of per-group APs
  auto [map3, mrr3] = map_mrr({g, all_rel});
  CHECK(map3 == doctest::Approx((5.0 / 6 + 1.0) / 2).epsilon(1e-12));
  CHECK(mrr3 == 1.0);

  CHECK_THROWS_AS(map_mrr({}), DataError);
}

TEST_CASE("groups without a relevant candidate are excluded and counted") {
  auto g = group_from({{3.0, 1}, {2.0, 0}});
  auto none = group_from({{5.0, 0}, {1.0, 0}});
  int skipped = 0;
  auto [mapv, mrrv] = map_mrr({g, none}, &skipped);
  CHECK(skipped == 1);
  CHECK(mapv == 1.0);
  CHECK(mrrv == 1.0);
}

TEST_CASE("ties keep the original candidate order") {
  // equal scores: the first listed candidate ranks first
  auto g1 = group_from({{1.0, 1}, {1.0, 0}});
  auto g2 = group_from({{1.0, 0}, {1.0, 1}});
  CHECK(map_mrr({g1}).second == 1.0);
  CHECK(map_mrr({g2}).second == 0.5);
}

TEST_CASE("recall at k worked examples") {
  // positive ranked second among ten candidates
  RankedGroup g;
  g.items.emplace_back(10.0, 0);
  g.items.emplace_back(9.0, 1);
  for (int i = 0; i < 8; ++i) g.items.emplace_back(1.0 - i, 0);
  auto r = recall_at_k({g}, {1, 2, 5});
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 1.0);
  CHECK(r[5] == 1.0);

  auto top = group_from({{9.0, 1}, {1.0, 0}});
  auto r2 = recall_at_k({top}, {1, 2, 5});
  CHECK(r2[1] == 1.0);
  CHECK(r2[5] == 1.0);  // k beyond the group size is trivially recalled
}

TEST_CASE("ranking metrics match brute force on random instances") {
  Rng rng(3);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int ngroups = 1 + rng.uniform_int(5);
    std::vector<RankedGroup> groups;
    for (int gi = 0; gi < ngroups; ++gi) {
      RankedGroup g;
      const int n = 1 + rng.uniform_int(8);
      for (int i = 0; i < n; ++i)
        g.items.emplace_back(rng.uniform(), rng.uniform_int(2));
      groups.push_back(std::move(g));
    }
    double ap_sum = 0, rr_sum = 0;
    int used = 0;
    for (const auto& g : groups) {
      auto rel = oracle_relevance_by_rank(g);
      const double ap = oracle_ap(rel);
      if (ap < 0) continue;
      ap_sum += ap;
      rr_sum += oracle_rr(rel);
      ++used;
    }
    if (used == 0) continue;
    ++checked;
    auto [mapv, mrrv] = map_mrr(groups);
    CHECK(mapv == doctest::Approx(ap_sum / used).epsilon(1e-12));
    CHECK(mrrv == doctest::Approx(rr_sum / used).epsilon(1e-12));
  }
  CHECK(checked > 100);
}

TEST_CASE("ranking metrics are invariant under monotone score transforms") {
  Rng rng(4);
  std::vector<RankedGroup> groups, squashed;
  for (int gi = 0; gi < 6; ++gi) {
    RankedGroup g, s;
    for (int i = 0; i < 6; ++i) {
      const double score = rng.uniform();
      const int rel = rng.uniform_int(2);
      g.items.emplace_back(score, rel);
      s.items.emplace_back(std::tanh(3 * score) + 7, rel);  // strictly monotone
    }
    groups.push_back(g);
    squashed.push_back(s);
  }
  CHECK(map_mrr(groups) == map_mrr(squashed));
  auto ra = recall_at_k(groups, {1, 2, 5});
  auto rb = recall_at_k(squashed, {1, 2, 5});
  CHECK(ra == rb);
}

TEST_CASE("metric report formatting") {
  MetricReport rep;
  rep.task = "ranking";
  rep.examples = 12;
  rep.groups = 3;
  rep.values["map"] = 0.5;
  rep.values["mrr"] = 0.75;
  const auto text = rep.to_text();
  CHECK(text.find("task=ranking\n") != std::string::npos);
  CHECK(text.find("map=0.500000\n") != std::string::npos);
  CHECK(text.find("mrr=0.750000\n") != std::string::npos);
}
