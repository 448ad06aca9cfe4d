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

#include <map>
#include <string>
#include <vector>

#include "error.hpp"

namespace csran {

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

// F1 of the positive class; 0 when precision + recall is 0.
double f1_binary(const std::vector<int>& preds, const std::vector<int>& labels, int positive);

// One ranked group: (score, relevance) in original candidate order. Ranking
// sorts by score descending; ties keep the original order.
struct RankedGroup {
  std::vector<std::pair<double, int>> items;
};

// Groups without any relevant candidate are excluded (and counted).
std::pair<double, double> map_mrr(const std::vector<RankedGroup>& groups, int* skipped = nullptr);

// Fraction of groups whose first relevant candidate ranks within the top k.
std::map<int, double> recall_at_k(const std::vector<RankedGroup>& groups,
                                  const std::vector<int>& ks, int* skipped = nullptr);

struct MetricReport {
  std::string task;
  std::map<std::string, double> values;
  int examples = 0;
  int groups = 0;

  std::string to_text() const;  // flat key=value block
};

}  // namespace csran
