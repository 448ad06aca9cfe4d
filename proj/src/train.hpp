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

// Adam optimization, the epoch loop with early stopping and best-checkpoint
// tracking, and task-level evaluation.

#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "model.hpp"

namespace csran {

template <class T>
struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t steps = 0;
  std::vector<std::vector<T>> m, v;

  void init(const NamedParams<T>& params) {
    m.clear();
    v.clear();
    for (const auto& [name, p] : params) {
      (void)name;
      m.emplace_back(p->data.size(), T(0));
      v.emplace_back(p->data.size(), T(0));
    }
  }

  void step(const NamedParams<T>& params) {
    if (params.size() != m.size())
      throw ContractError("adam: parameter list does not match optimizer state");
    ++steps;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i].second;
      if (p.data.size() != m[i].size())
        throw ContractError(detail::cat("adam: parameter ", params[i].first, " changed shape"));
      for (size_t j = 0; j < p.data.size(); ++j) {
        const T g = p.grad.empty() ? T(0) : p.grad[j];
        m[i][j] = static_cast<T>(beta1 * m[i][j] + (1.0 - beta1) * g);
        v[i][j] = static_cast<T>(beta2 * v[i][j] + (1.0 - beta2) * g * g);
        const double mh = m[i][j] / bc1;
        const double vh = v[i][j] / bc2;
        p.data[j] -= static_cast<T>(lr * mh / (std::sqrt(vh) + eps));
      }
    }
  }
};

template <class T>
double grad_global_norm(const NamedParams<T>& params) {
  double s = 0.0;
  for (const auto& [name, p] : params) {
    (void)name;
    for (const T g : p->grad) s += static_cast<double>(g) * g;
  }
  return std::sqrt(s);
}

template <class T>
void clip_global_norm(const NamedParams<T>& params, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = grad_global_norm(params);
  if (norm <= max_norm) return;
  const T scale = static_cast<T>(max_norm / norm);
  for (const auto& [name, p] : params) {
    (void)name;
    for (T& g : p->grad) g *= scale;
  }
}

// ---------------------------------------------------------------------------

// Runs the model over evaluation batches and computes the task's metric
// family. Classification tasks report accuracy (plus F1 for binary tasks);
// ranking reports MAP, MRR, Recall@{1,2,5} and pairwise accuracy.
template <class T>
MetricReport evaluate_model(const CsranModel<T>& model, const std::vector<Batch>& batches,
                            TaskKind task) {
  Rng noop(0);
  std::vector<int> preds, labels;
  std::map<int, RankedGroup> grouped;
  std::vector<int> group_order;
  for (const auto& b : batches) {
    auto logits = model.forward(b, /*training=*/false, noop);
    auto p = predict_classes(logits);
    preds.insert(preds.end(), p.begin(), p.end());
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
    if (task == TaskKind::ranking) {
      auto scores = ranking_scores(logits);
      for (int i = 0; i < b.size; ++i) {
        if (!grouped.count(b.groups[i])) group_order.push_back(b.groups[i]);
        grouped[b.groups[i]].items.emplace_back(scores[i], b.labels[i]);
      }
    }
    detach_graph(logits);
  }
  MetricReport rep;
  rep.task = task_name(task);
  rep.examples = static_cast<int>(labels.size());
  rep.values["accuracy"] = accuracy(preds, labels);
  if (task == TaskKind::paraphrase) rep.values["f1"] = f1_binary(preds, labels, 1);
  if (task == TaskKind::ranking) {
    std::vector<RankedGroup> groups;
    groups.reserve(group_order.size());
    for (int g : group_order) groups.push_back(std::move(grouped[g]));
    int skipped = 0;
    auto [map_v, mrr_v] = map_mrr(groups, &skipped);
    rep.values["map"] = map_v;
    rep.values["mrr"] = mrr_v;
    auto rk = recall_at_k(groups, {1, 2, 5});
    for (const auto& [k, v] : rk) rep.values["r@" + std::to_string(k)] = v;
    rep.groups = static_cast<int>(groups.size());
    rep.values["groups_skipped"] = skipped;
  }
  return rep;
}

inline std::string default_dev_metric(TaskKind task) {
  return task == TaskKind::ranking ? "map" : "accuracy";
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  int batch_size = 32;
  int epochs = 20;
  int patience = 5;
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double clip_norm = 5.0;
  uint64_t shuffle_seed = 2;
  std::string dev_metric = "auto";  // auto | accuracy | f1 | map | mrr
  bool timing = true;               // wall-clock column in the history
};

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
  double seconds = 0.0;
};

struct TrainSummary {
  std::vector<EpochRow> history;
  int best_epoch = -1;
  double best_dev = 0.0;
  std::string dev_metric_name;
};

template <class T>
TrainSummary train_model(CsranModel<T>& model, const std::vector<TokenizedPair>& train,
                         const std::vector<TokenizedPair>& dev, TaskKind task,
                         const TrainOptions& opt) {
  if (train.empty()) throw DataError("train_model: empty training set");
  TrainSummary summary;
  summary.dev_metric_name = opt.dev_metric == "auto" ? default_dev_metric(task) : opt.dev_metric;

  auto params = model.parameters(true);
  Adam<T> adam;
  adam.lr = opt.lr;
  adam.beta1 = opt.beta1;
  adam.beta2 = opt.beta2;
  adam.eps = opt.adam_eps;
  adam.init(params);

  Rng shuffle_rng(opt.shuffle_seed);
  Rng drop_rng = shuffle_rng.fork(0xD0);
  const bool group_aware = task == TaskKind::ranking;
  auto dev_batches = make_batches(dev, opt.batch_size, 0, group_aware, /*shuffle=*/false);

  std::vector<std::vector<T>> best_params;
  double last_grad_norm = 0.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto batches = make_batches(train, opt.batch_size, shuffle_rng.bits(), group_aware, true);
    double loss_sum = 0.0;
    int64_t seen = 0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& b = batches[bi];
      model.zero_grads();
      auto logits = model.forward(b, /*training=*/true, drop_rng);
      auto loss = model_loss(logits, b.labels);
      const double lv = static_cast<double>(loss->data[0]);
      if (!std::isfinite(lv)) {
        detach_graph(loss);
        throw NumericError(detail::cat("non-finite loss at epoch ", epoch, " batch ", bi,
                                       " (last gradient norm ", last_grad_norm, ")"));
      }
      backward(loss);
      model.scrub_grads();
      last_grad_norm = grad_global_norm(params);
      if (!std::isfinite(last_grad_norm)) {
        detach_graph(loss);
        throw NumericError(detail::cat("non-finite gradient at epoch ", epoch, " batch ", bi));
      }
      clip_global_norm(params, opt.clip_norm);
      adam.step(params);
      detach_graph(loss);
      loss_sum += lv * b.size;
      seen += b.size;
    }
    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(seen);
    if (!dev_batches.empty()) {
      auto rep = evaluate_model(model, dev_batches, task);
      auto it = rep.values.find(summary.dev_metric_name);
      if (it == rep.values.end())
        throw ConfigError(detail::cat("dev_metric '", summary.dev_metric_name,
                                      "' not produced by task ", task_name(task)));
      row.dev_metric = it->second;
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.seconds = opt.timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
    summary.history.push_back(row);

    // without dev data the latest epoch is kept and early stopping is off
    const bool improved =
        summary.best_epoch < 0 || dev_batches.empty() || row.dev_metric > summary.best_dev;
    if (improved) {
      summary.best_epoch = epoch;
      summary.best_dev = row.dev_metric;
      best_params.clear();
      for (const auto& [name, p] : model.parameters(false)) {
        (void)name;
        best_params.push_back(p->data);
      }
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }
  if (!best_params.empty()) {
    auto all = model.parameters(false);
    for (size_t i = 0; i < all.size(); ++i) all[i].second->data = best_params[i];
  }
  return summary;
}

inline std::string history_to_text(const std::vector<EpochRow>& history) {
  std::string out;
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.3f\n", r.epoch, r.train_loss,
                  r.dev_metric, r.seconds);
    out += buf;
  }
  return out;
}

}  // namespace csran
