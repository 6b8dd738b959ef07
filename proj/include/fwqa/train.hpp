// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <thread>
#include <unordered_map>
#include <vector>

#include "fwqa/adam.hpp"
#include "fwqa/common.hpp"
#include "fwqa/config.hpp"
#include "fwqa/model.hpp"
#include "fwqa/rng.hpp"

namespace fwqa {

/// One multiple-choice instance, already sampled and embedded.
template <typename Scalar>
struct PreparedInstance {
  Mat<Scalar> features;                // d_v x N, columns are frames
  std::vector<Mat<Scalar>> qa_embeds;  // 8 QA-sentences, each d_w x |c_k|
  int gt_index = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_accuracy = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_accuracy = 0;
};

/// Early stopping on validation accuracy: stop once the metric has not
/// strictly improved for `patience` consecutive epochs; the best epoch's
/// weights are what training returns.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw ArgumentError("EarlyStopper: patience must be >= 1");
  }

  /// Report one epoch's metric; true when this is a new best.
  bool observe(double metric) {
    ++epoch_;
    if (metric > best_) {
      best_ = metric;
      best_epoch_ = epoch_;
      stall_ = 0;
      return true;
    }
    ++stall_;
    return false;
  }

  bool should_stop() const { return stall_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }

 private:
  int patience_;
  int epoch_ = 0;
  int stall_ = 0;
  int best_epoch_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline int resolve_workers(int configured, std::size_t items) {
  int w = configured;
  if (w <= 0) {
    unsigned hc = std::thread::hardware_concurrency();
    w = hc == 0 ? 1 : static_cast<int>(hc);
    w = std::min(w, 8);
  }
  return std::max(1, std::min<int>(w, static_cast<int>(items == 0 ? 1 : items)));
}

/// Run fn(worker, i) for i in [0, n) across workers. fn must only write to
/// index-owned slots so the merge stays deterministic.
template <typename Fn>
void parallel_for(int workers, std::size_t n, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(0, i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      for (std::size_t i = static_cast<std::size_t>(w); i < n;
           i += static_cast<std::size_t>(workers))
        fn(w, i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace detail

/// Predicted candidate indices for a set of instances, evaluated over frozen
/// parameters. Safe to fan out: scoring is pure; results merge by index.
template <typename Scalar>
std::vector<int> predict_all(ModelParams<Scalar>& params, ModelKind kind,
                             const std::vector<PreparedInstance<Scalar>>& set,
                             int workers = 0) {
  const int w = detail::resolve_workers(workers, set.size());
  std::vector<int> out(set.size(), -1);
  std::vector<std::unique_ptr<Tape<Scalar>>> tapes;
  for (int k = 0; k < w; ++k) tapes.push_back(std::make_unique<Tape<Scalar>>());
  detail::parallel_for(w, set.size(), [&](int worker, std::size_t i) {
    Tape<Scalar>& tape = *tapes[static_cast<std::size_t>(worker)];
    tape.reset();
    ModelForward<Scalar> fwd(tape, params, kind);
    out[i] = answer_question(fwd, set[i].features, set[i].qa_embeds).predicted;
  });
  return out;
}

template <typename Scalar>
double accuracy(ModelParams<Scalar>& params, ModelKind kind,
                const std::vector<PreparedInstance<Scalar>>& set, int workers = 0) {
  if (set.empty()) throw ArgumentError("accuracy: empty set");
  std::vector<int> pred = predict_all(params, kind, set, workers);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (pred[i] == set[i].gt_index) ++correct;
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

/// Mini-batch Adam training with global-norm clipping and early stopping on
/// validation accuracy. Batch gradients are the mean over the batch; each
/// instance's gradient is computed on its own tape and merged in instance
/// order, so results do not depend on the worker count. Stops once the
/// validation accuracy has not improved for `patience` consecutive epochs
/// and leaves the best epoch's weights in `params`.
template <typename Scalar>
TrainResult train(ModelParams<Scalar>& params, ModelKind kind,
                  const std::vector<PreparedInstance<Scalar>>& train_set,
                  const std::vector<PreparedInstance<Scalar>>& val_set,
                  const TrainConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  if (train_set.empty()) throw ArgumentError("train: empty training set");
  if (val_set.empty()) throw ArgumentError("train: empty validation set");

  const int workers = detail::resolve_workers(cfg.workers, train_set.size());
  AdamState<Scalar> adam(params.registry, cfg.adam);

  std::vector<std::unique_ptr<Tape<Scalar>>> tapes;
  for (int k = 0; k < workers; ++k) tapes.push_back(std::make_unique<Tape<Scalar>>());

  const std::size_t n_params = params.registry.size();
  const std::size_t max_batch =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), train_set.size());
  // Per-instance gradient slots, merged in instance order after each batch.
  std::vector<std::vector<Mat<Scalar>>> inst_grads(max_batch);
  std::vector<double> inst_loss(max_batch, 0.0);
  for (auto& g : inst_grads) {
    g.resize(n_params);
    for (std::size_t k = 0; k < n_params; ++k) {
      const auto& v = params.registry[k].value;
      g[k] = Mat<Scalar>::Zero(v.rows(), v.cols());
    }
  }
  std::unordered_map<const Parameter<Scalar>*, std::size_t> param_index;
  param_index.reserve(n_params);
  for (std::size_t k = 0; k < n_params; ++k) param_index[&params.registry[k]] = k;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<Mat<Scalar>> best_values = params.registry.snapshot_values();
  EarlyStopper stopper(cfg.patience);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(epoch))));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0;
    std::size_t seen = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += max_batch, ++batch_index) {
      const std::size_t bsz = std::min(max_batch, order.size() - start);
      const Scalar inv = Scalar(1) / static_cast<Scalar>(bsz);

      detail::parallel_for(workers, bsz, [&](int worker, std::size_t b) {
        Tape<Scalar>& tape = *tapes[static_cast<std::size_t>(worker)];
        tape.reset();
        ModelForward<Scalar> fwd(tape, params, kind);
        const PreparedInstance<Scalar>& inst = train_set[order[start + b]];
        AnswerResult<Scalar> ans = answer_question(fwd, inst.features, inst.qa_embeds);
        Var<Scalar> loss = qa_loss(ans.probabilities, inst.gt_index);
        inst_loss[b] = static_cast<double>(tape.value(loss)(0, 0));
        for (auto& g : inst_grads[b]) g.setZero();
        tape.backward(loss, inv, /*flush_params=*/false);
        tape.for_each_param_grad([&](Parameter<Scalar>& p, const Mat<Scalar>& g) {
          inst_grads[b][param_index.at(&p)] += g;
        });
      });

      params.registry.zero_grads();
      double batch_loss = 0;
      for (std::size_t b = 0; b < bsz; ++b) {
        batch_loss += inst_loss[b];
        for (std::size_t k = 0; k < n_params; ++k) params.registry[k].grad += inst_grads[b][k];
      }
      batch_loss /= static_cast<double>(bsz);
      if (!std::isfinite(batch_loss))
        throw InvariantError("non-finite loss in epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch_index));
      epoch_loss += batch_loss * static_cast<double>(bsz);
      seen += bsz;

      clip_gradients(params.registry, cfg.clip_norm);
      adam_step(params.registry, adam);
    }

    const double train_loss = epoch_loss / static_cast<double>(seen);
    const double val_acc = accuracy(params, kind, val_set, cfg.workers);
    result.history.push_back({epoch, train_loss, val_acc});
    if (log)
      (*log) << "epoch " << epoch << " train_loss " << train_loss
             << " val_accuracy " << val_acc << "\n";

    if (stopper.observe(val_acc)) best_values = params.registry.snapshot_values();
    if (stopper.should_stop()) break;
  }

  params.registry.restore_values(best_values);
  result.best_epoch = stopper.best_epoch();
  result.best_val_accuracy = stopper.best_metric();
  return result;
}

}  // namespace fwqa
