#pragma once

// Mini-batch training with Adam and validation-concordance checkpoint
// selection.
//
// Batch gradients are computed over fixed-size chunks of the batch; each chunk
// accumulates into its own buffer and the buffers are summed in chunk order.
// The chunking does not depend on the worker count, so 1 and N threads give
// bit-identical parameters.

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "survtrust/cohort/types.hpp"
#include "survtrust/core/error.hpp"
#include "survtrust/core/parallel.hpp"
#include "survtrust/core/random.hpp"
#include "survtrust/metrics/concordance.hpp"
#include "survtrust/ndsm/losses.hpp"
#include "survtrust/ndsm/network.hpp"

namespace survtrust::ndsm {

struct LossOptions {
  double rank_sigma = 0.1;
  double rank_weight = 1.0;  // weight of the ranking term in composite objectives
};

struct TrainOptions {
  AdamOptions adam;
  ArchitectureOptions arch;
  LossOptions loss;
  int batch_size = 128;
  int epochs = 20;
  std::uint64_t seed = 0;
  int threads = 1;
};

inline constexpr std::size_t kGradientChunk = 16;

struct Batch {
  std::vector<std::span<const double>> x;
  std::vector<EventLabel> y;
};

// Mean per-sample loss plus (for composite objectives) the weighted ranking
// term. When `grad` is non-empty it receives d(loss)/d(params) (overwritten).
inline double batch_loss(const ModelState& m, const Batch& batch, const LossOptions& opt, std::span<double> grad = {},
                         int threads = 1) {
  const std::size_t n = batch.x.size();
  if (n == 0) throw InputError("empty batch");
  for (const auto& y : batch.y) {
    if (y.time_bin < 0 || y.time_bin >= m.intervals()) throw InputError("label time bin outside model grid");
  }
  const std::size_t K = m.output_dim();
  std::vector<ForwardCache> caches(n);
  const std::size_t chunks = (n + kGradientChunk - 1) / kGradientChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    for (std::size_t i = c * kGradientChunk; i < std::min(n, (c + 1) * kGradientChunk); ++i) forward(m, batch.x[i], caches[i]);
  });

  const double scale = 1.0 / static_cast<double>(n);
  std::vector<std::vector<double>> dlogits(n, std::vector<double>(K, 0.0));
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = caches[i].logits();
    switch (m.objective) {
      case Objective::nll:
      case Objective::deephit: loss += scale * nll_grad(z, batch.y[i], scale, dlogits[i]); break;
      case Objective::rps:
      case Objective::rps_rank: loss += scale * rps_grad(z, batch.y[i], scale, dlogits[i]); break;
      case Objective::nmtlr: loss += scale * mtlr_grad(z, batch.y[i], scale, dlogits[i]); break;
    }
  }
  if (uses_ranking(m.objective) && opt.rank_weight != 0.0) {
    std::vector<std::vector<double>> pmfs(n), dpmf(n, std::vector<double>(K, 0.0));
    for (std::size_t i = 0; i < n; ++i) pmfs[i] = softmax(caches[i].logits());
    loss += opt.rank_weight * rank_grad(pmfs, batch.y, opt.rank_sigma, opt.rank_weight, dpmf);
    for (std::size_t i = 0; i < n; ++i) softmax_backward(pmfs[i], dpmf[i], dlogits[i]);
  }

  if (!grad.empty()) {
    std::vector<std::vector<double>> partial(chunks, std::vector<double>(m.params.size(), 0.0));
    parallel_for(chunks, threads, [&](std::size_t c) {
      for (std::size_t i = c * kGradientChunk; i < std::min(n, (c + 1) * kGradientChunk); ++i)
        backward(m, caches[i], dlogits[i], partial[c]);
    });
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& p : partial)
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += p[k];
  }
  return loss;
}

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_c_td;
};

struct TrainResult {
  ModelState model;  // selected checkpoint
  int best_epoch = 0;  // 0 = initial weights
  std::vector<EpochStats> history;
};

inline std::optional<double> validation_c_td(const ModelState& m, const cohort::Dataset& val) {
  if (val.size() == 0) return std::nullopt;
  std::vector<Isd> preds;
  preds.reserve(val.size());
  for (const auto& r : val.records) preds.push_back(predict_isd(m, r.features));
  const auto labels = val.labels();
  try {
    return metrics::c_td(preds, labels);
  } catch (const UndefinedMetric&) {
    return std::nullopt;
  }
}

using EpochCallback = std::function<void(const ModelState&, const EpochStats&)>;

// Trains for `epochs` passes over shuffled mini-batches. The returned model is
// the epoch checkpoint with the highest validation C-td (the last epoch when
// validation concordance is undefined throughout).
inline TrainResult train(const cohort::Dataset& train_set, const cohort::Dataset& val_set, Objective objective,
                         int intervals, const TrainOptions& opt, const EpochCallback& on_epoch = {}) {
  if (train_set.size() == 0) throw InputError("empty training split");
  if (opt.batch_size < 1) throw InputError("batch size must be positive");
  if (opt.epochs < 0) throw InputError("epochs must be >= 0");
  TrainResult result;
  ModelState model = init_model(train_set.dim(), intervals, objective, opt.seed, opt.arch, train_set.columns);
  result.model = model;
  std::optional<double> best;

  std::vector<double> grad(model.params.size());
  const std::size_t n = train_set.size();
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    Rng rng(derive_seed(opt.seed, {0x5348554646ULL, static_cast<std::uint64_t>(epoch)}));
    const auto order = rng.permutation(n);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(opt.batch_size));
      Batch batch;
      for (std::size_t k = start; k < end; ++k) {
        const auto& r = train_set.records[order[k]];
        batch.x.emplace_back(r.features);
        batch.y.push_back(r.label());
      }
      const double loss = batch_loss(model, batch, opt.loss, grad, opt.threads);
      if (!std::isfinite(loss))
        throw TrainingError(std::string("non-finite loss (objective ") + to_string(objective) + ", epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(batches) + ")");
      adam_step(model, grad, opt.adam);
      for (double p : model.params)
        if (!std::isfinite(p))
          throw TrainingError("non-finite parameter after update at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches));
      loss_sum += loss;
      ++batches;
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(batches), validation_c_td(model, val_set)};
    result.history.push_back(stats);
    if (on_epoch) on_epoch(model, stats);
    if (stats.val_c_td && (!best || *stats.val_c_td > *best)) {
      best = stats.val_c_td;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  if (!best && opt.epochs > 0) {
    result.model = model;
    result.best_epoch = opt.epochs;
  }
  return result;
}

// Largest relative discrepancy between back-propagated gradients and central
// finite differences of batch_loss over every parameter.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Gradients below `floor` in magnitude are compared on an absolute scale: a
// structurally zero component (e.g. the last N-MTLR output, which shifts every
// suffix sum equally) has a finite difference made of rounding noise only.
inline constexpr double kGradCheckFloor = 1e-5;

inline double relative_error(double a, double b, double floor = kGradCheckFloor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline GradCheckResult grad_check(const ModelState& model, const Batch& batch, const LossOptions& opt = {},
                                  double h = 1e-5, double floor = kGradCheckFloor) {
  std::vector<double> analytic(model.params.size());
  batch_loss(model, batch, opt, analytic);
  ModelState probe = model;
  GradCheckResult r;
  for (std::size_t k = 0; k < probe.params.size(); ++k) {
    const double orig = probe.params[k];
    probe.params[k] = orig + h;
    const double up = batch_loss(probe, batch, opt);
    probe.params[k] = orig - h;
    const double down = batch_loss(probe, batch, opt);
    probe.params[k] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double err = relative_error(analytic[k], numeric, floor);
    if (err > r.max_rel_error) r = {err, k, analytic[k], numeric};
  }
  return r;
}

}  // namespace survtrust::ndsm
