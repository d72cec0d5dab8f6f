#include "ptmvqa/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "ptmvqa/clustering.hpp"
#include "ptmvqa/errors.hpp"
#include "ptmvqa/evaluator.hpp"
#include "ptmvqa/optim.hpp"
#include "ptmvqa/rng.hpp"
#include "ptmvqa/sampler.hpp"

namespace ptmvqa {

void TrainConfig::validate() const {
  if (batch_size < 4) throw UsageError("batch_size must be at least 4");
  if (!(base_lr > 0.0)) throw UsageError("base_lr must be positive");
  if (!(weight_decay >= 0.0)) throw UsageError("weight_decay must be >= 0");
  if (!(alpha >= 0.0)) throw UsageError("alpha must be >= 0");
  if (!(beta >= 0.0)) throw UsageError("beta must be >= 0");
  if (d_out == 0 || d_hidden == 0) throw UsageError("D and D_hidden must be positive");
  if (epochs > 0 && warmup_epochs >= epochs) throw UsageError("warmup_epochs must be smaller than epochs");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0, 1)");
  cluster_spec();
}

ClusterSpec TrainConfig::cluster_spec() const { return ClusterSpec::preset(k); }

LossConfig TrainConfig::loss_config() const { return {alpha, beta, use_intra, use_inter, inter}; }

std::string EpochRecord::log_line() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu %.9e %.9e %.9e %.9e %.9e %.6f %.6f", epoch, lr, loss.l1, loss.intra, loss.inter,
                loss.total, test_plcc, test_srcc);
  return buf;
}

std::string training_log_header() { return "epoch lr l1 intra inter total test_plcc test_srcc"; }

std::vector<double> resolve_weights(const DatasetBundle& bundle, const TrainConfig& config) {
  const std::size_t N = bundle.tables.size();
  if (config.weights == WeightMode::kUniform) return std::vector<double>(N, 1.0 / static_cast<double>(N));

  bool cached = bundle.dbi.size() == N;
  for (const auto& d : bundle.dbi) cached = cached && d.has_value();
  std::vector<double> psi;
  if (cached) {
    for (const auto& d : bundle.dbi) psi.push_back(*d);
  } else {
    const auto train_ids = bundle.ids_in(Split::kTrain);
    const auto* subset = train_ids.empty() ? nullptr : &train_ids;
    for (const auto& r : dbi_reports(bundle, config.cluster_spec(), subset)) psi.push_back(r.psi);
  }
  return model_weights(psi);
}

namespace {

void check_finite(const LossBreakdown& b, std::size_t epoch, std::size_t step) {
  const std::pair<const char*, double> terms[] = {{"smooth_l1", b.l1}, {"intra", b.intra}, {"inter", b.inter}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      throw NonFiniteLossError(name, std::string("non-finite ") + name + " loss at epoch " + std::to_string(epoch + 1) +
                                         ", step " + std::to_string(step));
    }
  }
}

}  // namespace

TrainResult train(const DatasetBundle& bundle, const TrainConfig& config, std::span<const double> omega) {
  config.validate();
  const std::size_t N = bundle.tables.size();
  if (omega.size() != N) throw ValidationError("train: need one weight per model");
  if (bundle.split.empty()) throw ValidationError("train: dataset has no train/test split");

  const auto train_ids = bundle.ids_in(Split::kTrain);
  const auto test_ids = bundle.ids_in(Split::kTest);
  if (train_ids.empty()) throw ValidationError("train: empty training split");

  const ClusterSpec spec = config.cluster_spec();
  std::vector<std::vector<Vector>> inputs(train_ids.size());
  std::vector<double> targets(train_ids.size());
  std::vector<std::size_t> clusters(train_ids.size());
  for (std::size_t i = 0; i < train_ids.size(); ++i) {
    for (const auto& table : bundle.tables) inputs[i].push_back(table.mean_vector(train_ids[i]));
    targets[i] = bundle.labels.mos.at(train_ids[i]);
    clusters[i] = spec.cluster_of(targets[i]);
  }

  std::vector<std::uint32_t> dims;
  for (const auto& table : bundle.tables) dims.push_back(table.dim);

  TrainResult result;
  result.params = init_heads(dims, config.d_out, config.d_hidden, config.seed);
  if (config.epochs == 0) return result;

  std::vector<std::size_t> test_tables(N);
  for (std::size_t n = 0; n < N; ++n) test_tables[n] = n;
  std::vector<double> test_targets;
  for (const auto& vid : test_ids) test_targets.push_back(bundle.labels.mos.at(vid));

  const std::size_t steps_per_epoch = (train_ids.size() + config.batch_size - 1) / config.batch_size;
  const std::uint64_t total_steps = config.epochs * steps_per_epoch;
  const std::uint64_t warmup_steps = config.warmup_epochs * steps_per_epoch;
  const LossConfig loss_config = config.loss_config();

  OptimState state = OptimState::for_params(result.params);
  Rng triplet_rng(Rng::derive(config.seed, 0x7472697074ULL));
  HeadParams best;
  double best_srcc = -std::numeric_limits<double>::infinity();
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_balanced_batches(clusters, config.batch_size, config.seed, epoch);
    LossBreakdown sum{};
    double lr = 0.0;
    for (const auto& batch : batches) {
      const std::size_t B = batch.size();
      std::vector<SampleTrace> traces;
      traces.reserve(B);
      std::vector<double> preds(B), batch_targets(B);
      std::vector<std::vector<Vector>> f(B);
      std::vector<Vector> h(B);
      std::vector<std::size_t> batch_clusters(B);
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t i = batch[b];
        traces.push_back(predict(result.params, inputs[i], omega));
        preds[b] = traces.back().score;
        batch_targets[b] = targets[i];
        for (const auto& ht : traces.back().heads) f[b].push_back(ht.f);
        h[b] = traces.back().h;
        batch_clusters[b] = clusters[i];
      }
      std::vector<std::optional<Triplet>> triplets;
      if (loss_config.use_inter && loss_config.inter_mode == InterMode::kSampleTriplet) {
        triplets = choose_triplets(batch_clusters, triplet_rng);
      }
      const LossResult loss =
          total_loss({preds, batch_targets, f, h, batch_clusters, triplets}, loss_config, /*with_grads=*/true);
      check_finite(loss.breakdown, epoch, step);
      result.anchors_without_negative += loss.anchors_without_negative;

      HeadParams grads = result.params.zeros_like();
      for (std::size_t b = 0; b < B; ++b) backward(result.params, traces[b], omega, loss.grads[b], grads);

      lr = lr_at(step, total_steps, warmup_steps, config.base_lr);
      adamw_step(result.params, grads, state, lr, config.weight_decay);
      ++step;

      sum.l1 += loss.breakdown.l1;
      sum.intra += loss.breakdown.intra;
      sum.inter += loss.breakdown.inter;
      sum.total += loss.breakdown.total;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    const double nb = static_cast<double>(batches.size());
    rec.loss = {sum.l1 / nb, sum.intra / nb, sum.inter / nb, sum.total / nb, config.alpha, config.beta};
    rec.test_plcc = rec.test_srcc = std::numeric_limits<double>::quiet_NaN();
    if (test_ids.size() >= 2) {
      const auto scores = predict_videos(result.params, omega, bundle, test_tables, test_ids);
      try {
        rec.test_plcc = plcc(scores, test_targets);
        rec.test_srcc = srcc(scores, test_targets);
      } catch (const ValidationError&) {
        // constant predictions early in training; leave NaN
      }
    }
    if (config.checkpoint == CheckpointPolicy::kBestSrcc && rec.test_srcc > best_srcc) {
      best_srcc = rec.test_srcc;
      best = result.params;
    }
    result.history.push_back(rec);
  }
  if (config.checkpoint == CheckpointPolicy::kBestSrcc && best.model_count() > 0) result.params = std::move(best);
  return result;
}

Checkpoint make_checkpoint(const DatasetBundle& bundle, const TrainConfig& config, std::span<const double> omega,
                           HeadParams params) {
  Checkpoint ckpt;
  ckpt.params = std::move(params);
  for (const auto& table : bundle.tables) ckpt.model_ids.push_back(table.model_id);
  ckpt.omega.assign(omega.begin(), omega.end());
  ckpt.clusters = config.cluster_spec();
  ckpt.dataset_name = bundle.name;
  ckpt.train_fraction = config.train_fraction;
  ckpt.split_seed = config.split_seed;
  return ckpt;
}

}  // namespace ptmvqa
