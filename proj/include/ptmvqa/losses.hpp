#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ptmvqa/model.hpp"
#include "ptmvqa/rng.hpp"

namespace ptmvqa {

struct LossBreakdown {
  double l1 = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

// Huber with threshold 1: 0.5 e^2 if |e| < 1, else |e| - 0.5.
double smooth_l1(double pred, double target);
// d smooth_l1 / d pred
double smooth_l1_grad(double pred, double target);

// Mean over unordered model pairs of (1 - cos(f_n, f_m)); range [0, 2].
double intra_loss(std::span<const Vector> f);
std::vector<Vector> intra_loss_grad(std::span<const Vector> f);

struct Centroid {
  Vector c;
  std::size_t count = 0;
};
// Only clusters present in the batch appear.
using BatchCentroids = std::map<std::size_t, Centroid>;

BatchCentroids batch_centroids(std::span<const Vector> h, std::span<const std::size_t> clusters);

struct InterTerm {
  double value = 0.0;
  // Hardest (nearest) other-cluster centroid; empty if the batch has none.
  std::optional<std::size_t> negative;
};

// max(|h - c_k|^2 - |h - c_t|^2 + alpha, 0) with c_t the nearest other centroid.
InterTerm inter_loss(const Vector& h, std::size_t cluster, const BatchCentroids& centroids, double alpha);

enum class InterMode { kCentroid, kSampleTriplet };

struct LossConfig {
  double alpha = 0.05;
  double beta = 0.2;
  bool use_intra = true;
  bool use_inter = true;
  InterMode inter_mode = InterMode::kCentroid;
};

// Sample-to-sample triplet (ablation baseline): indices into the batch.
struct Triplet {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

// One random in-batch positive (same cluster, not the anchor) and negative
// (other cluster) per anchor; empty where either does not exist.
std::vector<std::optional<Triplet>> choose_triplets(std::span<const std::size_t> clusters, Rng& rng);

struct BatchInputs {
  std::span<const double> preds;
  std::span<const double> targets;
  std::span<const std::vector<Vector>> f;  // [sample][model]
  std::span<const Vector> h;
  std::span<const std::size_t> clusters;
  // Required when inter_mode is kSampleTriplet.
  std::span<const std::optional<Triplet>> triplets;
};

struct LossResult {
  LossBreakdown breakdown;
  // Per-sample upstream gradients of breakdown.total; empty unless requested.
  std::vector<SampleGrad> grads;
  // Anchors whose cluster was alone in the batch (sampler warning).
  std::size_t anchors_without_negative = 0;
};

// total = mean smooth_l1 + beta * (mean intra + mean inter).
LossResult total_loss(const BatchInputs& batch, const LossConfig& config, bool with_grads);

}  // namespace ptmvqa
