#include "ptmvqa/losses.hpp"

#include <cmath>
#include <limits>

#include "ptmvqa/errors.hpp"

namespace ptmvqa {

double smooth_l1(double pred, double target) {
  const double e = pred - target;
  return std::abs(e) < 1.0 ? 0.5 * e * e : std::abs(e) - 0.5;
}

double smooth_l1_grad(double pred, double target) {
  const double e = pred - target;
  if (std::abs(e) < 1.0) return e;
  return e > 0.0 ? 1.0 : -1.0;
}

double intra_loss(std::span<const Vector> f) {
  const std::size_t N = f.size();
  if (N < 2) throw ValidationError("intra_loss needs at least 2 models");
  std::vector<double> norms(N);
  for (std::size_t n = 0; n < N; ++n) {
    norms[n] = f[n].norm();
    if (norms[n] == 0.0) throw ValidationError("intra_loss: zero-norm feature for model " + std::to_string(n));
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t m = n + 1; m < N; ++m) sum += 1.0 - f[n].dot(f[m]) / (norms[n] * norms[m]);
  }
  return 2.0 * sum / static_cast<double>(N * (N - 1));
}

std::vector<Vector> intra_loss_grad(std::span<const Vector> f) {
  const std::size_t N = f.size();
  if (N < 2) throw ValidationError("intra_loss needs at least 2 models");
  std::vector<double> norms(N);
  std::vector<Vector> grads;
  for (std::size_t n = 0; n < N; ++n) {
    norms[n] = f[n].norm();
    if (norms[n] == 0.0) throw ValidationError("intra_loss: zero-norm feature for model " + std::to_string(n));
    grads.push_back(Vector::Zero(f[n].size()));
  }
  const double scale = -2.0 / static_cast<double>(N * (N - 1));
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t m = n + 1; m < N; ++m) {
      const double nm = norms[n] * norms[m];
      const double cos = f[n].dot(f[m]) / nm;
      grads[n] += scale * (f[m] / nm - cos * f[n] / (norms[n] * norms[n]));
      grads[m] += scale * (f[n] / nm - cos * f[m] / (norms[m] * norms[m]));
    }
  }
  return grads;
}

BatchCentroids batch_centroids(std::span<const Vector> h, std::span<const std::size_t> clusters) {
  if (h.size() != clusters.size()) throw ValidationError("batch_centroids: size mismatch");
  BatchCentroids out;
  for (std::size_t i = 0; i < h.size(); ++i) {
    auto [it, fresh] = out.try_emplace(clusters[i]);
    if (fresh) it->second.c = Vector::Zero(h[i].size());
    it->second.c += h[i];
    ++it->second.count;
  }
  for (auto& [_, cent] : out) cent.c /= static_cast<double>(cent.count);
  return out;
}

InterTerm inter_loss(const Vector& h, std::size_t cluster, const BatchCentroids& centroids, double alpha) {
  const auto own = centroids.find(cluster);
  if (own == centroids.end()) throw ValidationError("inter_loss: anchor cluster has no centroid");
  InterTerm term;
  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& [k, cent] : centroids) {
    if (k == cluster) continue;
    const double d = (h - cent.c).squaredNorm();
    if (d < nearest) {
      nearest = d;
      term.negative = k;
    }
  }
  if (!term.negative) return term;
  term.value = std::max((h - own->second.c).squaredNorm() - nearest + alpha, 0.0);
  return term;
}

std::vector<std::optional<Triplet>> choose_triplets(std::span<const std::size_t> clusters, Rng& rng) {
  const std::size_t B = clusters.size();
  std::vector<std::optional<Triplet>> out(B);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < B; ++i) {
    pos.clear();
    neg.clear();
    for (std::size_t j = 0; j < B; ++j) {
      if (j == i) continue;
      (clusters[j] == clusters[i] ? pos : neg).push_back(j);
    }
    if (pos.empty() || neg.empty()) continue;
    const auto p = pos[rng.index(pos.size())];
    const auto n = neg[rng.index(neg.size())];
    out[i] = Triplet{p, n};
  }
  return out;
}

LossResult total_loss(const BatchInputs& batch, const LossConfig& config, bool with_grads) {
  const std::size_t B = batch.preds.size();
  if (B == 0) throw ValidationError("total_loss: empty batch");
  if (batch.targets.size() != B || batch.f.size() != B || batch.h.size() != B || batch.clusters.size() != B) {
    throw ValidationError("total_loss: inconsistent batch shapes");
  }
  const bool triplet_mode = config.inter_mode == InterMode::kSampleTriplet;
  if (config.use_inter && triplet_mode && batch.triplets.size() != B) {
    throw ValidationError("total_loss: sample-triplet mode needs one triplet slot per anchor");
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  const std::size_t N = batch.f[0].size();

  LossResult result;
  auto& br = result.breakdown;
  br.alpha = config.alpha;
  br.beta = config.beta;
  if (with_grads) {
    result.grads.resize(B);
    for (std::size_t i = 0; i < B; ++i) {
      result.grads[i].d_h = Vector::Zero(batch.h[i].size());
      result.grads[i].d_f.assign(N, Vector());
    }
  }

  double l1 = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    l1 += smooth_l1(batch.preds[i], batch.targets[i]);
    if (with_grads) result.grads[i].d_score = smooth_l1_grad(batch.preds[i], batch.targets[i]) * inv_b;
  }
  br.l1 = l1 * inv_b;

  if (config.use_intra && N >= 2) {
    double intra = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      if (batch.f[i].size() != N) throw ValidationError("total_loss: model count varies within batch");
      intra += intra_loss(batch.f[i]);
      if (with_grads) {
        auto g = intra_loss_grad(batch.f[i]);
        for (std::size_t n = 0; n < N; ++n) result.grads[i].d_f[n] = (config.beta * inv_b) * g[n];
      }
    }
    br.intra = intra * inv_b;
  }

  if (config.use_inter) {
    double inter = 0.0;
    const double gscale = config.beta * inv_b;
    if (!triplet_mode) {
      const auto centroids = batch_centroids(batch.h, batch.clusters);
      std::map<std::size_t, Vector> d_centroid;
      for (std::size_t i = 0; i < B; ++i) {
        const auto term = inter_loss(batch.h[i], batch.clusters[i], centroids, config.alpha);
        if (!term.negative) {
          ++result.anchors_without_negative;
          continue;
        }
        inter += term.value;
        if (with_grads && term.value > 0.0) {
          const Vector& ck = centroids.at(batch.clusters[i]).c;
          const Vector& ct = centroids.at(*term.negative).c;
          result.grads[i].d_h += gscale * 2.0 * (ct - ck);
          auto add = [&](std::size_t k, const Vector& g) {
            auto [it, fresh] = d_centroid.try_emplace(k, g);
            if (!fresh) it->second += g;
          };
          add(batch.clusters[i], gscale * -2.0 * (batch.h[i] - ck));
          add(*term.negative, gscale * 2.0 * (batch.h[i] - ct));
        }
      }
      if (with_grads) {
        for (std::size_t j = 0; j < B; ++j) {
          auto it = d_centroid.find(batch.clusters[j]);
          if (it == d_centroid.end()) continue;
          result.grads[j].d_h += it->second / static_cast<double>(centroids.at(batch.clusters[j]).count);
        }
      }
    } else {
      for (std::size_t i = 0; i < B; ++i) {
        if (!batch.triplets[i]) {
          ++result.anchors_without_negative;
          continue;
        }
        const auto [p, n] = *batch.triplets[i];
        const Vector& a = batch.h[i];
        const double value =
            std::max((a - batch.h[p]).squaredNorm() - (a - batch.h[n]).squaredNorm() + config.alpha, 0.0);
        inter += value;
        if (with_grads && value > 0.0) {
          result.grads[i].d_h += gscale * 2.0 * (batch.h[n] - batch.h[p]);
          result.grads[p].d_h += gscale * -2.0 * (a - batch.h[p]);
          result.grads[n].d_h += gscale * 2.0 * (a - batch.h[n]);
        }
      }
    }
    br.inter = inter * inv_b;
  }

  br.total = br.l1 + config.beta * (br.intra + br.inter);
  return result;
}

}  // namespace ptmvqa
