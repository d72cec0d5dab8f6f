#include <cmath>
#include <cstdio>

#include "ptmvqa/errors.hpp"
#include "ptmvqa/feature_store.hpp"
#include "ptmvqa/rng.hpp"

namespace ptmvqa {

void SyntheticSpec::validate() const {
  if (n_videos < 4) throw ValidationError("synthetic: need at least 4 videos");
  if (n_models == 0) throw ValidationError("synthetic: need at least one model");
  if (dims.size() != n_models) throw ValidationError("synthetic: dims must list one entry per model");
  if (signal_strength.size() != n_models) {
    throw ValidationError("synthetic: signal_strength must list one entry per model");
  }
  for (auto d : dims) {
    if (d == 0) throw ValidationError("synthetic: dims must be positive");
  }
  for (double s : signal_strength) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("synthetic: signal_strength must be finite and >= 0");
  }
  if (views_per_video == 0) throw ValidationError("synthetic: views_per_video must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ValidationError("synthetic: noise_sigma must be finite and >= 0");
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw ValidationError("synthetic: outlier_fraction must lie in [0, 1]");
  }
}

Eigen::VectorXd synthetic_direction(const SyntheticSpec& spec, std::size_t model) {
  Rng rng(Rng::derive(spec.direction_seed, model));
  Eigen::VectorXd u(spec.dims.at(model));
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
    norm = u.norm();
  } while (norm == 0.0);
  return u / norm;
}

DatasetBundle gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();

  DatasetBundle bundle;
  bundle.name = spec.name;

  Rng rng(spec.seed);
  std::vector<std::string> ids(spec.n_videos);
  std::vector<double> quality(spec.n_videos);
  std::vector<double> feature_quality(spec.n_videos);
  char buf[32];
  for (std::size_t i = 0; i < spec.n_videos; ++i) {
    std::snprintf(buf, sizeof(buf), "v%05zu", i);
    ids[i] = buf;
    quality[i] = rng.uniform(1.0, 5.0);
    feature_quality[i] = quality[i];
    bundle.labels.mos[ids[i]] = quality[i];
  }
  // Outliers carry the signal of a quality at least one MOS unit away.
  for (std::size_t i = 0; i < spec.n_videos; ++i) {
    if (rng.uniform01() < spec.outlier_fraction) {
      double q;
      do {
        q = rng.uniform(1.0, 5.0);
      } while (std::abs(q - quality[i]) < 1.0);
      feature_quality[i] = q;
    }
  }

  for (std::size_t n = 0; n < spec.n_models; ++n) {
    const Eigen::VectorXd u = synthetic_direction(spec, n);
    Rng noise(Rng::derive(spec.seed, 1000 + n));
    FeatureTable table;
    table.model_id = "model_" + std::to_string(n);
    table.dim = spec.dims[n];
    for (std::size_t i = 0; i < spec.n_videos; ++i) {
      for (std::uint32_t view = 0; view < spec.views_per_video; ++view) {
        std::vector<float> values(table.dim);
        for (std::uint32_t d = 0; d < table.dim; ++d) {
          const double x = spec.signal_strength[n] * feature_quality[i] * u[d] + spec.noise_sigma * noise.normal();
          values[d] = static_cast<float>(x);
        }
        table.add(ids[i], view, std::move(values));
      }
    }
    bundle.tables.push_back(std::move(table));
    bundle.dbi.emplace_back(std::nullopt);
  }
  return bundle;
}

}  // namespace ptmvqa
