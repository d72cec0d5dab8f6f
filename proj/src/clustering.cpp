#include "ptmvqa/clustering.hpp"

#include <algorithm>
#include <cmath>

#include "ptmvqa/errors.hpp"
#include "ptmvqa/parallel.hpp"

namespace ptmvqa {

void ClusterSpec::validate() const {
  if (intervals.size() < 2) throw ValidationError("cluster spec needs at least 2 intervals");
  if (intervals.front().lo != 1.0 || intervals.back().hi != 5.0) {
    throw ValidationError("cluster intervals must cover [1, 5]");
  }
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    if (!(intervals[k].lo < intervals[k].hi)) throw ValidationError("cluster interval " + std::to_string(k) + " is empty");
    if (k > 0 && intervals[k].lo != intervals[k - 1].hi) {
      throw ValidationError("cluster intervals must be sorted and contiguous at interval " + std::to_string(k));
    }
  }
}

std::size_t ClusterSpec::cluster_of(double mos) const {
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const bool last = k + 1 == intervals.size();
    if (mos >= intervals[k].lo && (mos < intervals[k].hi || (last && mos <= intervals[k].hi))) return k;
  }
  throw ValidationError("MOS " + std::to_string(mos) + " falls outside every cluster interval");
}

ClusterSpec ClusterSpec::preset(std::size_t k) {
  switch (k) {
    case 2:
      return {{{1.0, 3.0}, {3.0, 5.0}}};
    case 4:
      return {{{1.0, 2.0}, {2.0, 3.0}, {3.0, 4.0}, {4.0, 5.0}}};
    case 6:
      return {{{1.0, 2.0}, {2.0, 2.5}, {2.5, 3.0}, {3.0, 3.5}, {3.5, 4.0}, {4.0, 5.0}}};
    default:
      throw UsageError("no cluster preset for K=" + std::to_string(k) + " (use 2, 4 or 6)");
  }
}

ClusterAssignment assign_clusters(const MosLabels& labels, const ClusterSpec& spec) {
  spec.validate();
  ClusterAssignment out;
  for (const auto& [vid, y] : labels.mos) out.emplace(vid, spec.cluster_of(y));
  return out;
}

DbiDetail dbi_from_points(std::span<const Eigen::VectorXd> points, std::span<const std::size_t> labels) {
  if (points.size() != labels.size()) throw ValidationError("DBI: points and labels differ in count");
  std::size_t k_max = 0;
  for (auto k : labels) k_max = std::max(k_max, k + 1);
  const Eigen::Index dim = points.empty() ? 0 : points.front().size();

  DbiDetail out;
  out.cluster_sizes.assign(k_max, 0);
  out.centroid_norms.assign(k_max, 0.0);
  out.scatter.assign(k_max, 0.0);
  std::vector<Eigen::VectorXd> centroids(k_max, Eigen::VectorXd::Zero(dim));
  for (std::size_t i = 0; i < points.size(); ++i) {
    centroids[labels[i]] += points[i];
    ++out.cluster_sizes[labels[i]];
  }
  std::vector<std::size_t> present;
  for (std::size_t k = 0; k < k_max; ++k) {
    if (out.cluster_sizes[k] == 0) continue;
    centroids[k] /= static_cast<double>(out.cluster_sizes[k]);
    out.centroid_norms[k] = centroids[k].norm();
    present.push_back(k);
  }
  if (present.size() < 2) {
    throw ValidationError("DBI needs at least 2 nonempty clusters, got " + std::to_string(present.size()));
  }
  for (std::size_t i = 0; i < points.size(); ++i) out.scatter[labels[i]] += (points[i] - centroids[labels[i]]).norm();
  for (auto k : present) out.scatter[k] /= static_cast<double>(out.cluster_sizes[k]);

  double total = 0.0;
  for (auto k : present) {
    double worst = 0.0;
    for (auto t : present) {
      if (t == k) continue;
      const double sep = (centroids[k] - centroids[t]).norm();
      if (sep == 0.0) {
        throw ValidationError("DBI: degenerate centroids (clusters " + std::to_string(k) + " and " +
                              std::to_string(t) + " coincide)");
      }
      worst = std::max(worst, (out.scatter[k] + out.scatter[t]) / sep);
    }
    total += worst;
  }
  out.psi = total / static_cast<double>(present.size());
  return out;
}

DbiDetail compute_dbi_detail(const FeatureTable& table, const ClusterAssignment& assignment) {
  std::vector<Eigen::VectorXd> points;
  std::vector<std::size_t> labels;
  points.reserve(assignment.size());
  for (const auto& [vid, k] : assignment) {
    if (!table.has_video(vid)) throw ValidationError("DBI: model " + table.model_id + " has no features for " + vid);
    points.push_back(table.mean_vector(vid));
    labels.push_back(k);
  }
  try {
    return dbi_from_points(points, labels);
  } catch (const ValidationError& e) {
    throw ValidationError("model " + table.model_id + ": " + e.what());
  }
}

double compute_dbi(const FeatureTable& table, const ClusterAssignment& assignment) {
  return compute_dbi_detail(table, assignment).psi;
}

std::vector<DbiReport> dbi_reports(const DatasetBundle& bundle, const ClusterSpec& spec,
                                   const std::vector<std::string>* videos) {
  ClusterAssignment assignment = assign_clusters(bundle.labels, spec);
  if (videos) {
    ClusterAssignment subset;
    for (const auto& vid : *videos) subset.emplace(vid, assignment.at(vid));
    assignment = std::move(subset);
  }
  std::vector<DbiDetail> details(bundle.tables.size());
  parallel_for(bundle.tables.size(),
               [&](std::size_t n) { details[n] = compute_dbi_detail(bundle.tables[n], assignment); });

  std::vector<double> psi;
  for (const auto& d : details) psi.push_back(d.psi);
  const auto omega = model_weights(psi);

  std::vector<DbiReport> out;
  for (std::size_t n = 0; n < details.size(); ++n) {
    out.push_back({bundle.tables[n].model_id, details[n].psi, omega[n], details[n].cluster_sizes,
                   details[n].centroid_norms});
  }
  return out;
}

std::vector<double> model_weights(const std::vector<double>& psi, double zero_psi_floor) {
  std::vector<double> omega;
  omega.reserve(psi.size());
  for (std::size_t n = 0; n < psi.size(); ++n) {
    double p = psi[n];
    if (!std::isfinite(p) || p < 0.0) throw ValidationError("DBI score " + std::to_string(n) + " is not a finite positive value");
    if (p == 0.0) {
      if (zero_psi_floor <= 0.0) {
        throw ValidationError("DBI score " + std::to_string(n) +
                              " is 0 (perfect clustering); pass an explicit floor to weight it");
      }
      p = zero_psi_floor;
    }
    omega.push_back(1.0 / p);
  }
  return omega;
}

std::vector<std::pair<std::string, double>> select_models(std::vector<std::pair<std::string, double>> reports,
                                                          const SelectionRule& rule) {
  if (reports.empty()) throw ValidationError("select_models: no DBI reports");
  std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  if (rule.max_models) {
    if (*rule.max_models == 0) throw UsageError("select_models: max_models must be positive");
    if (reports.size() > *rule.max_models) reports.resize(*rule.max_models);
  }
  if (rule.psi_threshold) {
    const double threshold = *rule.psi_threshold;
    std::erase_if(reports, [&](const auto& r) { return r.second > threshold; });
    if (reports.empty()) {
      throw ValidationError("select_models: no model has DBI <= " + std::to_string(threshold) +
                            "; loosen the threshold");
    }
  }
  return reports;
}

}  // namespace ptmvqa
