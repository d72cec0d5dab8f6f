#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptmvqa/feature_store.hpp"

namespace ptmvqa {

struct MosInterval {
  double lo = 1.0;
  double hi = 5.0;
  bool operator==(const MosInterval&) const = default;
};

// Pseudo clusters over the MOS scale. Interval k holds MOS in [lo_k, hi_k);
// the top interval is closed on the right so that 5.0 has a home.
struct ClusterSpec {
  std::vector<MosInterval> intervals;

  std::size_t size() const { return intervals.size(); }
  void validate() const;
  // Cluster index for a MOS value.
  std::size_t cluster_of(double mos) const;

  // K = 2, 4 or 6 with the interval layouts used for the quality ablation.
  static ClusterSpec preset(std::size_t k);

  bool operator==(const ClusterSpec&) const = default;
};

// video_id -> cluster index
using ClusterAssignment = std::map<std::string, std::size_t>;

ClusterAssignment assign_clusters(const MosLabels& labels, const ClusterSpec& spec);

struct DbiDetail {
  double psi = 0.0;
  // Indexed by cluster; empty clusters have size 0 and are skipped.
  std::vector<std::size_t> cluster_sizes;
  std::vector<double> centroid_norms;
  std::vector<double> scatter;  // mean distance to centroid
};

// Davies-Bouldin index of points grouped by cluster label. Empty clusters
// are skipped; fewer than 2 nonempty clusters or coincident centroids throw.
DbiDetail dbi_from_points(std::span<const Eigen::VectorXd> points, std::span<const std::size_t> labels);

// Davies-Bouldin index of one model's per-video features (mean over views)
// grouped by `assignment`. Only videos present in `assignment` take part.
DbiDetail compute_dbi_detail(const FeatureTable& table, const ClusterAssignment& assignment);
double compute_dbi(const FeatureTable& table, const ClusterAssignment& assignment);

struct DbiReport {
  std::string model_id;
  double psi = 0.0;
  double omega = 0.0;
  std::vector<std::size_t> cluster_sizes;
  std::vector<double> centroid_norms;
};

// DBI for every table in the bundle over all labeled videos (or only `videos`
// if given). Models are evaluated concurrently.
std::vector<DbiReport> dbi_reports(const DatasetBundle& bundle, const ClusterSpec& spec,
                                   const std::vector<std::string>* videos = nullptr);

// omega_n = 1 / psi_n. A zero psi is an error unless `zero_psi_floor` > 0,
// in which case it stands in for psi.
std::vector<double> model_weights(const std::vector<double>& psi, double zero_psi_floor = 0.0);

struct SelectionRule {
  std::optional<std::size_t> max_models;
  std::optional<double> psi_threshold;
};

// Sorted ascending by psi (ties by model_id), then truncated by the rule.
std::vector<std::pair<std::string, double>> select_models(std::vector<std::pair<std::string, double>> reports,
                                                          const SelectionRule& rule);

}  // namespace ptmvqa
