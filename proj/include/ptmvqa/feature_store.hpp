#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ptmvqa {

struct ViewKey {
  std::string video_id;
  std::uint32_t view_index = 0;

  auto operator<=>(const ViewKey&) const = default;
  bool operator==(const ViewKey&) const = default;
};

// Frozen-backbone features of one model: one f32 vector per (video, view).
// Values are stored at file precision and widened to double on access.
struct FeatureTable {
  std::string model_id;
  std::uint32_t dim = 0;
  std::map<ViewKey, std::vector<float>> entries;

  // Inserts one view, enforcing length, uniqueness and finiteness.
  void add(const std::string& video_id, std::uint32_t view_index, std::vector<float> values);

  // Throws ValidationError if any invariant is broken.
  void validate() const;

  std::vector<std::string> video_ids() const;
  std::vector<std::uint32_t> views_of(const std::string& video_id) const;
  bool has_video(const std::string& video_id) const;

  Eigen::VectorXd view_vector(const std::string& video_id, std::uint32_t view_index) const;
  // Mean over all stored views of a video.
  Eigen::VectorXd mean_vector(const std::string& video_id) const;

  bool operator==(const FeatureTable&) const = default;
};

struct MosLabels {
  std::map<std::string, double> mos;

  void validate() const;
  bool operator==(const MosLabels&) const = default;
};

enum class Split { kTrain, kTest };

struct DatasetBundle {
  std::string name;
  std::vector<FeatureTable> tables;
  MosLabels labels;
  // Empty until split_dataset runs.
  std::map<std::string, Split> split;
  // DBI cached in the manifest, aligned with `tables`.
  std::vector<std::optional<double>> dbi;

  // Label keys, sorted.
  std::vector<std::string> video_ids() const;
  std::vector<std::string> ids_in(Split which) const;
  // Index into `tables`, or nullopt.
  std::optional<std::size_t> find_table(const std::string& model_id) const;

  // Alignment invariants across tables and labels. Names offending videos.
  void validate() const;
};

void write_feature_file(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable read_feature_file(const std::filesystem::path& path);

// "video_id,mos" lines; a header line is allowed.
MosLabels read_labels(const std::filesystem::path& path);
void write_labels(const MosLabels& labels, const std::filesystem::path& path);

// JSON manifest: {"name", "labels", "models": [{"model_id", "path", "dbi"?}]}.
// Relative paths resolve against the manifest's directory.
DatasetBundle load_dataset(const std::filesystem::path& manifest_path);

// Writes one feature file per table, labels.csv and manifest.json into `dir`.
// Returns the manifest path.
std::filesystem::path save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);

// Seeded random split; |train| = round(train_fraction * n).
DatasetBundle split_dataset(const DatasetBundle& bundle, double train_fraction, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n_videos = 200;
  std::size_t n_models = 2;
  std::vector<std::uint32_t> dims = {32, 32};
  std::uint32_t views_per_video = 1;
  std::vector<double> signal_strength = {1.0, 0.0};
  double noise_sigma = 0.05;
  // Fraction of videos whose features encode a quality from a different
  // MOS cluster than their label (content/quality mismatch).
  double outlier_fraction = 0.0;
  std::uint64_t seed = 0;
  // Seeds the per-model unit directions separately so that two domains with
  // different `seed` share the same signal geometry.
  std::uint64_t direction_seed = 1234;
  std::string name = "synthetic";

  void validate() const;
};

// MOS q ~ U[1,5]; model n's view feature = s_n * q * u_n + sigma * N(0, I).
DatasetBundle gen_synthetic(const SyntheticSpec& spec);

// The fixed unit direction u_n used by gen_synthetic.
Eigen::VectorXd synthetic_direction(const SyntheticSpec& spec, std::size_t model);

}  // namespace ptmvqa
