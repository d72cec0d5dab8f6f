#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ptmvqa/checkpoint.hpp"
#include "ptmvqa/feature_store.hpp"
#include "ptmvqa/losses.hpp"
#include "ptmvqa/model.hpp"

namespace ptmvqa {

enum class WeightMode { kDbi, kUniform };
enum class CheckpointPolicy { kLast, kBestSrcc };

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double base_lr = 1e-3;
  double weight_decay = 0.02;
  std::size_t warmup_epochs = 2;
  double alpha = 0.05;
  double beta = 0.2;
  std::size_t d_out = 128;
  std::size_t d_hidden = 256;
  std::size_t k = 6;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  WeightMode weights = WeightMode::kDbi;
  bool use_intra = true;
  bool use_inter = true;
  InterMode inter = InterMode::kCentroid;
  CheckpointPolicy checkpoint = CheckpointPolicy::kLast;

  void validate() const;
  ClusterSpec cluster_spec() const;
  LossConfig loss_config() const;
};

// JSON keys match the field names, except D / D_hidden for d_out / d_hidden.
// Unknown keys raise UsageError.
void apply_config_json(TrainConfig& config, const std::string& json_text);
// One `key=value` override; value parsed as JSON, falling back to a string.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);
std::string config_to_json(const TrainConfig& config);
TrainConfig load_train_config(const std::filesystem::path& path);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;        // at the epoch's last step
  LossBreakdown loss;     // mean over the epoch's batches
  double test_plcc = 0.0; // NaN without a usable test split
  double test_srcc = 0.0;

  // "epoch lr l1 intra inter total test_plcc test_srcc"
  std::string log_line() const;
};

struct TrainResult {
  HeadParams params;
  std::vector<EpochRecord> history;
  std::size_t anchors_without_negative = 0;
};

// Aggregation weights for the bundle's tables: uniform, or 1/DBI from the
// manifest cache, computed on the training split when not cached.
std::vector<double> resolve_weights(const DatasetBundle& bundle, const TrainConfig& config);

// Trains every table in the bundle on its training split. Requires a split.
TrainResult train(const DatasetBundle& bundle, const TrainConfig& config, std::span<const double> omega);

Checkpoint make_checkpoint(const DatasetBundle& bundle, const TrainConfig& config, std::span<const double> omega,
                           HeadParams params);

std::string training_log_header();

}  // namespace ptmvqa
