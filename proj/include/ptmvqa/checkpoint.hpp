#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ptmvqa/clustering.hpp"
#include "ptmvqa/model.hpp"

namespace ptmvqa {

// Everything needed to run inference without the training manifest.
struct Checkpoint {
  HeadParams params;
  std::vector<std::string> model_ids;  // aligned with params.heads
  std::vector<double> omega;           // aggregation weights
  ClusterSpec clusters;
  // Name of the dataset it was trained on and how that dataset was split,
  // so `evaluate --split test` can rebuild the held-out set.
  std::string dataset_name;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;

  void validate() const;
};

// Binary layout (little-endian):
//   "PTMC" | u16 version=1 | u32 D | u32 D_hidden | u32 N
//   | per model: u16 len + model_id, u32 dim, f64 omega
//   | u32 K | per cluster: f64 lo, f64 hi
//   | u16 len + dataset name | f64 train_fraction | u64 split_seed
//   | parameter blobs, f64 each, in HeadParams::tensors() order (matrices row-major)
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ptmvqa
