#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptmvqa/checkpoint.hpp"
#include "ptmvqa/feature_store.hpp"

namespace ptmvqa {

// Sample Pearson correlation. Throws on n < 2 or a zero-variance series.
double plcc(std::span<const double> preds, std::span<const double> targets);
// Pearson correlation of average ranks.
double srcc(std::span<const double> preds, std::span<const double> targets);
// 1-based ranks; ties share their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

enum class SplitFilter { kAll, kTrain, kTest };
// kScore averages per-view predictions; kFeature averages features first.
enum class ViewAggregation { kScore, kFeature };

struct EvalReport {
  std::string dataset;
  std::string split;
  std::size_t n_videos = 0;
  std::size_t views_per_video = 0;
  double plcc = 0.0;
  double srcc = 0.0;
  double mean = 0.0;
  bool in_domain = false;

  std::string to_json() const;
  static std::string csv_header();  // dataset,n,plcc,srcc,mean
  std::string csv_row() const;
};

// Bundle table index for each checkpoint head. Names the missing model or
// the model whose feature dim disagrees.
std::vector<std::size_t> match_models(const Checkpoint& ckpt, const DatasetBundle& bundle);

// Per-video score, views aggregated per `mode`. `tables[n]` is the bundle
// table feeding head n.
std::vector<double> predict_videos(const HeadParams& params, std::span<const double> omega,
                                   const DatasetBundle& bundle, std::span<const std::size_t> tables,
                                   const std::vector<std::string>& video_ids,
                                   ViewAggregation mode = ViewAggregation::kScore);

// If the bundle carries no split and one is requested, the checkpoint's
// split parameters rebuild it.
EvalReport evaluate(const Checkpoint& ckpt, const DatasetBundle& bundle, SplitFilter filter,
                    ViewAggregation mode = ViewAggregation::kScore);

// Whole foreign dataset, no split.
EvalReport cross_evaluate(const Checkpoint& ckpt, const std::filesystem::path& manifest,
                          ViewAggregation mode = ViewAggregation::kScore);

std::vector<std::pair<std::string, double>> predict_all(const Checkpoint& ckpt, const DatasetBundle& bundle,
                                                        ViewAggregation mode = ViewAggregation::kScore);

}  // namespace ptmvqa
