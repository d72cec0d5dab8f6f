#include "ptmvqa/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "ptmvqa/errors.hpp"
#include "ptmvqa/model.hpp"
#include "ptmvqa/parallel.hpp"

namespace ptmvqa {

double plcc(std::span<const double> preds, std::span<const double> targets) {
  const std::size_t n = preds.size();
  if (n != targets.size()) throw ValidationError("plcc: series lengths differ");
  if (n < 2) throw ValidationError("plcc: need at least 2 points");
  const double mx = std::accumulate(preds.begin(), preds.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = preds[i] - mx;
    const double dy = targets[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("plcc: degenerate series (zero variance)");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double srcc(std::span<const double> preds, std::span<const double> targets) {
  if (preds.size() != targets.size()) throw ValidationError("srcc: series lengths differ");
  const auto rp = average_ranks(preds);
  const auto rt = average_ranks(targets);
  try {
    return plcc(rp, rt);
  } catch (const ValidationError&) {
    throw ValidationError("srcc: degenerate series (zero rank variance)");
  }
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j{{"dataset", dataset},     {"split", split},  {"n_videos", n_videos},
                           {"views_per_video", views_per_video}, {"plcc", plcc},     {"srcc", srcc},
                           {"mean", mean},           {"in_domain", in_domain}};
  return j.dump(2);
}

std::string EvalReport::csv_header() { return "dataset,n,plcc,srcc,mean"; }

std::string EvalReport::csv_row() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), ",%zu,%.6f,%.6f,%.6f", n_videos, plcc, srcc, mean);
  return dataset + buf;
}

std::vector<std::size_t> match_models(const Checkpoint& ckpt, const DatasetBundle& bundle) {
  const auto dims = ckpt.params.input_dims();
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < ckpt.model_ids.size(); ++n) {
    const auto idx = bundle.find_table(ckpt.model_ids[n]);
    if (!idx) throw ValidationError("dataset '" + bundle.name + "' has no features for model " + ckpt.model_ids[n]);
    if (bundle.tables[*idx].dim != dims[n]) {
      throw ValidationError("model " + ckpt.model_ids[n] + ": feature dim " + std::to_string(bundle.tables[*idx].dim) +
                            " does not match checkpoint dim " + std::to_string(dims[n]));
    }
    out.push_back(*idx);
  }
  return out;
}

std::vector<double> predict_videos(const HeadParams& params, std::span<const double> omega,
                                   const DatasetBundle& bundle, std::span<const std::size_t> tables,
                                   const std::vector<std::string>& video_ids, ViewAggregation mode) {
  if (tables.size() != params.heads.size()) throw ValidationError("predict_videos: table/head count mismatch");
  std::vector<double> scores(video_ids.size());
  parallel_for(video_ids.size(), [&](std::size_t i) {
    const auto& vid = video_ids[i];
    std::vector<Vector> z(tables.size());
    if (mode == ViewAggregation::kFeature) {
      for (std::size_t n = 0; n < tables.size(); ++n) z[n] = bundle.tables[tables[n]].mean_vector(vid);
      scores[i] = predict(params, z, omega).score;
      return;
    }
    const auto views = bundle.tables[tables.front()].views_of(vid);
    if (views.empty()) throw ValidationError("no views for video " + vid);
    double sum = 0.0;
    for (auto view : views) {
      for (std::size_t n = 0; n < tables.size(); ++n) z[n] = bundle.tables[tables[n]].view_vector(vid, view);
      sum += predict(params, z, omega).score;
    }
    scores[i] = sum / static_cast<double>(views.size());
  });
  return scores;
}

namespace {

EvalReport report_for(const Checkpoint& ckpt, const DatasetBundle& bundle, const std::vector<std::string>& ids,
                      ViewAggregation mode, std::string split_name) {
  if (ids.size() < 2) throw ValidationError("evaluation needs at least 2 videos, got " + std::to_string(ids.size()));
  const auto tables = match_models(ckpt, bundle);
  const auto scores = predict_videos(ckpt.params, ckpt.omega, bundle, tables, ids, mode);
  std::vector<double> targets;
  std::size_t views = 0;
  for (const auto& vid : ids) {
    targets.push_back(bundle.labels.mos.at(vid));
    views = std::max(views, bundle.tables[tables.front()].views_of(vid).size());
  }
  EvalReport r;
  r.dataset = bundle.name;
  r.split = std::move(split_name);
  r.n_videos = ids.size();
  r.views_per_video = views;
  r.plcc = plcc(scores, targets);
  r.srcc = srcc(scores, targets);
  r.mean = 0.5 * (r.plcc + r.srcc);
  r.in_domain = !ckpt.dataset_name.empty() && ckpt.dataset_name == bundle.name;
  return r;
}

}  // namespace

EvalReport evaluate(const Checkpoint& ckpt, const DatasetBundle& bundle, SplitFilter filter, ViewAggregation mode) {
  if (filter == SplitFilter::kAll) return report_for(ckpt, bundle, bundle.video_ids(), mode, "all");
  const DatasetBundle* source = &bundle;
  DatasetBundle resplit;
  if (bundle.split.empty()) {
    resplit = split_dataset(bundle, ckpt.train_fraction, ckpt.split_seed);
    source = &resplit;
  }
  const bool test = filter == SplitFilter::kTest;
  return report_for(ckpt, *source, source->ids_in(test ? Split::kTest : Split::kTrain), mode, test ? "test" : "train");
}

EvalReport cross_evaluate(const Checkpoint& ckpt, const std::filesystem::path& manifest, ViewAggregation mode) {
  const DatasetBundle bundle = load_dataset(manifest);
  return report_for(ckpt, bundle, bundle.video_ids(), mode, "all");
}

std::vector<std::pair<std::string, double>> predict_all(const Checkpoint& ckpt, const DatasetBundle& bundle,
                                                        ViewAggregation mode) {
  const auto tables = match_models(ckpt, bundle);
  const auto ids = bundle.video_ids();
  const auto scores = predict_videos(ckpt.params, ckpt.omega, bundle, tables, ids, mode);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace_back(ids[i], scores[i]);
  return out;
}

}  // namespace ptmvqa
