#include "ptmvqa/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ptmvqa/checkpoint.hpp"
#include "ptmvqa/clustering.hpp"
#include "ptmvqa/errors.hpp"
#include "ptmvqa/evaluator.hpp"
#include "ptmvqa/feature_store.hpp"
#include "ptmvqa/trainer.hpp"

namespace ptmvqa {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

ViewAggregation parse_aggregation(const std::string& s) {
  if (s == "score") return ViewAggregation::kScore;
  if (s == "feature") return ViewAggregation::kFeature;
  throw UsageError("--aggregate must be 'score' or 'feature'");
}

struct GenOptions {
  std::size_t videos = 200;
  std::size_t models = 2;
  std::uint32_t dim = 32;
  std::uint32_t views = 1;
  std::vector<double> signal;
  double noise = 0.05;
  double outliers = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t direction_seed = 1234;
  std::string name = "synthetic";
  std::string out;
};

int cmd_gen_synthetic(const GenOptions& o, std::ostream& out) {
  SyntheticSpec spec;
  spec.n_videos = o.videos;
  spec.n_models = o.models;
  spec.dims.assign(o.models, o.dim);
  spec.views_per_video = o.views;
  if (o.signal.empty()) {
    spec.signal_strength.assign(o.models, 0.0);
    if (o.models > 0) spec.signal_strength[0] = 1.0;
  } else {
    spec.signal_strength = o.signal;
  }
  spec.noise_sigma = o.noise;
  spec.outlier_fraction = o.outliers;
  spec.seed = o.seed;
  spec.direction_seed = o.direction_seed;
  spec.name = o.name;
  if (spec.signal_strength.size() != spec.n_models) throw UsageError("--signal needs one value per model");

  const auto manifest = save_dataset(gen_synthetic(spec), o.out);
  ordered_json cfg{{"command", "gen-synthetic"}, {"videos", o.videos},       {"models", o.models},
                   {"dim", o.dim},               {"views", o.views},         {"signal", spec.signal_strength},
                   {"noise", o.noise},           {"outliers", o.outliers},   {"seed", o.seed},
                   {"direction_seed", o.direction_seed}, {"name", o.name}};
  write_text(fs::path(o.out) / "effective_config.json", cfg.dump(2));
  out << manifest.string() << '\n';
  return 0;
}

struct SelectOptions {
  std::string manifest;
  std::size_t k = 6;
  std::optional<std::size_t> max_models;
  std::optional<double> threshold;
  std::string out = ".";
};

int cmd_select_models(const SelectOptions& o, std::ostream& out) {
  const DatasetBundle bundle = load_dataset(o.manifest);
  const ClusterSpec spec = ClusterSpec::preset(o.k);
  const auto reports = dbi_reports(bundle, spec);

  std::vector<std::pair<std::string, double>> scores;
  for (const auto& r : reports) scores.emplace_back(r.model_id, r.psi);
  SelectionRule rule{o.max_models, o.threshold};
  if (!rule.max_models && !rule.psi_threshold) rule.max_models = reports.size();
  const auto selected = select_models(scores, rule);
  const auto ranked = select_models(scores, SelectionRule{reports.size(), std::nullopt});

  ordered_json doc;
  doc["dataset"] = bundle.name;
  doc["k"] = o.k;
  doc["models"] = ordered_json::array();
  for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
    const auto& r = *std::find_if(reports.begin(), reports.end(),
                                  [&](const DbiReport& x) { return x.model_id == ranked[rank].first; });
    const bool chosen = std::any_of(selected.begin(), selected.end(),
                                    [&](const auto& s) { return s.first == r.model_id; });
    doc["models"].push_back({{"model_id", r.model_id},
                             {"rank", rank + 1},
                             {"psi", r.psi},
                             {"omega", r.omega},
                             {"selected", chosen},
                             {"cluster_sizes", r.cluster_sizes},
                             {"centroid_norms", r.centroid_norms}});
  }
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "dbi_report.json", doc.dump(2));

  // Manifest restricted to the selection, with the DBI cached for training.
  std::ifstream in(o.manifest);
  auto manifest = nlohmann::json::parse(in);
  const fs::path base = fs::absolute(fs::path(o.manifest)).parent_path();
  const fs::path out_dir = fs::absolute(fs::path(o.out));
  nlohmann::json models = nlohmann::json::array();
  for (const auto& [model_id, psi] : selected) {
    for (auto entry : manifest["models"]) {
      if (entry["model_id"] != model_id) continue;
      fs::path p(entry["path"].get<std::string>());
      if (!p.is_absolute()) p = base / p;
      entry["path"] = fs::relative(p, out_dir).generic_string();
      entry["dbi"] = psi;
      models.push_back(entry);
    }
  }
  fs::path labels(manifest["labels"].get<std::string>());
  if (!labels.is_absolute()) labels = base / labels;
  manifest["labels"] = fs::relative(labels, out_dir).generic_string();
  manifest["models"] = models;
  write_text(out_dir / "selected_manifest.json", manifest.dump(2));

  ordered_json cfg{{"command", "select-models"}, {"manifest", o.manifest}, {"k", o.k}};
  cfg["max"] = o.max_models ? ordered_json(*o.max_models) : ordered_json(nullptr);
  cfg["threshold"] = o.threshold ? ordered_json(*o.threshold) : ordered_json(nullptr);
  write_text(out_dir / "effective_config.json", cfg.dump(2));

  for (const auto& m : doc["models"]) {
    out << m["rank"].get<std::size_t>() << ' ' << m["model_id"].get<std::string>() << " psi=" << m["psi"].get<double>()
        << " omega=" << m["omega"].get<double>() << (m["selected"].get<bool>() ? " selected" : "") << '\n';
  }
  return 0;
}

struct TrainOptions {
  std::string manifest;
  std::string config;
  std::vector<std::string> sets;
  std::string out;
};

int cmd_train(const TrainOptions& o, TrainConfig flags, const CLI::App& sub, std::ostream& out) {
  TrainConfig config;
  if (!o.config.empty()) config = load_train_config(o.config);

  // Explicit flags override the config file; --set overrides both.
  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  if (given("--epochs")) config.epochs = flags.epochs;
  if (given("--batch-size")) config.batch_size = flags.batch_size;
  if (given("--lr")) config.base_lr = flags.base_lr;
  if (given("--wd")) config.weight_decay = flags.weight_decay;
  if (given("--warmup")) config.warmup_epochs = flags.warmup_epochs;
  if (given("--alpha")) config.alpha = flags.alpha;
  if (given("--beta")) config.beta = flags.beta;
  if (given("--D")) config.d_out = flags.d_out;
  if (given("--D-hidden")) config.d_hidden = flags.d_hidden;
  if (given("--k")) config.k = flags.k;
  if (given("--seed")) config.seed = flags.seed;
  if (given("--split-seed")) config.split_seed = flags.split_seed;
  if (given("--train-fraction")) config.train_fraction = flags.train_fraction;
  if (given("--weights")) config.weights = flags.weights;
  if (given("--no-intra")) config.use_intra = false;
  if (given("--no-inter")) config.use_inter = false;
  if (given("--inter")) config.inter = flags.inter;
  if (given("--checkpoint-policy")) config.checkpoint = flags.checkpoint;
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  config.validate();

  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "effective_config.json", config_to_json(config));

  const DatasetBundle bundle = split_dataset(load_dataset(o.manifest), config.train_fraction, config.split_seed);
  const auto omega = resolve_weights(bundle, config);
  TrainResult result = train(bundle, config, omega);

  std::ostringstream log;
  log << training_log_header() << '\n';
  for (const auto& rec : result.history) log << rec.log_line() << '\n';
  write_text(fs::path(o.out) / "train_log.txt", log.str());

  const Checkpoint ckpt = make_checkpoint(bundle, config, omega, std::move(result.params));
  write_checkpoint(ckpt, fs::path(o.out) / "checkpoint.ptmc");

  if (!result.history.empty()) {
    const auto& last = result.history.back();
    out << "epochs=" << last.epoch << " total=" << last.loss.total << " test_plcc=" << last.test_plcc
        << " test_srcc=" << last.test_srcc << '\n';
  }
  out << (fs::path(o.out) / "checkpoint.ptmc").string() << '\n';
  return 0;
}

struct EvalOptions {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string aggregate = "score";
  std::string out;
};

void emit_report(const EvalReport& report, const EvalOptions& o, const char* command, std::ostream& out) {
  out << EvalReport::csv_header() << '\n' << report.csv_row() << '\n';
  if (o.out.empty()) return;
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "report.json", report.to_json());
  write_text(fs::path(o.out) / "report.csv", EvalReport::csv_header() + "\n" + report.csv_row());
  ordered_json cfg{{"command", command},   {"checkpoint", o.checkpoint}, {"manifest", o.manifest},
                   {"split", o.split},     {"aggregate", o.aggregate}};
  write_text(fs::path(o.out) / "effective_config.json", cfg.dump(2));
}

int cmd_evaluate(const EvalOptions& o, std::ostream& out) {
  SplitFilter filter;
  if (o.split == "test") filter = SplitFilter::kTest;
  else if (o.split == "train") filter = SplitFilter::kTrain;
  else if (o.split == "all") filter = SplitFilter::kAll;
  else throw UsageError("--split must be test, train or all");
  const auto mode = parse_aggregation(o.aggregate);
  const Checkpoint ckpt = read_checkpoint(o.checkpoint);
  emit_report(evaluate(ckpt, load_dataset(o.manifest), filter, mode), o, "evaluate", out);
  return 0;
}

int cmd_cross_evaluate(const EvalOptions& o, std::ostream& out) {
  const auto mode = parse_aggregation(o.aggregate);
  const Checkpoint ckpt = read_checkpoint(o.checkpoint);
  emit_report(cross_evaluate(ckpt, o.manifest, mode), o, "cross-evaluate", out);
  return 0;
}

int cmd_predict(const EvalOptions& o, std::ostream& out) {
  const auto mode = parse_aggregation(o.aggregate);
  const Checkpoint ckpt = read_checkpoint(o.checkpoint);
  const auto preds = predict_all(ckpt, load_dataset(o.manifest), mode);
  std::ostringstream csv;
  csv << "video_id,score\n";
  csv.precision(9);
  for (const auto& [vid, score] : preds) csv << vid << ',' << score << '\n';
  if (o.out.empty()) {
    out << csv.str();
  } else {
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "predictions.csv", csv.str());
    out << (fs::path(o.out) / "predictions.csv").string() << '\n';
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quality prediction from frozen pretrained-model features", "ptmvqa"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic feature dataset with a known quality signal");
  gen_cmd->add_option("--videos", gen.videos, "Number of videos")->capture_default_str();
  gen_cmd->add_option("--models", gen.models, "Number of models")->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "Feature dim of every model")->capture_default_str();
  gen_cmd->add_option("--views", gen.views, "Views per video")->capture_default_str();
  gen_cmd->add_option("--signal", gen.signal, "Signal strength per model (default: model 0 = 1, others 0)");
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise sigma")->capture_default_str();
  gen_cmd->add_option("--outliers", gen.outliers, "Fraction of cross-cluster outlier videos")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--direction-seed", gen.direction_seed, "Seed of the per-model signal directions")
      ->capture_default_str();
  gen_cmd->add_option("--name", gen.name, "Dataset name")->capture_default_str();
  gen_cmd->add_option("-o,--out", gen.out, "Output directory")->required();

  SelectOptions sel;
  auto* sel_cmd = app.add_subcommand("select-models", "Rank models by Davies-Bouldin index over MOS clusters");
  sel_cmd->add_option("--manifest", sel.manifest, "Dataset manifest")->required();
  sel_cmd->add_option("--k", sel.k, "Number of MOS clusters (2, 4 or 6)")->capture_default_str();
  sel_cmd->add_option("--max", sel.max_models, "Keep the N lowest-DBI models");
  sel_cmd->add_option("--threshold", sel.threshold, "Keep models with DBI <= threshold");
  sel_cmd->add_option("-o,--out", sel.out, "Output directory")->capture_default_str();

  TrainOptions tr;
  TrainConfig flags;
  std::string weights = "dbi", inter = "centroid", policy = "last";
  auto* train_cmd = app.add_subcommand("train", "Train transform and regression heads");
  train_cmd->add_option("--manifest", tr.manifest, "Dataset manifest")->required();
  train_cmd->add_option("--config", tr.config, "JSON training config");
  train_cmd->add_option("--set", tr.sets, "Override a config key (key=value), repeatable");
  train_cmd->add_option("-o,--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--epochs", flags.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", flags.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr", flags.base_lr, "Base learning rate")->capture_default_str();
  train_cmd->add_option("--wd", flags.weight_decay, "AdamW weight decay")->capture_default_str();
  train_cmd->add_option("--warmup", flags.warmup_epochs, "Warmup epochs")->capture_default_str();
  train_cmd->add_option("--alpha", flags.alpha, "Inter-divisibility margin")->capture_default_str();
  train_cmd->add_option("--beta", flags.beta, "Metric loss coefficient")->capture_default_str();
  train_cmd->add_option("--D", flags.d_out, "Transformed feature dim")->capture_default_str();
  train_cmd->add_option("--D-hidden", flags.d_hidden, "Hidden width of the transform heads")->capture_default_str();
  train_cmd->add_option("--k", flags.k, "Number of MOS clusters (2, 4 or 6)")->capture_default_str();
  train_cmd->add_option("--seed", flags.seed, "Training seed")->capture_default_str();
  train_cmd->add_option("--split-seed", flags.split_seed, "Train/test split seed")->capture_default_str();
  train_cmd->add_option("--train-fraction", flags.train_fraction, "Training fraction")->capture_default_str();
  train_cmd->add_option("--weights", weights, "Aggregation weights: dbi or uniform")
      ->check(CLI::IsMember({"dbi", "uniform"}))
      ->capture_default_str();
  train_cmd->add_flag("--no-intra", "Drop the intra-consistency term");
  train_cmd->add_flag("--no-inter", "Drop the inter-divisibility term");
  train_cmd->add_option("--inter", inter, "Inter term: centroid or sample-triplet")
      ->check(CLI::IsMember({"centroid", "sample-triplet"}))
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-policy", policy, "Checkpoint kept: last or best-srcc")
      ->check(CLI::IsMember({"last", "best-srcc"}))
      ->capture_default_str();

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "PLCC/SRCC of a checkpoint on a dataset split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--split", ev.split, "test, train or all")->capture_default_str();
  eval_cmd->add_option("--aggregate", ev.aggregate, "View averaging: score or feature")->capture_default_str();
  eval_cmd->add_option("-o,--out", ev.out, "Output directory for report.json / report.csv");

  EvalOptions pr;
  auto* pred_cmd = app.add_subcommand("predict", "Per-video scores for every video in a dataset");
  pred_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  pred_cmd->add_option("--manifest", pr.manifest, "Dataset manifest")->required();
  pred_cmd->add_option("--aggregate", pr.aggregate, "View averaging: score or feature")->capture_default_str();
  pred_cmd->add_option("-o,--out", pr.out, "Output directory for predictions.csv");

  EvalOptions cx;
  auto* cross_cmd = app.add_subcommand("cross-evaluate", "Evaluate a checkpoint on an entire foreign dataset");
  cross_cmd->add_option("--checkpoint", cx.checkpoint, "Checkpoint file")->required();
  cross_cmd->add_option("--manifest", cx.manifest, "Foreign dataset manifest")->required();
  cross_cmd->add_option("--aggregate", cx.aggregate, "View averaging: score or feature")->capture_default_str();
  cross_cmd->add_option("-o,--out", cx.out, "Output directory for report.json / report.csv");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  if (!argv.empty()) argv.pop_back();  // program name
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    if (*gen_cmd) return cmd_gen_synthetic(gen, out);
    if (*sel_cmd) return cmd_select_models(sel, out);
    if (*train_cmd) {
      flags.weights = weights == "dbi" ? WeightMode::kDbi : WeightMode::kUniform;
      flags.inter = inter == "centroid" ? InterMode::kCentroid : InterMode::kSampleTriplet;
      flags.checkpoint = policy == "last" ? CheckpointPolicy::kLast : CheckpointPolicy::kBestSrcc;
      return cmd_train(tr, flags, *train_cmd, out);
    }
    if (*eval_cmd) return cmd_evaluate(ev, out);
    if (*pred_cmd) return cmd_predict(pr, out);
    if (*cross_cmd) return cmd_cross_evaluate(cx, out);
  } catch (const UsageError& e) {
    err << "ptmvqa: usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "ptmvqa: error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace ptmvqa
