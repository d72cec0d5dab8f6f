#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ptmvqa/checkpoint.hpp"
#include "ptmvqa/cli.hpp"
#include "ptmvqa/clustering.hpp"
#include "ptmvqa/errors.hpp"
#include "ptmvqa/evaluator.hpp"
#include "ptmvqa/feature_store.hpp"
#include "ptmvqa/trainer.hpp"

namespace py = pybind11;
using namespace ptmvqa;

namespace {

SplitFilter parse_split(const std::string& s) {
  if (s == "all") return SplitFilter::kAll;
  if (s == "train") return SplitFilter::kTrain;
  if (s == "test") return SplitFilter::kTest;
  throw UsageError("split must be 'all', 'train' or 'test'");
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["dataset"] = r.dataset;
  d["split"] = r.split;
  d["n_videos"] = r.n_videos;
  d["views_per_video"] = r.views_per_video;
  d["plcc"] = r.plcc;
  d["srcc"] = r.srcc;
  d["mean"] = r.mean;
  d["in_domain"] = r.in_domain;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ptmvqa, m) {
  m.doc() = "Multi-backbone video quality regression over precomputed features";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

  m.def("plcc", [](const std::vector<double>& p, const std::vector<double>& t) { return plcc(p, t); });
  m.def("srcc", [](const std::vector<double>& p, const std::vector<double>& t) { return srcc(p, t); });

  m.def(
      "gen_synthetic",
      [](const std::filesystem::path& out, std::size_t n_videos, std::vector<std::uint32_t> dims,
         std::vector<double> signal, double noise_sigma, std::uint32_t views, double outliers, std::uint64_t seed,
         const std::string& name) {
        SyntheticSpec spec;
        spec.n_videos = n_videos;
        spec.n_models = dims.size();
        spec.dims = std::move(dims);
        spec.signal_strength = std::move(signal);
        spec.noise_sigma = noise_sigma;
        spec.views_per_video = views;
        spec.outlier_fraction = outliers;
        spec.seed = seed;
        spec.name = name;
        return save_dataset(gen_synthetic(spec), out);
      },
      py::arg("out"), py::arg("n_videos") = 200, py::arg("dims") = std::vector<std::uint32_t>{32, 32},
      py::arg("signal") = std::vector<double>{1.0, 0.0}, py::arg("noise_sigma") = 0.05, py::arg("views") = 1,
      py::arg("outliers") = 0.0, py::arg("seed") = 0, py::arg("name") = "synthetic",
      "Write a synthetic dataset and return its manifest path.");

  m.def(
      "read_features",
      [](const std::filesystem::path& path) {
        const auto t = read_feature_file(path);
        py::dict entries;
        for (const auto& [key, values] : t.entries) entries[py::make_tuple(key.video_id, key.view_index)] = values;
        return py::make_tuple(t.model_id, t.dim, entries);
      },
      py::arg("path"), "Returns (model_id, dim, {(video_id, view): values}).");

  m.def(
      "dbi_report",
      [](const std::filesystem::path& manifest, std::size_t k) {
        const auto bundle = load_dataset(manifest);
        py::list out;
        for (const auto& r : dbi_reports(bundle, ClusterSpec::preset(k))) {
          py::dict d;
          d["model_id"] = r.model_id;
          d["psi"] = r.psi;
          d["omega"] = r.omega;
          d["cluster_sizes"] = r.cluster_sizes;
          out.append(d);
        }
        return out;
      },
      py::arg("manifest"), py::arg("k") = 6);

  m.def(
      "train",
      [](const std::filesystem::path& manifest, const std::filesystem::path& checkpoint,
         const std::map<std::string, std::string>& settings) {
        TrainConfig cfg;
        for (const auto& [k, v] : settings) apply_setting(cfg, k, v);
        cfg.validate();
        py::gil_scoped_release release;
        const auto bundle = split_dataset(load_dataset(manifest), cfg.train_fraction, cfg.split_seed);
        const auto omega = resolve_weights(bundle, cfg);
        auto result = train(bundle, cfg, omega);
        write_checkpoint(make_checkpoint(bundle, cfg, omega, std::move(result.params)), checkpoint);
        std::vector<std::string> log;
        for (const auto& r : result.history) log.push_back(r.log_line());
        return log;
      },
      py::arg("manifest"), py::arg("checkpoint"), py::arg("settings") = std::map<std::string, std::string>{},
      "Train with config overrides (key -> value text); returns the per-epoch log lines.");

  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& manifest, const std::string& split) {
        const auto ckpt = read_checkpoint(checkpoint);
        return report_dict(evaluate(ckpt, load_dataset(manifest), parse_split(split)));
      },
      py::arg("checkpoint"), py::arg("manifest"), py::arg("split") = "test");

  m.def(
      "predict",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& manifest) {
        const auto ckpt = read_checkpoint(checkpoint);
        return predict_all(ckpt, load_dataset(manifest));
      },
      py::arg("checkpoint"), py::arg("manifest"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "ptmvqa");
        std::ostringstream out, err;
        const int code = run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line interface in-process; returns (exit_code, stdout, stderr).");
}
