#include <cmath>
#include <fstream>

#include "json.hpp"
#include "ptmvqa/errors.hpp"
#include "ptmvqa/feature_store.hpp"
#include "ptmvqa/rng.hpp"

namespace ptmvqa {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetBundle load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(manifest_path.string() + ": invalid JSON: " + e.what());
  }

  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };

  DatasetBundle bundle;
  try {
    bundle.name = doc.value("name", manifest_path.stem().string());
    if (!doc.contains("labels")) throw ValidationError(manifest_path.string() + ": missing 'labels'");
    if (!doc.contains("models") || !doc["models"].is_array() || doc["models"].empty()) {
      throw ValidationError(manifest_path.string() + ": 'models' must list at least one feature file");
    }
    bundle.labels = read_labels(resolve(doc["labels"].get<std::string>()));
    for (const auto& entry : doc["models"]) {
      const auto model_id = entry.at("model_id").get<std::string>();
      FeatureTable table = read_feature_file(resolve(entry.at("path").get<std::string>()));
      if (table.model_id != model_id) {
        throw ValidationError("manifest lists model " + model_id + " but its file declares " + table.model_id);
      }
      bundle.tables.push_back(std::move(table));
      if (entry.contains("dbi") && !entry["dbi"].is_null()) {
        bundle.dbi.emplace_back(entry["dbi"].get<double>());
      } else {
        bundle.dbi.emplace_back(std::nullopt);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }
  bundle.validate();
  return bundle;
}

fs::path save_dataset(const DatasetBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  json doc;
  doc["name"] = bundle.name;
  doc["labels"] = "labels.csv";
  doc["models"] = json::array();
  write_labels(bundle.labels, dir / "labels.csv");
  for (std::size_t i = 0; i < bundle.tables.size(); ++i) {
    const auto& table = bundle.tables[i];
    const std::string file = table.model_id + ".ptmf";
    write_feature_file(table, dir / file);
    json entry{{"model_id", table.model_id}, {"path", file}};
    if (i < bundle.dbi.size() && bundle.dbi[i]) entry["dbi"] = *bundle.dbi[i];
    doc["models"].push_back(entry);
  }
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + manifest.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + manifest.string());
  return manifest;
}

DatasetBundle split_dataset(const DatasetBundle& bundle, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie in (0, 1), got " + std::to_string(train_fraction));
  }
  auto ids = bundle.video_ids();
  if (ids.size() < 2) throw ValidationError("need at least 2 videos to split");

  Rng rng(seed);
  rng.shuffle(ids.begin(), ids.end());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));

  DatasetBundle out = bundle;
  out.split.clear();
  for (std::size_t i = 0; i < ids.size(); ++i) out.split[ids[i]] = i < n_train ? Split::kTrain : Split::kTest;
  return out;
}

}  // namespace ptmvqa
