#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ptmvqa/errors.hpp"
#include "ptmvqa/trainer.hpp"

namespace ptmvqa {

using nlohmann::json;

namespace {

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw UsageError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "' has an invalid value: " + v.dump());
  }
}

void set_key(TrainConfig& c, const std::string& key, const json& v) {
  if (key == "epochs") c.epochs = as<std::size_t>(v, key);
  else if (key == "batch_size") c.batch_size = as<std::size_t>(v, key);
  else if (key == "base_lr") c.base_lr = as<double>(v, key);
  else if (key == "weight_decay") c.weight_decay = as<double>(v, key);
  else if (key == "warmup_epochs") c.warmup_epochs = as<std::size_t>(v, key);
  else if (key == "alpha") c.alpha = as<double>(v, key);
  else if (key == "beta") c.beta = as<double>(v, key);
  else if (key == "D") c.d_out = as<std::size_t>(v, key);
  else if (key == "D_hidden") c.d_hidden = as<std::size_t>(v, key);
  else if (key == "k") c.k = as<std::size_t>(v, key);
  else if (key == "seed") c.seed = as<std::uint64_t>(v, key);
  else if (key == "train_fraction") c.train_fraction = as<double>(v, key);
  else if (key == "split_seed") c.split_seed = as<std::uint64_t>(v, key);
  else if (key == "use_intra") c.use_intra = as<bool>(v, key);
  else if (key == "use_inter") c.use_inter = as<bool>(v, key);
  else if (key == "weights") {
    const auto s = as<std::string>(v, key);
    if (s == "dbi") c.weights = WeightMode::kDbi;
    else if (s == "uniform") c.weights = WeightMode::kUniform;
    else throw UsageError("weights must be 'dbi' or 'uniform'");
  } else if (key == "inter") {
    const auto s = as<std::string>(v, key);
    if (s == "centroid") c.inter = InterMode::kCentroid;
    else if (s == "sample-triplet") c.inter = InterMode::kSampleTriplet;
    else throw UsageError("inter must be 'centroid' or 'sample-triplet'");
  } else if (key == "checkpoint") {
    const auto s = as<std::string>(v, key);
    if (s == "last") c.checkpoint = CheckpointPolicy::kLast;
    else if (s == "best-srcc") c.checkpoint = CheckpointPolicy::kBestSrcc;
    else throw UsageError("checkpoint must be 'last' or 'best-srcc'");
  } else {
    throw UsageError("unknown config key '" + key + "'");
  }
}

}  // namespace

void apply_config_json(TrainConfig& config, const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) set_key(config, key, value);
}

void apply_setting(TrainConfig& config, const std::string& key, const std::string& value) {
  json v = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) v = value;
  set_key(config, key, v);
}

std::string config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["base_lr"] = c.base_lr;
  j["weight_decay"] = c.weight_decay;
  j["warmup_epochs"] = c.warmup_epochs;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["D"] = c.d_out;
  j["D_hidden"] = c.d_hidden;
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["train_fraction"] = c.train_fraction;
  j["split_seed"] = c.split_seed;
  j["weights"] = c.weights == WeightMode::kDbi ? "dbi" : "uniform";
  j["use_intra"] = c.use_intra;
  j["use_inter"] = c.use_inter;
  j["inter"] = c.inter == InterMode::kCentroid ? "centroid" : "sample-triplet";
  j["checkpoint"] = c.checkpoint == CheckpointPolicy::kLast ? "last" : "best-srcc";
  return j.dump(2);
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  TrainConfig config;
  apply_config_json(config, ss.str());
  return config;
}

}  // namespace ptmvqa
