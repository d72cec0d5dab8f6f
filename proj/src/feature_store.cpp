#include "ptmvqa/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "ptmvqa/errors.hpp"

namespace ptmvqa {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'M', 'F'};
constexpr std::uint16_t kVersion = 1;

bool all_finite(const std::vector<float>& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

std::string describe(const ViewKey& key) {
  return "(" + key.video_id + ", view " + std::to_string(key.view_index) + ")";
}

}  // namespace

namespace detail {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

}  // namespace detail

void FeatureTable::add(const std::string& video_id, std::uint32_t view_index, std::vector<float> values) {
  ViewKey key{video_id, view_index};
  if (values.size() != dim) {
    throw ValidationError(model_id + ": vector for " + describe(key) + " has length " +
                          std::to_string(values.size()) + ", expected " + std::to_string(dim));
  }
  if (!all_finite(values)) throw ValidationError(model_id + ": non-finite value in " + describe(key));
  auto [it, inserted] = entries.emplace(std::move(key), std::move(values));
  if (!inserted) throw ValidationError(model_id + ": duplicate entry " + describe(it->first));
}

void FeatureTable::validate() const {
  if (dim == 0) throw ValidationError(model_id + ": dim must be positive");
  for (const auto& [key, values] : entries) {
    if (values.size() != dim) {
      throw ValidationError(model_id + ": vector for " + describe(key) + " has length " +
                            std::to_string(values.size()) + ", expected " + std::to_string(dim));
    }
    if (!all_finite(values)) throw ValidationError(model_id + ": non-finite value in " + describe(key));
  }
}

std::vector<std::string> FeatureTable::video_ids() const {
  std::vector<std::string> ids;
  for (const auto& [key, _] : entries) {
    if (ids.empty() || ids.back() != key.video_id) ids.push_back(key.video_id);
  }
  return ids;
}

std::vector<std::uint32_t> FeatureTable::views_of(const std::string& video_id) const {
  std::vector<std::uint32_t> views;
  for (auto it = entries.lower_bound(ViewKey{video_id, 0}); it != entries.end() && it->first.video_id == video_id;
       ++it) {
    views.push_back(it->first.view_index);
  }
  return views;
}

bool FeatureTable::has_video(const std::string& video_id) const {
  auto it = entries.lower_bound(ViewKey{video_id, 0});
  return it != entries.end() && it->first.video_id == video_id;
}

Eigen::VectorXd FeatureTable::view_vector(const std::string& video_id, std::uint32_t view_index) const {
  auto it = entries.find(ViewKey{video_id, view_index});
  if (it == entries.end()) {
    throw ValidationError(model_id + ": missing " + describe(ViewKey{video_id, view_index}));
  }
  Eigen::VectorXd out(dim);
  for (std::uint32_t i = 0; i < dim; ++i) out[i] = it->second[i];
  return out;
}

Eigen::VectorXd FeatureTable::mean_vector(const std::string& video_id) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  std::size_t count = 0;
  for (auto it = entries.lower_bound(ViewKey{video_id, 0}); it != entries.end() && it->first.video_id == video_id;
       ++it) {
    for (std::uint32_t i = 0; i < dim; ++i) sum[i] += it->second[i];
    ++count;
  }
  if (count == 0) throw ValidationError(model_id + ": no features for video " + video_id);
  return sum / static_cast<double>(count);
}

void write_feature_file(const FeatureTable& table, const std::filesystem::path& path) {
  table.validate();

  std::uint64_t offset = 4 + 2 + 4 + 8 + 2 + table.model_id.size();
  for (const auto& [key, _] : table.entries) offset += 2 + key.video_id.size() + 4 + 8;
  const std::uint64_t stride = std::uint64_t{table.dim} * 4;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  out.write(kMagic, 4);
  detail::put_le(out, kVersion);
  detail::put_le(out, table.dim);
  detail::put_le(out, static_cast<std::uint64_t>(table.entries.size()));
  detail::put_str16(out, table.model_id);
  for (const auto& [key, _] : table.entries) {
    detail::put_str16(out, key.video_id);
    detail::put_le(out, key.view_index);
    detail::put_le(out, offset);
    offset += stride;
  }
  for (const auto& [_, values] : table.entries) {
    for (float v : values) detail::put_f32(out, v);
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureTable read_feature_file(const std::filesystem::path& path) {
  const std::string bytes = detail::slurp(path.string());
  detail::Reader in(bytes, path.string());

  if (bytes.size() >= 4 && bytes.compare(0, 4, kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::kBadMagic, path.string() + ": bad magic");
  }
  in.raw(4, "magic");
  const auto version = in.le<std::uint16_t>("version");
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::kBadVersion,
                      path.string() + ": unsupported version " + std::to_string(version));
  }

  FeatureTable table;
  table.dim = in.le<std::uint32_t>("dim");
  const auto count = in.le<std::uint64_t>("entry count");
  table.model_id = in.str16("model_id");
  if (table.dim == 0) throw ValidationError(path.string() + ": dim must be positive");

  // Smallest possible index record is 14 bytes; reject absurd counts before allocating.
  if (count > in.remaining() / 14) {
    throw FormatError(FormatError::Kind::kTruncated, path.string() + ": truncated index for declared count " +
                                                         std::to_string(count));
  }

  struct IndexRecord {
    ViewKey key;
    std::uint64_t offset;
  };
  std::vector<IndexRecord> index;
  index.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    IndexRecord rec;
    rec.key.video_id = in.str16("index video_id");
    rec.key.view_index = in.le<std::uint32_t>("index view_index");
    rec.offset = in.le<std::uint64_t>("index offset");
    index.push_back(std::move(rec));
  }

  const std::uint64_t stride = std::uint64_t{table.dim} * 4;
  const std::uint64_t payload_start = in.pos();
  const std::uint64_t expected = stride * count;
  if (in.remaining() < expected) {
    throw FormatError(FormatError::Kind::kTruncated,
                      path.string() + ": truncated payload (" + std::to_string(in.remaining()) + " of " +
                          std::to_string(expected) + " bytes)");
  }
  if (in.remaining() > expected) {
    throw FormatError(FormatError::Kind::kCountMismatch,
                      path.string() + ": declared count mismatch (" + std::to_string(in.remaining() - expected) +
                          " unaccounted payload bytes)");
  }

  for (std::uint64_t i = 0; i < count; ++i) {
    if (index[i].offset != payload_start + i * stride) {
      throw FormatError(FormatError::Kind::kBadIndex,
                        path.string() + ": payload offset of entry " + std::to_string(i) + " is inconsistent");
    }
    std::vector<float> values(table.dim);
    for (auto& v : values) v = in.f32("payload");
    table.add(index[i].key.video_id, index[i].key.view_index, std::move(values));
  }
  return table;
}

void MosLabels::validate() const {
  if (mos.empty()) throw ValidationError("labels are empty");
  for (const auto& [vid, y] : mos) {
    if (!(y >= 1.0 && y <= 5.0)) {
      throw ValidationError("MOS for " + vid + " is " + std::to_string(y) + ", outside [1, 5]");
    }
  }
}

MosLabels read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels " + path.string());
  MosLabels labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected video_id,mos");
    }
    const std::string vid = line.substr(0, comma);
    const std::string field = line.substr(comma + 1);
    double y = 0.0;
    std::size_t used = 0;
    try {
      y = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != field.size()) {
      if (lineno == 1) continue;  // header
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": bad MOS value '" + field + "'");
    }
    if (!labels.mos.emplace(vid, y).second) {
      throw ValidationError(path.string() + ": duplicate label for " + vid);
    }
  }
  labels.validate();
  return labels;
}

void write_labels(const MosLabels& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "video_id,mos\n";
  out.precision(17);
  for (const auto& [vid, y] : labels.mos) out << vid << ',' << y << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> DatasetBundle::video_ids() const {
  std::vector<std::string> ids;
  ids.reserve(labels.mos.size());
  for (const auto& [vid, _] : labels.mos) ids.push_back(vid);
  return ids;
}

std::vector<std::string> DatasetBundle::ids_in(Split which) const {
  std::vector<std::string> ids;
  for (const auto& [vid, s] : split) {
    if (s == which) ids.push_back(vid);
  }
  return ids;
}

std::optional<std::size_t> DatasetBundle::find_table(const std::string& model_id) const {
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (tables[i].model_id == model_id) return i;
  }
  return std::nullopt;
}

void DatasetBundle::validate() const {
  if (tables.empty()) throw ValidationError("dataset has no feature tables");
  labels.validate();
  const auto label_ids = video_ids();

  for (const auto& table : tables) {
    table.validate();
    const auto ids = table.video_ids();
    std::vector<std::string> missing, extra;
    std::set_difference(label_ids.begin(), label_ids.end(), ids.begin(), ids.end(), std::back_inserter(missing));
    std::set_difference(ids.begin(), ids.end(), label_ids.begin(), label_ids.end(), std::back_inserter(extra));
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size() && i < 20; ++i) s += (i ? ", " : "") + v[i];
      if (v.size() > 20) s += ", ...";
      return s;
    };
    if (!missing.empty()) {
      throw ValidationError("alignment: model " + table.model_id + " lacks videos: " + join(missing));
    }
    if (!extra.empty()) {
      throw ValidationError("alignment: model " + table.model_id + " has unlabeled videos: " + join(extra));
    }
  }
  for (const auto& vid : label_ids) {
    const auto views = tables.front().views_of(vid);
    for (std::size_t t = 1; t < tables.size(); ++t) {
      if (tables[t].views_of(vid) != views) {
        throw ValidationError("alignment: view sets differ for video " + vid + " between models " +
                              tables.front().model_id + " and " + tables[t].model_id);
      }
    }
  }
  for (std::size_t i = 0; i < tables.size(); ++i) {
    for (std::size_t j = i + 1; j < tables.size(); ++j) {
      if (tables[i].model_id == tables[j].model_id) {
        throw ValidationError("duplicate model_id " + tables[i].model_id);
      }
    }
  }
}

}  // namespace ptmvqa
