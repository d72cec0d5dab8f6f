#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ptmvqa/errors.hpp"
#include "ptmvqa/evaluator.hpp"
#include "ptmvqa/feature_store.hpp"
#include "ptmvqa/rng.hpp"

namespace fs = std::filesystem;
using namespace ptmvqa;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("ptmvqa_fs_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

FeatureTable random_table(Rng& rng, const std::string& model_id, std::uint32_t dim, std::size_t videos,
                          std::uint32_t views) {
  FeatureTable t;
  t.model_id = model_id;
  t.dim = dim;
  for (std::size_t v = 0; v < videos; ++v) {
    for (std::uint32_t k = 0; k < views; ++k) {
      std::vector<float> x(dim);
      for (auto& e : x) e = static_cast<float>(rng.normal() * 10.0);
      t.add("vid_" + std::to_string(v), k, std::move(x));
    }
  }
  return t;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

FormatError::Kind read_error_kind(const fs::path& p) {
  try {
    read_feature_file(p);
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a FormatError";
  return FormatError::Kind::kBadIndex;
}

}  // namespace

TEST(FeatureFile, SingleEntryRoundTripAndSize) {
  TempDir dir;
  FeatureTable t;
  t.model_id = "m";
  t.dim = 2;
  t.add("v1", 0, {0.0f, 1.0f});
  const auto path = dir.path() / "one.ptmf";
  write_feature_file(t, path);
  // header 4+2+4+8+(2+1) | index (2+2)+4+8 | payload 2*4
  EXPECT_EQ(fs::file_size(path), 21u + 16u + 8u);
  EXPECT_EQ(read_feature_file(path), t);
}

TEST(FeatureFile, RejectsWrongLengthBeforeWriting) {
  TempDir dir;
  FeatureTable t;
  t.model_id = "m";
  t.dim = 3;
  t.entries[{"v1", 0}] = {1.0f, 2.0f};
  EXPECT_THROW(write_feature_file(t, dir.path() / "bad.ptmf"), ValidationError);
  EXPECT_THROW(t.add("v2", 0, {1.0f}), ValidationError);
}

TEST(FeatureFile, RejectsNonFiniteBeforeWriting) {
  TempDir dir;
  FeatureTable t;
  t.model_id = "m";
  t.dim = 2;
  t.entries[{"v1", 0}] = {1.0f, std::nanf("")};
  const auto path = dir.path() / "nan.ptmf";
  EXPECT_THROW(write_feature_file(t, path), ValidationError);
  EXPECT_FALSE(fs::exists(path));
}

TEST(FeatureFile, DuplicateKeyRejected) {
  FeatureTable t;
  t.model_id = "m";
  t.dim = 1;
  t.add("v", 0, {1.0f});
  EXPECT_THROW(t.add("v", 0, {2.0f}), ValidationError);
}

TEST(FeatureFile, ByteLevelLayoutThreeVideosTwoViews) {
  TempDir dir;
  Rng rng(5);
  const auto t = random_table(rng, "convnext", 128, 3, 2);
  const auto path = dir.path() / "t.ptmf";
  write_feature_file(t, path);
  const std::string bytes = read_bytes(path);

  ASSERT_EQ(bytes.substr(0, 4), "PTMF");
  auto u16 = [&](std::size_t at) { return std::uint16_t(std::uint8_t(bytes[at]) | std::uint8_t(bytes[at + 1]) << 8); };
  auto u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | std::uint8_t(bytes[at + i]);
    return v;
  };
  auto u64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | std::uint8_t(bytes[at + i]);
    return v;
  };
  EXPECT_EQ(u16(4), 1);
  EXPECT_EQ(u32(6), 128u);
  EXPECT_EQ(u64(10), 6u);
  EXPECT_EQ(u16(18), 8);
  EXPECT_EQ(bytes.substr(20, 8), "convnext");

  std::size_t pos = 28;
  const std::size_t index_bytes = 6 * (2 + 5 + 4 + 8);
  const std::size_t payload_start = pos + index_bytes;
  EXPECT_EQ(bytes.size(), payload_start + 6 * 128 * 4);
  std::size_t i = 0;
  for (const auto& [key, values] : t.entries) {
    ASSERT_EQ(u16(pos), key.video_id.size());
    EXPECT_EQ(bytes.substr(pos + 2, key.video_id.size()), key.video_id);
    pos += 2 + key.video_id.size();
    EXPECT_EQ(u32(pos), key.view_index);
    const auto offset = u64(pos + 4);
    EXPECT_EQ(offset, payload_start + i * 128 * 4);
    pos += 12;
    for (std::size_t d = 0; d < 128; ++d) {
      const std::uint32_t raw = u32(offset + 4 * d);
      float v;
      std::memcpy(&v, &raw, 4);
      ASSERT_EQ(v, values[d]);
    }
    ++i;
  }

  const auto back = read_feature_file(path);
  EXPECT_EQ(back.entries.size(), 6u);
  for (const auto& [_, v] : back.entries) EXPECT_EQ(v.size(), 128u);
}

TEST(FeatureFile, RoundTripProperty) {
  TempDir dir;
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const auto dim = static_cast<std::uint32_t>(1 + rng.index(40));
    const auto t = random_table(rng, "model" + std::to_string(trial), dim, 1 + rng.index(12),
                                static_cast<std::uint32_t>(1 + rng.index(4)));
    const auto path = dir.path() / "rt.ptmf";
    write_feature_file(t, path);
    ASSERT_EQ(read_feature_file(path), t) << "trial " << trial;
  }
}

TEST(FeatureFile, DistinctCorruptionErrors) {
  TempDir dir;
  Rng rng(3);
  const auto path = dir.path() / "c.ptmf";
  write_feature_file(random_table(rng, "m", 4, 3, 1), path);
  const std::string good = read_bytes(path);

  std::string bad = good;
  bad[0] = 'X';
  write_bytes(path, bad);
  EXPECT_EQ(read_error_kind(path), FormatError::Kind::kBadMagic);
  try {
    read_feature_file(path);
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }

  bad = good;
  bad[4] = 2;
  write_bytes(path, bad);
  EXPECT_EQ(read_error_kind(path), FormatError::Kind::kBadVersion);

  write_bytes(path, good.substr(0, good.size() - 5));
  EXPECT_EQ(read_error_kind(path), FormatError::Kind::kTruncated);
  try {
    read_feature_file(path);
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos);
  }

  write_bytes(path, good + std::string(16, '\0'));
  EXPECT_EQ(read_error_kind(path), FormatError::Kind::kCountMismatch);
}

TEST(FeatureFile, MissingFileIsIoError) { EXPECT_THROW(read_feature_file("/nonexistent/x.ptmf"), IoError); }

namespace {

// Two models, ten videos v0..v9, one view each.
fs::path write_fixture(const fs::path& dir, bool drop_v7_from_b = false, double label_v3 = 3.0) {
  Rng rng(1);
  for (const char* model : {"A", "B"}) {
    FeatureTable t;
    t.model_id = model;
    t.dim = 3;
    for (int v = 0; v < 10; ++v) {
      if (drop_v7_from_b && v == 7 && std::string(model) == "B") continue;
      t.add("v" + std::to_string(v), 0, {float(rng.normal()), float(rng.normal()), float(rng.normal())});
    }
    write_feature_file(t, dir / (std::string(model) + ".ptmf"));
  }
  std::ofstream labels(dir / "labels.csv");
  labels << "video_id,mos\n";
  for (int v = 0; v < 10; ++v) labels << "v" << v << ',' << (v == 3 ? label_v3 : 1.0 + 0.4 * v) << '\n';
  labels.close();
  std::ofstream m(dir / "manifest.json");
  m << R"({"name": "fixture", "labels": "labels.csv", "models": [)"
    << R"({"model_id": "A", "path": "A.ptmf", "dbi": 0.5}, {"model_id": "B", "path": "B.ptmf"}]})";
  return dir / "manifest.json";
}

}  // namespace

TEST(LoadDataset, TwoModelsTenVideos) {
  TempDir dir;
  const auto bundle = load_dataset(write_fixture(dir.path()));
  EXPECT_EQ(bundle.name, "fixture");
  ASSERT_EQ(bundle.tables.size(), 2u);
  EXPECT_EQ(bundle.labels.mos.size(), 10u);
  EXPECT_EQ(bundle.tables[0].video_ids().size(), 10u);
  EXPECT_EQ(bundle.tables[1].video_ids().size(), 10u);
  ASSERT_EQ(bundle.dbi.size(), 2u);
  EXPECT_EQ(bundle.dbi[0], 0.5);
  EXPECT_FALSE(bundle.dbi[1].has_value());
}

TEST(LoadDataset, AlignmentErrorNamesMissingVideo) {
  TempDir dir;
  try {
    load_dataset(write_fixture(dir.path(), /*drop_v7_from_b=*/true));
    FAIL() << "expected alignment error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("v7"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, LabelOutOfRange) {
  TempDir dir;
  EXPECT_THROW(load_dataset(write_fixture(dir.path(), false, 5.3)), ValidationError);
}

TEST(Labels, HeaderOptional) {
  TempDir dir;
  {
    std::ofstream f(dir.path() / "l.csv");
    f << "a,1.5\nb,4.25\n";
  }
  const auto labels = read_labels(dir.path() / "l.csv");
  EXPECT_EQ(labels.mos.at("a"), 1.5);
  EXPECT_EQ(labels.mos.at("b"), 4.25);
}

TEST(LoadDataset, SaveLoadRoundTrip) {
  TempDir dir;
  SyntheticSpec spec;
  spec.n_videos = 12;
  spec.views_per_video = 2;
  auto bundle = gen_synthetic(spec);
  bundle.dbi = {1.25, std::nullopt};
  const auto manifest = save_dataset(bundle, dir.path() / "ds");
  const auto back = load_dataset(manifest);
  EXPECT_EQ(back.name, bundle.name);
  EXPECT_EQ(back.labels, bundle.labels);
  ASSERT_EQ(back.tables.size(), bundle.tables.size());
  for (std::size_t i = 0; i < back.tables.size(); ++i) EXPECT_EQ(back.tables[i], bundle.tables[i]);
  EXPECT_EQ(back.dbi, bundle.dbi);
}

namespace {

DatasetBundle labels_only(std::size_t n) {
  DatasetBundle b;
  FeatureTable t;
  t.model_id = "m";
  t.dim = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string vid = "v" + std::to_string(i);
    b.labels.mos[vid] = 1.0 + 4.0 * static_cast<double>(i) / static_cast<double>(n);
    t.add(vid, 0, {float(i)});
  }
  b.tables.push_back(t);
  return b;
}

}  // namespace

TEST(Split, CountsAndDeterminism) {
  const auto bundle = labels_only(10);
  const auto a = split_dataset(bundle, 0.8, 7);
  const auto b = split_dataset(bundle, 0.8, 7);
  EXPECT_EQ(a.ids_in(Split::kTrain).size(), 8u);
  EXPECT_EQ(a.ids_in(Split::kTest).size(), 2u);
  EXPECT_EQ(a.split, b.split);
  EXPECT_EQ(a.split.size(), 10u);  // train and test cover everything, disjointly by construction of the map
  EXPECT_NE(split_dataset(bundle, 0.8, 8).split, a.split);
}

TEST(Split, FractionOutOfRange) {
  const auto bundle = labels_only(10);
  EXPECT_THROW(split_dataset(bundle, 1.0, 0), ValidationError);
  EXPECT_THROW(split_dataset(bundle, 0.0, 0), ValidationError);
  EXPECT_THROW(split_dataset(labels_only(1), 0.5, 0), ValidationError);
}

TEST(Split, KonvidScale) {
  const auto s = split_dataset(labels_only(1200), 0.8, 3);
  EXPECT_EQ(s.ids_in(Split::kTrain).size(), 960u);
  EXPECT_EQ(s.ids_in(Split::kTest).size(), 240u);
}

TEST(Synthetic, SignalModelCorrelatesWithMos) {
  SyntheticSpec spec;
  spec.noise_sigma = 0.01;
  spec.signal_strength = {1.0, 0.0};
  const auto bundle = gen_synthetic(spec);
  std::vector<double> proj0, proj1, mos;
  const auto u0 = synthetic_direction(spec, 0);
  const auto u1 = synthetic_direction(spec, 1);
  for (const auto& [vid, y] : bundle.labels.mos) {
    proj0.push_back(bundle.tables[0].mean_vector(vid).dot(u0));
    proj1.push_back(bundle.tables[1].mean_vector(vid).dot(u1));
    mos.push_back(y);
  }
  EXPECT_GT(plcc(proj0, mos), 0.99);
  EXPECT_LT(std::abs(plcc(proj1, mos)), 0.3);
}

TEST(Synthetic, Deterministic) {
  SyntheticSpec spec;
  spec.views_per_video = 3;
  spec.outlier_fraction = 0.1;
  const auto a = gen_synthetic(spec);
  const auto b = gen_synthetic(spec);
  EXPECT_EQ(a.labels, b.labels);
  ASSERT_EQ(a.tables.size(), b.tables.size());
  for (std::size_t i = 0; i < a.tables.size(); ++i) EXPECT_EQ(a.tables[i], b.tables[i]);
}

TEST(Synthetic, DegenerateAllZero) {
  SyntheticSpec spec;
  spec.noise_sigma = 0.0;
  spec.signal_strength = {0.0, 0.0};
  spec.views_per_video = 2;
  const auto bundle = gen_synthetic(spec);
  for (const auto& t : bundle.tables) {
    for (const auto& [_, v] : t.entries) {
      for (float x : v) ASSERT_EQ(x, 0.0f);
    }
  }
}

TEST(Synthetic, NoiselessProjectionStrictlyIncreasingInMos) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.noise_sigma = 0.0;
    spec.signal_strength = {0.7, 2.0};
    const auto bundle = gen_synthetic(spec);
    for (std::size_t n = 0; n < 2; ++n) {
      const auto u = synthetic_direction(spec, n);
      std::vector<std::pair<double, double>> pts;
      for (const auto& [vid, y] : bundle.labels.mos) pts.emplace_back(y, bundle.tables[n].mean_vector(vid).dot(u));
      std::sort(pts.begin(), pts.end());
      for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].first > pts[i - 1].first) ASSERT_GT(pts[i].second, pts[i - 1].second) << "seed " << seed;
      }
    }
  }
}

TEST(Synthetic, DirectionsSharedAcrossSeeds) {
  SyntheticSpec a, b;
  b.seed = 99;
  EXPECT_EQ(synthetic_direction(a, 0), synthetic_direction(b, 0));
  EXPECT_NEAR(synthetic_direction(a, 1).norm(), 1.0, 1e-15);
}
