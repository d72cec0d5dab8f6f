#include "ptmvqa/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "ptmvqa/errors.hpp"

namespace ptmvqa {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'M', 'C'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

void Checkpoint::validate() const {
  params.validate();
  if (model_ids.size() != params.heads.size() || omega.size() != params.heads.size()) {
    throw ValidationError("checkpoint: model ids, weights and heads disagree in count");
  }
  for (double w : omega) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("checkpoint: weights must be finite and positive");
  }
  clusters.validate();
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ckpt.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  const auto dims = ckpt.params.input_dims();
  out.write(kMagic, 4);
  detail::put_le(out, kVersion);
  detail::put_le(out, static_cast<std::uint32_t>(ckpt.params.d_out));
  detail::put_le(out, static_cast<std::uint32_t>(ckpt.params.d_hidden));
  detail::put_le(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t n = 0; n < dims.size(); ++n) {
    detail::put_str16(out, ckpt.model_ids[n]);
    detail::put_le(out, dims[n]);
    detail::put_f64(out, ckpt.omega[n]);
  }
  detail::put_le(out, static_cast<std::uint32_t>(ckpt.clusters.size()));
  for (const auto& iv : ckpt.clusters.intervals) {
    detail::put_f64(out, iv.lo);
    detail::put_f64(out, iv.hi);
  }
  detail::put_str16(out, ckpt.dataset_name);
  detail::put_f64(out, ckpt.train_fraction);
  detail::put_le(out, ckpt.split_seed);
  for (const auto& t : ckpt.params.tensors()) {
    for (double v : t.values) detail::put_f64(out, v);
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = detail::slurp(path.string());
  detail::Reader in(bytes, path.string());
  if (bytes.size() >= 4 && bytes.compare(0, 4, kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::kBadMagic, path.string() + ": bad magic");
  }
  in.raw(4, "magic");
  const auto version = in.le<std::uint16_t>("version");
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::kBadVersion, path.string() + ": unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  const auto d_out = in.le<std::uint32_t>("D");
  const auto d_hidden = in.le<std::uint32_t>("D_hidden");
  const auto n_models = in.le<std::uint32_t>("model count");
  if (d_out == 0 || d_hidden == 0 || n_models == 0) throw ValidationError(path.string() + ": empty model");
  std::vector<std::uint32_t> dims;
  for (std::uint32_t n = 0; n < n_models; ++n) {
    ckpt.model_ids.push_back(in.str16("model_id"));
    dims.push_back(in.le<std::uint32_t>("model dim"));
    ckpt.omega.push_back(in.f64("omega"));
    if (dims.back() == 0) throw ValidationError(path.string() + ": zero feature dim");
  }
  const auto k = in.le<std::uint32_t>("cluster count");
  if (k > in.remaining() / 16) throw FormatError(FormatError::Kind::kTruncated, path.string() + ": truncated clusters");
  for (std::uint32_t i = 0; i < k; ++i) {
    MosInterval iv;
    iv.lo = in.f64("cluster lo");
    iv.hi = in.f64("cluster hi");
    ckpt.clusters.intervals.push_back(iv);
  }
  ckpt.dataset_name = in.str16("dataset name");
  ckpt.train_fraction = in.f64("train fraction");
  ckpt.split_seed = in.le<std::uint64_t>("split seed");

  // Shapes come from the header; init_heads gives correctly sized tensors to fill.
  std::uint64_t expected = d_out + 1;
  for (auto dim : dims) expected += std::uint64_t{d_hidden} * (dim + 3) + std::uint64_t{d_out} * (d_hidden + 3);
  if (in.remaining() < expected * 8) {
    throw FormatError(FormatError::Kind::kTruncated, path.string() + ": truncated parameter payload");
  }
  if (in.remaining() > expected * 8) {
    throw FormatError(FormatError::Kind::kCountMismatch, path.string() + ": trailing bytes after parameters");
  }
  ckpt.params = init_heads(dims, d_out, d_hidden, 0);
  for (auto& t : ckpt.params.tensors()) {
    for (double& v : t.values) v = in.f64("parameters");
  }
  ckpt.validate();
  return ckpt;
}

}  // namespace ptmvqa
