#include "ptmvqa/model.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "ptmvqa/errors.hpp"
#include "ptmvqa/rng.hpp"

namespace ptmvqa {

namespace {

template <typename Derived>
std::span<double> span_of(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename Derived>
std::span<const double> span_of(const Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

void glorot(Matrix& w, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
}

NormTrace norm_forward(Vector pre, const Vector& gain, const Vector& shift) {
  NormTrace t;
  const double n = static_cast<double>(pre.size());
  const double mean = pre.sum() / n;
  t.xhat = pre.array() - mean;
  const double var = t.xhat.squaredNorm() / n;
  t.rstd = 1.0 / std::sqrt(var + kLayerNormEps);
  t.xhat *= t.rstd;
  t.out = gain.cwiseProduct(t.xhat) + shift;
  t.pre = std::move(pre);
  return t;
}

Vector gelu_vec(const Vector& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

// Backprop through GELU(gain * xhat + shift); returns d(pre) and accumulates
// gain/shift gradients.
Vector norm_gelu_backward(const NormTrace& t, const Vector& d_act, const Vector& gain, Vector& d_gain,
                          Vector& d_shift) {
  const Vector d_out = d_act.cwiseProduct(t.out.unaryExpr([](double v) { return gelu_grad(v); }));
  d_gain += d_out.cwiseProduct(t.xhat);
  d_shift += d_out;
  const Vector d_xhat = d_out.cwiseProduct(gain);
  const double n = static_cast<double>(d_xhat.size());
  const double mean_d = d_xhat.sum() / n;
  const double mean_dx = d_xhat.dot(t.xhat) / n;
  return t.rstd * (d_xhat.array() - mean_d - t.xhat.array() * mean_dx).matrix();
}

}  // namespace

std::vector<std::uint32_t> HeadParams::input_dims() const {
  std::vector<std::uint32_t> dims;
  for (const auto& h : heads) dims.push_back(static_cast<std::uint32_t>(h.w1.cols()));
  return dims;
}

std::vector<ParamTensor> HeadParams::tensors() {
  std::vector<ParamTensor> out;
  for (std::size_t n = 0; n < heads.size(); ++n) {
    auto& h = heads[n];
    const std::string p = "head" + std::to_string(n) + ".";
    out.push_back({p + "w1", span_of(h.w1), true});
    out.push_back({p + "b1", span_of(h.b1), false});
    out.push_back({p + "gain1", span_of(h.gain1), false});
    out.push_back({p + "shift1", span_of(h.shift1), false});
    out.push_back({p + "w2", span_of(h.w2), true});
    out.push_back({p + "b2", span_of(h.b2), false});
    out.push_back({p + "gain2", span_of(h.gain2), false});
    out.push_back({p + "shift2", span_of(h.shift2), false});
  }
  out.push_back({"w_reg", span_of(w_reg), true});
  out.push_back({"b_reg", std::span<double>(&b_reg, 1), false});
  return out;
}

std::vector<ConstParamTensor> HeadParams::tensors() const {
  std::vector<ConstParamTensor> out;
  for (auto& t : const_cast<HeadParams*>(this)->tensors()) {
    out.push_back({std::move(t.name), std::span<const double>(t.values), t.decay});
  }
  return out;
}

HeadParams HeadParams::zeros_like() const {
  HeadParams z = *this;
  for (auto& t : z.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  return z;
}

std::size_t HeadParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.values.size();
  return n;
}

void HeadParams::validate() const {
  const auto H = static_cast<Eigen::Index>(d_hidden);
  const auto D = static_cast<Eigen::Index>(d_out);
  if (heads.empty()) throw ValidationError("parameters hold no transform heads");
  for (std::size_t n = 0; n < heads.size(); ++n) {
    const auto& h = heads[n];
    const bool ok = h.w1.rows() == H && h.w1.cols() > 0 && h.b1.size() == H && h.gain1.size() == H &&
                    h.shift1.size() == H && h.w2.rows() == D && h.w2.cols() == H && h.b2.size() == D &&
                    h.gain2.size() == D && h.shift2.size() == D;
    if (!ok) throw ValidationError("transform head " + std::to_string(n) + " has inconsistent shapes");
  }
  if (w_reg.size() != D) throw ValidationError("regression weight has wrong length");
  for (const auto& t : tensors()) {
    for (double v : t.values) {
      if (!std::isfinite(v)) throw ValidationError("non-finite parameter in " + t.name);
    }
  }
}

bool HeadParams::identical(const HeadParams& other) const {
  if (d_out != other.d_out || d_hidden != other.d_hidden || input_dims() != other.input_dims()) return false;
  const auto a = tensors();
  const auto b = other.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].values.size() != b[i].values.size()) return false;
    if (std::memcmp(a[i].values.data(), b[i].values.data(), a[i].values.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

HeadParams init_heads(std::span<const std::uint32_t> dims, std::size_t d_out, std::size_t d_hidden,
                      std::uint64_t seed) {
  if (dims.empty() || d_out == 0 || d_hidden == 0) throw ValidationError("init_heads: dims, D and D_hidden must be positive");
  Rng rng(seed);
  HeadParams p;
  p.d_out = d_out;
  p.d_hidden = d_hidden;
  const auto H = static_cast<Eigen::Index>(d_hidden);
  const auto D = static_cast<Eigen::Index>(d_out);
  for (auto dim : dims) {
    if (dim == 0) throw ValidationError("init_heads: feature dim must be positive");
    TransformHead h;
    h.w1.resize(H, dim);
    glorot(h.w1, rng);
    h.b1 = Vector::Zero(H);
    h.gain1 = Vector::Ones(H);
    h.shift1 = Vector::Zero(H);
    h.w2.resize(D, H);
    glorot(h.w2, rng);
    h.b2 = Vector::Zero(D);
    h.gain2 = Vector::Ones(D);
    h.shift2 = Vector::Zero(D);
    p.heads.push_back(std::move(h));
  }
  Matrix w_reg(1, D);
  glorot(w_reg, rng);
  p.w_reg = w_reg.transpose();
  p.b_reg = 0.0;
  return p;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

HeadTrace transform_forward(const TransformHead& head, const Vector& z) {
  if (z.size() != head.w1.cols()) {
    throw ValidationError("transform_forward: feature length " + std::to_string(z.size()) + " != head input dim " +
                          std::to_string(head.w1.cols()));
  }
  HeadTrace t;
  t.z = z;
  t.layer1 = norm_forward(head.w1 * z + head.b1, head.gain1, head.shift1);
  t.hidden = gelu_vec(t.layer1.out);
  t.layer2 = norm_forward(head.w2 * t.hidden + head.b2, head.gain2, head.shift2);
  t.f = gelu_vec(t.layer2.out);
  return t;
}

Vector aggregate(std::span<const Vector> f, std::span<const double> omega) {
  if (f.empty()) throw ValidationError("aggregate: no features");
  if (f.size() != omega.size()) throw ValidationError("aggregate: feature/weight count mismatch");
  double total = 0.0;
  Vector h = Vector::Zero(f.front().size());
  for (std::size_t n = 0; n < f.size(); ++n) {
    if (!(omega[n] > 0.0)) throw ValidationError("aggregate: weights must be positive");
    if (f[n].size() != h.size()) throw ValidationError("aggregate: feature widths differ");
    h += omega[n] * f[n];
    total += omega[n];
  }
  return h / total;
}

SampleTrace predict(const HeadParams& params, std::span<const Vector> z, std::span<const double> omega) {
  if (z.size() != params.heads.size()) {
    throw ValidationError("predict: got " + std::to_string(z.size()) + " features for " +
                          std::to_string(params.heads.size()) + " heads");
  }
  SampleTrace t;
  std::vector<Vector> f;
  for (std::size_t n = 0; n < z.size(); ++n) {
    t.heads.push_back(transform_forward(params.heads[n], z[n]));
    f.push_back(t.heads.back().f);
  }
  t.h = aggregate(f, omega);
  t.score = params.w_reg.dot(t.h) + params.b_reg;
  return t;
}

void backward(const HeadParams& params, const SampleTrace& trace, std::span<const double> omega,
              const SampleGrad& upstream, HeadParams& grads) {
  const std::size_t N = params.heads.size();
  if (trace.heads.size() != N || omega.size() != N || grads.heads.size() != N) {
    throw ValidationError("backward: trace, weights and parameters disagree on model count");
  }
  if (!upstream.d_f.empty() && upstream.d_f.size() != N) throw ValidationError("backward: d_f count mismatch");

  grads.w_reg += upstream.d_score * trace.h;
  grads.b_reg += upstream.d_score;

  Vector d_h = upstream.d_score * params.w_reg;
  if (upstream.d_h.size() != 0) d_h += upstream.d_h;

  double total = 0.0;
  for (double w : omega) total += w;

  for (std::size_t n = 0; n < N; ++n) {
    const auto& head = params.heads[n];
    const auto& t = trace.heads[n];
    auto& g = grads.heads[n];

    Vector d_f = (omega[n] / total) * d_h;
    if (!upstream.d_f.empty() && upstream.d_f[n].size() != 0) d_f += upstream.d_f[n];

    const Vector d_pre2 = norm_gelu_backward(t.layer2, d_f, head.gain2, g.gain2, g.shift2);
    g.w2.noalias() += d_pre2 * t.hidden.transpose();
    g.b2 += d_pre2;
    const Vector d_hidden = head.w2.transpose() * d_pre2;

    const Vector d_pre1 = norm_gelu_backward(t.layer1, d_hidden, head.gain1, g.gain1, g.shift1);
    g.w1.noalias() += d_pre1 * t.z.transpose();
    g.b1 += d_pre1;
  }
}

}  // namespace ptmvqa
