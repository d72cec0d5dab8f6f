#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ptmvqa {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kLayerNormEps = 1e-5;

// FC -> LayerNorm -> GELU, twice. Maps a frozen feature of width dim_n to D.
struct TransformHead {
  Matrix w1;  // D_hidden x dim_n
  Vector b1;
  Vector gain1, shift1;
  Matrix w2;  // D x D_hidden
  Vector b2;
  Vector gain2, shift2;
};

// Mutable view of one parameter tensor. `decay` marks weight matrices, the
// only tensors AdamW applies weight decay to.
struct ParamTensor {
  std::string name;
  std::span<double> values;
  bool decay = false;
};

struct ConstParamTensor {
  std::string name;
  std::span<const double> values;
  bool decay = false;
};

// All trainable state: one transform head per selected model plus the
// shared regression head score = w_reg . h + b_reg.
struct HeadParams {
  std::size_t d_out = 0;
  std::size_t d_hidden = 0;
  std::vector<TransformHead> heads;
  Vector w_reg;
  double b_reg = 0.0;

  std::size_t model_count() const { return heads.size(); }
  std::vector<std::uint32_t> input_dims() const;

  // Fixed order: per head w1 b1 gain1 shift1 w2 b2 gain2 shift2, then w_reg, b_reg.
  std::vector<ParamTensor> tensors();
  std::vector<ConstParamTensor> tensors() const;

  HeadParams zeros_like() const;
  std::size_t parameter_count() const;
  // Shape consistency and finiteness.
  void validate() const;
  // Bitwise equality of every parameter.
  bool identical(const HeadParams& other) const;
};

// Glorot-uniform weights, zero biases, unit norm gains, zero norm shifts.
HeadParams init_heads(std::span<const std::uint32_t> dims, std::size_t d_out, std::size_t d_hidden,
                      std::uint64_t seed);

double gelu(double x);
double gelu_grad(double x);

struct NormTrace {
  Vector pre;   // FC output
  Vector xhat;  // standardized
  double rstd = 0.0;
  Vector out;   // gain * xhat + shift, the GELU input
};

struct HeadTrace {
  Vector z;
  NormTrace layer1;
  Vector hidden;  // GELU(layer1.out)
  NormTrace layer2;
  Vector f;       // GELU(layer2.out)
};

HeadTrace transform_forward(const TransformHead& head, const Vector& z);

// h = sum(omega_n f_n) / sum(omega_n).
Vector aggregate(std::span<const Vector> f, std::span<const double> omega);

struct SampleTrace {
  std::vector<HeadTrace> heads;
  Vector h;
  double score = 0.0;
};

// One frozen feature per model, in head order.
SampleTrace predict(const HeadParams& params, std::span<const Vector> z, std::span<const double> omega);

// Upstream gradients for one sample. Empty d_h / d_f mean zero.
struct SampleGrad {
  double d_score = 0.0;
  Vector d_h;
  std::vector<Vector> d_f;
};

// Accumulates parameter gradients of one sample into `grads` (shaped like params).
void backward(const HeadParams& params, const SampleTrace& trace, std::span<const double> omega,
              const SampleGrad& upstream, HeadParams& grads);

}  // namespace ptmvqa
