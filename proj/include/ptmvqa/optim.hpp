#pragma once

#include <cstdint>
#include <vector>

#include "ptmvqa/model.hpp"

namespace ptmvqa {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers mirror HeadParams::tensors().
struct OptimState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static OptimState for_params(const HeadParams& params);
};

// Decoupled weight decay, applied only to tensors flagged `decay`:
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
void adamw_step(HeadParams& params, const HeadParams& grads, OptimState& state, double lr, double weight_decay,
                const AdamWOptions& options = {});

// Linear warmup over `warmup_steps`, then cosine annealing to zero.
double lr_at(std::uint64_t step, std::uint64_t total_steps, std::uint64_t warmup_steps, double base_lr);

}  // namespace ptmvqa
