#include "ptmvqa/optim.hpp"

#include <cmath>
#include <numbers>

#include "ptmvqa/errors.hpp"

namespace ptmvqa {

OptimState OptimState::for_params(const HeadParams& params) {
  OptimState s;
  for (const auto& t : params.tensors()) {
    s.m.emplace_back(t.values.size(), 0.0);
    s.v.emplace_back(t.values.size(), 0.0);
  }
  return s;
}

void adamw_step(HeadParams& params, const HeadParams& grads, OptimState& state, double lr, double weight_decay,
                const AdamWOptions& options) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  if (p.size() != g.size() || p.size() != state.m.size()) throw ValidationError("adamw_step: tensor count mismatch");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);

  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& values = p[i].values;
    const auto& grad = g[i].values;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (grad.size() != values.size() || m.size() != values.size()) {
      throw ValidationError("adamw_step: shape mismatch in " + p[i].name);
    }
    const double decay = p[i].decay ? lr * weight_decay : 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * grad[j];
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      values[j] = values[j] - lr * m_hat / (std::sqrt(v_hat) + options.eps) - decay * values[j];
    }
  }
}

double lr_at(std::uint64_t step, std::uint64_t total_steps, std::uint64_t warmup_steps, double base_lr) {
  if (step >= total_steps) throw ValidationError("lr_at: step beyond schedule");
  if (step < warmup_steps) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace ptmvqa
