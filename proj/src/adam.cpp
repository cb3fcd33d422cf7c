#include "tgnn/adam.hpp"

#include <cmath>

#include "tgnn/error.hpp"

namespace tgnn {

void adam_step(Tensor& param, std::span<const double> grad, AdamState& state,
               double lr, std::string_view name) {
  auto values = param.mutable_values();
  if (grad.size() != values.size())
    throw ContractError("adam_step: gradient size " +
                        std::to_string(grad.size()) + " != parameter size " +
                        std::to_string(values.size()) + " for " +
                        std::string(name));
  if (state.m.empty()) state.m.assign(values.size(), 0.0);
  if (state.v.empty()) state.v.assign(values.size(), 0.0);
  if (state.m.size() != values.size() || state.v.size() != values.size())
    throw ContractError("adam_step: moment shape mismatch for " +
                        std::string(name));
  for (double g : grad)
    if (!std::isfinite(g))
      throw TrainingError("non-finite gradient for parameter " +
                          std::string(name));

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < values.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    values[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void AdamOptimizer::step(double lr, double grad_clip) {
  double clip_factor = 1.0;
  if (grad_clip > 0.0) {
    double total = 0.0;
    for (auto& [name, p] : params_)
      for (double g : p.grad()) total += g * g;
    const double norm = std::sqrt(total);
    if (norm > grad_clip) clip_factor = grad_clip / norm;
  }
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& [name, p] = params_[i];
    auto g = p.grad();
    if (clip_factor != 1.0) {
      std::vector<double> scaled(g.begin(), g.end());
      for (auto& x : scaled) x *= clip_factor;
      adam_step(p, scaled, states_[i], lr, name);
    } else {
      adam_step(p, g, states_[i], lr, name);
    }
  }
}

}  // namespace tgnn
