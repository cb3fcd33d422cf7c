#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tgnn/tensor.hpp"

namespace tgnn::testing {

// Central finite differences against the analytic gradients of `loss_fn`,
// which must rebuild the forward pass from scratch on every call (the
// parameter values are perturbed in place between calls). Returns the worst
// offender's description, empty when all entries agree.
inline std::string check_gradients(
    std::vector<Tensor> params,
    const std::function<Tensor(Tape&)>& loss_fn, double h = 1e-5,
    double tol = 1e-4) {
  Tape tape;
  Tensor loss = loss_fn(tape);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params)
    analytic.emplace_back(p.grad().begin(), p.grad().end());

  std::string worst;
  double worst_err = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_values();
    for (size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      Tape tp;
      const double up = loss_fn(tp).value();
      values[i] = saved - h;
      Tape tm;
      const double down = loss_fn(tm).value();
      values[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[pi][i];
      const double err =
          std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      if (err > tol && err > worst_err) {
        worst_err = err;
        worst = "param " + std::to_string(pi) + "[" + std::to_string(i) +
                "]: analytic " + std::to_string(an) + " vs fd " +
                std::to_string(fd) + " (err " + std::to_string(err) + ")";
      }
    }
  }
  return worst;
}

inline Tensor random_param(Shape shape, Rng& rng, double lo = -1.0,
                           double hi = 1.0) {
  std::vector<double> v(static_cast<size_t>(numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::param(std::move(shape), std::move(v));
}

inline Tensor random_const(Shape shape, Rng& rng, double lo = -1.0,
                           double hi = 1.0) {
  std::vector<double> v(static_cast<size_t>(numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

}  // namespace tgnn::testing
