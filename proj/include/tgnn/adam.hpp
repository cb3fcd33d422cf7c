#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tgnn/tensor.hpp"

namespace tgnn {

// Moment buffers for one parameter tensor.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update in place. Throws TrainingError (naming the
// parameter) on non-finite gradients.
void adam_step(Tensor& param, std::span<const double> grad, AdamState& state,
               double lr, std::string_view name);

// Convenience wrapper over a named parameter list.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<std::pair<std::string, Tensor>> params)
      : params_(std::move(params)), states_(params_.size()) {}

  // Applies one update using each parameter's materialized .grad().
  // grad_clip > 0 rescales by global L2 norm first.
  void step(double lr, double grad_clip = 0.0);

  std::span<const std::pair<std::string, Tensor>> params() const {
    return params_;
  }
  std::vector<AdamState>& states() { return states_; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<AdamState> states_;
};

}  // namespace tgnn
