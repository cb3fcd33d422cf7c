#pragma once

#include <array>
#include <vector>

#include "tgnn/rng.hpp"
#include "tgnn/tensor.hpp"

namespace tgnn {

struct PredictorParams {
  Tensor time_proj;               // [l_obs, l_pred]
  std::array<Tensor, 2> w_conv;   // [3 * d_f, d_f] each; width-3 kernels
  Tensor w_p;                     // [d_f, 5]
  Tensor b_time;                  // [1, l_pred], bias variants only
  std::array<Tensor, 2> b_conv;   // [1, d_f]
  Tensor b_p;                     // [1, 5]
  int d_f = 64;
  int l_obs = 8;
  int l_pred = 12;
  bool use_bias = false;
};

PredictorParams make_predictor_params(int d_f, int l_obs, int l_pred,
                                      bool use_bias, Rng& rng);

// Time-projection layer followed by two residual width-3 temporal
// convolutions, all ReLU-activated. [N, d_f, l_obs] -> [N, d_f, l_pred].
Tensor temporal_predict(Tape& tape, const Tensor& features,
                        const PredictorParams& params);

// Per-pedestrian, per-step bivariate Gaussian parameters, on the tape.
struct GaussianHead {
  Tensor mu;     // [N, l_pred, 2]
  Tensor sigma;  // [N, l_pred, 2], strictly positive
  Tensor rho;    // [N, l_pred, 1], in (-1, 1)
  int n = 0;
  int l_pred = 0;
};

// Value-typed copy for sampling and evaluation.
struct GaussianTrajectory {
  int n = 0;
  int l_pred = 0;
  std::vector<double> mu;     // n * l_pred * 2
  std::vector<double> sigma;  // n * l_pred * 2
  std::vector<double> rho;    // n * l_pred
};

// raw[0:2] -> mu, exp(raw[2:4]) -> sigma, tanh(raw[4]) -> rho. Non-finite raw
// values raise TrainingError (training has diverged).
GaussianHead gaussian_head(Tape& tape, const Tensor& predicted,
                           const PredictorParams& params);

GaussianTrajectory materialize(const GaussianHead& head);

// Negative log-likelihood of the true relative future under the head's
// distribution, summed over steps and averaged over pedestrians.
Tensor nll_loss(Tape& tape, const GaussianHead& head, const Tensor& truth_rel);

// Plain-value NLL for a materialized trajectory (used by tests).
double nll_value(const GaussianTrajectory& g, const std::vector<double>& truth_rel);

// K independent draws; each is n * l_pred * 2 relative coordinates.
std::vector<std::vector<double>> sample_trajectories(const GaussianTrajectory& g,
                                                     int k, Rng& rng);

}  // namespace tgnn
