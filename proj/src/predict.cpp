#include "tgnn/predict.hpp"

#include <cmath>
#include <numbers>

#include "tgnn/error.hpp"

namespace tgnn {

namespace {
constexpr double kLogTwoPi = 1.8378770664093453;
}

PredictorParams make_predictor_params(int d_f, int l_obs, int l_pred,
                                      bool use_bias, Rng& rng) {
  PredictorParams p;
  p.d_f = d_f;
  p.l_obs = l_obs;
  p.l_pred = l_pred;
  p.use_bias = use_bias;
  p.time_proj = Tensor::param_uniform({l_obs, l_pred}, rng);
  for (auto& w : p.w_conv) w = Tensor::param_uniform({3 * d_f, d_f}, rng);
  p.w_p = Tensor::param_uniform({d_f, 5}, rng);
  if (use_bias) {
    p.b_time = Tensor::param({1, l_pred}, std::vector<double>(l_pred, 0.0));
    for (auto& b : p.b_conv)
      b = Tensor::param({1, d_f}, std::vector<double>(d_f, 0.0));
    p.b_p = Tensor::param({1, 5}, std::vector<double>(5, 0.0));
  }
  return p;
}

namespace {

// One length-preserving width-3 temporal convolution with a residual
// connection: out = relu(conv(x) + x). Input and output are [N, d_f, L].
Tensor conv_block(Tape& tape, const Tensor& x, const Tensor& w,
                  const Tensor& bias, bool use_bias) {
  const int n = x.dim(0);
  const int d_f = x.dim(1);
  const int len = x.dim(2);
  Tensor xp = permute(tape, x, {0, 2, 1});  // [N, L, d_f]
  const Tensor zeros = Tensor::zeros({n, 1, d_f});
  Tensor prev, next;
  if (len > 1) {
    const Tensor pv[] = {zeros, narrow(tape, xp, 1, 0, len - 1)};
    prev = concat(tape, pv, 1);
    const Tensor nx[] = {narrow(tape, xp, 1, 1, len - 1), zeros};
    next = concat(tape, nx, 1);
  } else {
    prev = zeros;
    next = zeros;
  }
  const Tensor window[] = {prev, xp, next};
  Tensor z = matmul(tape, concat(tape, window, 2), w);  // [N, L, d_f]
  if (use_bias)
    z = add(tape, z, matmul(tape, Tensor::full({n, len, 1}, 1.0), bias));
  return relu(tape, add(tape, permute(tape, z, {0, 2, 1}), x));
}

}  // namespace

Tensor temporal_predict(Tape& tape, const Tensor& features,
                        const PredictorParams& params) {
  if (features.rank() != 3 || features.dim(1) != params.d_f ||
      features.dim(2) != params.l_obs)
    throw ShapeError("temporal_predict: features " +
                     shape_str(features.shape()) + " do not match d_f=" +
                     std::to_string(params.d_f) +
                     ", l_obs=" + std::to_string(params.l_obs));
  Tensor h = matmul(tape, features, params.time_proj);  // [N, d_f, l_pred]
  if (params.use_bias)
    h = add(tape, h,
            matmul(tape, Tensor::full({features.dim(0), params.d_f, 1}, 1.0),
                   params.b_time));
  h = relu(tape, h);
  h = conv_block(tape, h, params.w_conv[0], params.b_conv[0], params.use_bias);
  h = conv_block(tape, h, params.w_conv[1], params.b_conv[1], params.use_bias);
  return h;
}

GaussianHead gaussian_head(Tape& tape, const Tensor& predicted,
                           const PredictorParams& params) {
  const int n = predicted.dim(0);
  const int l_pred = predicted.dim(2);
  Tensor raw =
      matmul(tape, permute(tape, predicted, {0, 2, 1}), params.w_p);  // [N, L, 5]
  if (params.use_bias)
    raw = add(tape, raw,
              matmul(tape, Tensor::full({n, l_pred, 1}, 1.0), params.b_p));
  for (double v : raw.values())
    if (!std::isfinite(v))
      throw TrainingError("gaussian_head: non-finite output, training diverged");
  GaussianHead head;
  head.n = n;
  head.l_pred = l_pred;
  head.mu = narrow(tape, raw, 2, 0, 2);
  head.sigma = exp_op(tape, narrow(tape, raw, 2, 2, 2));
  head.rho = tanh_op(tape, narrow(tape, raw, 2, 4, 1));
  return head;
}

GaussianTrajectory materialize(const GaussianHead& head) {
  GaussianTrajectory g;
  g.n = head.n;
  g.l_pred = head.l_pred;
  g.mu.assign(head.mu.values().begin(), head.mu.values().end());
  g.sigma.assign(head.sigma.values().begin(), head.sigma.values().end());
  g.rho.assign(head.rho.values().begin(), head.rho.values().end());
  return g;
}

Tensor nll_loss(Tape& tape, const GaussianHead& head, const Tensor& truth_rel) {
  if (truth_rel.shape() != Shape{head.n, head.l_pred, 2})
    throw ShapeError("nll_loss: truth " + shape_str(truth_rel.shape()) +
                     " does not match head [" + std::to_string(head.n) + ", " +
                     std::to_string(head.l_pred) + ", 2]");
  for (double s : head.sigma.values())
    if (!(s > 0.0)) throw ContractError("nll_loss: sigma must be positive");
  for (double r : head.rho.values())
    if (!(std::abs(r) < 1.0))
      throw ContractError("nll_loss: |rho| must be below 1");

  Tensor mu_x = narrow(tape, head.mu, 2, 0, 1);
  Tensor mu_y = narrow(tape, head.mu, 2, 1, 1);
  Tensor sigma_x = narrow(tape, head.sigma, 2, 0, 1);
  Tensor sigma_y = narrow(tape, head.sigma, 2, 1, 1);
  Tensor tx = narrow(tape, truth_rel, 2, 0, 1);
  Tensor ty = narrow(tape, truth_rel, 2, 1, 1);

  Tensor zx = div(tape, sub(tape, tx, mu_x), sigma_x);
  Tensor zy = div(tape, sub(tape, ty, mu_y), sigma_y);
  Tensor z = add(tape, add(tape, mul(tape, zx, zx), mul(tape, zy, zy)),
                 scale(tape, mul(tape, head.rho, mul(tape, zx, zy)), -2.0));
  Tensor one_minus_r2 =
      sub(tape, Tensor::full({head.n, head.l_pred, 1}, 1.0),
          mul(tape, head.rho, head.rho));

  Tensor per_step =
      add(tape,
          add(tape, log_op(tape, sigma_x), log_op(tape, sigma_y)),
          add(tape, scale(tape, log_op(tape, one_minus_r2), 0.5),
              div(tape, z, scale(tape, one_minus_r2, 2.0))));
  per_step = add_const(tape, per_step, kLogTwoPi);

  Tensor per_ped = sum_axis(tape, reshape(tape, per_step, {head.n, head.l_pred}), 1);
  return mean_all(tape, per_ped);
}

double nll_value(const GaussianTrajectory& g, const std::vector<double>& truth_rel) {
  double total = 0.0;
  for (int p = 0; p < g.n; ++p) {
    for (int t = 0; t < g.l_pred; ++t) {
      const size_t i2 = static_cast<size_t>((p * g.l_pred + t) * 2);
      const size_t i1 = static_cast<size_t>(p * g.l_pred + t);
      const double dx = truth_rel[i2] - g.mu[i2];
      const double dy = truth_rel[i2 + 1] - g.mu[i2 + 1];
      const double sx = g.sigma[i2], sy = g.sigma[i2 + 1], r = g.rho[i1];
      const double zx = dx / sx, zy = dy / sy;
      const double omr = 1.0 - r * r;
      total += kLogTwoPi + std::log(sx) + std::log(sy) + 0.5 * std::log(omr) +
               (zx * zx + zy * zy - 2.0 * r * zx * zy) / (2.0 * omr);
    }
  }
  return total / g.n;
}

std::vector<std::vector<double>> sample_trajectories(const GaussianTrajectory& g,
                                                     int k, Rng& rng) {
  if (k < 1) throw ConfigError("sample_trajectories: k must be >= 1");
  std::vector<std::vector<double>> draws;
  draws.reserve(static_cast<size_t>(k));
  for (int d = 0; d < k; ++d) {
    std::vector<double> traj(static_cast<size_t>(g.n * g.l_pred * 2));
    for (int p = 0; p < g.n; ++p) {
      for (int t = 0; t < g.l_pred; ++t) {
        const size_t i2 = static_cast<size_t>((p * g.l_pred + t) * 2);
        const size_t i1 = static_cast<size_t>(p * g.l_pred + t);
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double r = g.rho[i1];
        // Cholesky factor of the 2x2 covariance.
        traj[i2] = g.mu[i2] + g.sigma[i2] * z1;
        traj[i2 + 1] = g.mu[i2 + 1] +
                       g.sigma[i2 + 1] * (r * z1 + std::sqrt(1.0 - r * r) * z2);
      }
    }
    draws.push_back(std::move(traj));
  }
  return draws;
}

}  // namespace tgnn
