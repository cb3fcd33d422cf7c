#include "tgnn/graph.hpp"

#include <cmath>

#include "tgnn/error.hpp"

namespace tgnn {

GraphParams make_graph_params(int d_f, int n_max, bool use_bias, Rng& rng) {
  GraphParams p;
  p.d_f = d_f;
  p.n_max = n_max;
  p.use_bias = use_bias;
  p.w_o = Tensor::param_uniform({2, d_f}, rng);
  p.w_l = Tensor::param_uniform({2 * n_max}, rng);
  for (auto& w : p.w_gcn) w = Tensor::param_uniform({d_f, d_f}, rng);
  if (use_bias) {
    p.b_o = Tensor::param({1, d_f}, std::vector<double>(d_f, 0.0));
    for (auto& b : p.b_gcn)
      b = Tensor::param({1, d_f}, std::vector<double>(d_f, 0.0));
  }
  return p;
}

Tensor build_adjacency(const std::vector<double>& coords, int n,
                       const AdjacencyKind& kind) {
  for (double v : coords)
    if (!std::isfinite(v))
      throw DataError("build_adjacency: non-finite coordinate");
  std::vector<double> a(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double dx = coords[2 * i] - coords[2 * j];
      const double dy = coords[2 * i + 1] - coords[2 * j + 1];
      const double d = std::hypot(dx, dy);
      double v = 0.0;
      switch (kind.variant) {
        case AdjacencyVariant::kL2:
          v = d;
          break;
        case AdjacencyVariant::kReciprocal:
          v = 1.0 / (d + kind.epsilon);
          break;
        case AdjacencyVariant::kGaussian:
          v = std::exp(-d * d / (2.0 * kind.sigma * kind.sigma));
          break;
        case AdjacencyVariant::kRational:
          v = 1.0 - d * d / (d * d + kind.c);
          break;
      }
      a[static_cast<size_t>(i * n + j)] = v;
      a[static_cast<size_t>(j * n + i)] = v;
    }
  }
  return Tensor::from({n, n}, std::move(a));
}

Tensor init_node_features(Tape& tape, const Tensor& coords,
                          const GraphParams& params) {
  Tensor proj = matmul(tape, coords, params.w_o);
  if (params.use_bias) {
    const int n = coords.dim(0);
    proj = add(tape, proj, matmul(tape, Tensor::full({n, 1}, 1.0), params.b_o));
  }
  return relu(tape, proj);
}

Tensor graph_attention(Tape& tape, const Tensor& adjacency, const Tensor& w_l,
                       int n_max) {
  const int n = adjacency.dim(0);
  if (n > n_max)
    throw CapacityError("graph_attention: scene has " + std::to_string(n) +
                        " pedestrians but the padding capacity is " +
                        std::to_string(n_max) +
                        "; raise n_max in the configuration");
  if (n == 0) throw ContractError("graph_attention: empty scene");

  // Zero-padding the columns to n_max means only the first n entries of each
  // scorer half ever touch real data; the remaining softmax runs over the
  // real pedestrians only.
  std::vector<double> padded(static_cast<size_t>(n_max) * n, 0.0);
  const auto av = adjacency.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      padded[static_cast<size_t>(i * n + j)] = av[static_cast<size_t>(i * n + j)];
  Tensor a_padded = Tensor::from({n_max, n}, std::move(padded));

  Tensor w_row = reshape(tape, w_l, {1, 2 * n_max});
  Tensor w_self = narrow(tape, w_row, 1, 0, n_max);        // scores own column
  Tensor w_other = narrow(tape, w_row, 1, n_max, n_max);   // scores the peer
  Tensor s_self = matmul(tape, w_self, a_padded);          // [1, n]
  Tensor s_other = matmul(tape, w_other, a_padded);        // [1, n]

  const Tensor ones_col = Tensor::full({n, 1}, 1.0);
  Tensor score =
      add(tape, matmul(tape, reshape(tape, s_self, {n, 1}),
                       Tensor::full({1, n}, 1.0)),
          matmul(tape, ones_col, s_other));  // score[i][j] = s_self_i + s_other_j
  Tensor alpha = softmax(tape, leaky_relu(tape, score, 0.2), 1);

  // p_i = relu(sum_j alpha[i][j] a_j), assembled as columns of the output.
  Tensor combined = matmul(tape, adjacency, permute(tape, alpha, {1, 0}));
  return relu(tape, combined);
}

Tensor gcn_forward_frame(Tape& tape, const Tensor& refined_adjacency,
                         const Tensor& features, const GraphParams& params,
                         NormalizationMode mode) {
  const int n = refined_adjacency.dim(0);
  Tensor a_hat = add(tape, refined_adjacency, Tensor::identity(n));
  Tensor degree = sum_axis(tape, a_hat, 1);  // row degrees, >= 1 after +I
  Tensor d_neg = pow_const(tape, reshape(tape, degree, {n, 1}), -0.5);
  const double col_exp =
      mode == NormalizationMode::kAsWritten ? 0.5 : -0.5;
  Tensor d_col = pow_const(tape, reshape(tape, degree, {1, n}), col_exp);

  const Tensor ones_row = Tensor::full({1, n}, 1.0);
  const Tensor ones_col = Tensor::full({n, 1}, 1.0);
  Tensor norm = mul(tape, mul(tape, matmul(tape, d_neg, ones_row), a_hat),
                    matmul(tape, ones_col, d_col));

  Tensor f = features;
  for (int l = 0; l < 3; ++l) {
    Tensor z = matmul(tape, matmul(tape, norm, f), params.w_gcn[static_cast<size_t>(l)]);
    if (params.use_bias)
      z = add(tape, z,
              matmul(tape, ones_col, params.b_gcn[static_cast<size_t>(l)]));
    f = relu(tape, z);
  }
  return f;
}

Tensor encode_frames(Tape& tape, const std::vector<double>& rel_xy, int n,
                     int total_frames, int l_obs, const AdjacencyKind& kind,
                     const GraphParams& params, NormalizationMode mode) {
  std::vector<Tensor> per_frame;
  per_frame.reserve(static_cast<size_t>(l_obs));
  std::vector<double> frame_coords(static_cast<size_t>(n) * 2);
  for (int t = 0; t < l_obs; ++t) {
    for (int p = 0; p < n; ++p) {
      frame_coords[static_cast<size_t>(2 * p)] =
          rel_xy[static_cast<size_t>((p * total_frames + t) * 2)];
      frame_coords[static_cast<size_t>(2 * p + 1)] =
          rel_xy[static_cast<size_t>((p * total_frames + t) * 2 + 1)];
    }
    Tensor coords = Tensor::from({n, 2}, frame_coords);
    Tensor adjacency = build_adjacency(frame_coords, n, kind);
    Tensor refined = graph_attention(tape, adjacency, params.w_l, params.n_max);
    Tensor features = init_node_features(tape, coords, params);
    Tensor encoded = gcn_forward_frame(tape, refined, features, params, mode);
    per_frame.push_back(reshape(tape, encoded, {n, params.d_f, 1}));
  }
  return concat(tape, per_frame, 2);
}

}  // namespace tgnn
