#pragma once

#include <array>
#include <vector>

#include "tgnn/tensor.hpp"

namespace tgnn {

enum class AdjacencyVariant { kL2, kReciprocal, kGaussian, kRational };

struct AdjacencyKind {
  AdjacencyVariant variant = AdjacencyVariant::kL2;
  double sigma = 2.0;      // gaussian bandwidth
  double epsilon = 0.001;  // reciprocal stabilizer
  double c = 0.001;        // rational stabilizer
};

enum class NormalizationMode {
  kAsWritten,  // D^{-1/2} A D^{+1/2}
  kSymmetric,  // D^{-1/2} A D^{-1/2}
};

struct GraphParams {
  Tensor w_o;                    // [2, d_f] coordinate projection
  Tensor w_l;                    // [2 * n_max] attention scorer, two halves
  std::array<Tensor, 3> w_gcn;   // [d_f, d_f] each
  Tensor b_o;                    // [1, d_f], zero unless biases enabled
  std::array<Tensor, 3> b_gcn;
  int n_max = 64;
  int d_f = 64;
  bool use_bias = false;
};

GraphParams make_graph_params(int d_f, int n_max, bool use_bias, Rng& rng);

// Distance-derived N x N adjacency at one frame. `coords` is N x 2 relative
// coordinates; the diagonal is the kind evaluated at distance 0.
Tensor build_adjacency(const std::vector<double>& coords, int n,
                       const AdjacencyKind& kind);

// Scores zero-padded adjacency columns with the two halves of w_l, softmaxes
// each row over the real pedestrians and recombines columns. Returns the
// refined N x N adjacency.
Tensor graph_attention(Tape& tape, const Tensor& adjacency, const Tensor& w_l,
                       int n_max);

// f_i = relu(o'_i W_o) for one frame of relative coordinates.
Tensor init_node_features(Tape& tape, const Tensor& coords,
                          const GraphParams& params);

// Three degree-normalized propagation layers over one frame's refined
// adjacency (self-loops added here). Weights are shared across frames.
Tensor gcn_forward_frame(Tape& tape, const Tensor& refined_adjacency,
                         const Tensor& features, const GraphParams& params,
                         NormalizationMode mode);

// Full spatial encoder for one sample: per-frame adjacency + attention +
// GCN stack, outputs stacked to [N, d_f, l_obs].
Tensor encode_frames(Tape& tape, const std::vector<double>& rel_xy, int n,
                     int total_frames, int l_obs, const AdjacencyKind& kind,
                     const GraphParams& params, NormalizationMode mode);

}  // namespace tgnn
