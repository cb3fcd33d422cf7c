#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tgnn/tensor.hpp"

namespace tgnn {

enum class DomainTag { kSource, kTarget };

// M flattened per-pedestrian feature vectors of dimension d_v = d_f * l_obs.
struct FeatureVectorSet {
  Tensor matrix;  // [M, d_v]
  DomainTag tag = DomainTag::kSource;

  int count() const { return matrix.dim(0); }
  int dim() const { return matrix.dim(1); }
};

struct DomainAttentionParams {
  Tensor w_f;     // [d_v, d_h]; applied as f W_f
  Tensor h;       // [d_h, 1]
  Tensor b_f;     // [1, d_h], only when biases are enabled
  Tensor pool_w;  // [d_v, 1] scorer for the linear-pooling variant
  int d_h = 64;
  bool use_bias = false;
};

DomainAttentionParams make_adapt_params(int d_v, int d_h, bool use_bias,
                                        Rng& rng);

enum class AlignmentKind { kL2, kMmd, kCoral, kAvgPoolL2, kLinearPoolL2 };

// Which width divides the squared context distance.
enum class AlignDivisor { kDf, kDv };

// Row-major flattening of each pedestrian's d_f x l_obs slab.
FeatureVectorSet flatten_features(Tape& tape, const Tensor& stacked,
                                  DomainTag tag);

// beta_i = softmax_i(h^T tanh(W_f f_i)); returns [M, 1].
Tensor domain_attention(Tape& tape, const FeatureVectorSet& set,
                        const DomainAttentionParams& params);

// c = sum_i beta_i f_i; returns [d_v, 1].
Tensor context_vector(Tape& tape, const FeatureVectorSet& set,
                      const Tensor& beta);

// Nonnegative scalar distance between the two domains' features.
Tensor alignment_loss(Tape& tape, const FeatureVectorSet& source,
                      const FeatureVectorSet& target,
                      const DomainAttentionParams& params, AlignmentKind kind,
                      AlignDivisor divisor, int d_f);

void export_features_csv(const std::filesystem::path& path,
                         const FeatureVectorSet& source,
                         const FeatureVectorSet& target);

}  // namespace tgnn
