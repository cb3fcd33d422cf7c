#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tgnn/adapt.hpp"
#include "tgnn/config.hpp"
#include "tgnn/data.hpp"
#include "tgnn/graph.hpp"
#include "tgnn/predict.hpp"

namespace tgnn {

// The full network: spatial encoder, domain-attention pooling, temporal
// decoder. Parameters are created from the config seed.
class Model {
 public:
  explicit Model(const TrainConfig& config);

  const TrainConfig& config() const { return config_; }
  GraphParams& graph() { return graph_; }
  DomainAttentionParams& adapt() { return adapt_; }
  PredictorParams& predictor() { return predictor_; }

  // [N, d_f, l_obs] spatial-temporal features from relative coordinates.
  // `total_frames` is the per-pedestrian stride of rel_xy; only the first
  // l_obs frames are read.
  Tensor encode(Tape& tape, const std::vector<double>& rel_xy, int n,
                int total_frames) const;

  GaussianHead predict(Tape& tape, const Tensor& encoded) const;

  // Stable name -> tensor view of every learnable parameter.
  std::vector<std::pair<std::string, Tensor>> named_params() const;

  // Overwrites parameter values by name; shapes must match.
  void restore(const std::vector<std::pair<std::string, std::pair<Shape, std::vector<double>>>>& arrays);

 private:
  TrainConfig config_;
  GraphParams graph_;
  DomainAttentionParams adapt_;
  PredictorParams predictor_;
};

}  // namespace tgnn
