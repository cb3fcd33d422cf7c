#include "tgnn/model.hpp"

#include <map>

#include "tgnn/error.hpp"

namespace tgnn {

Model::Model(const TrainConfig& config) : config_(config) {
  validate(config);
  Rng init_rng = Rng(config.seed).fork(1);
  graph_ = make_graph_params(config.d_f, config.n_max, config.use_bias, init_rng);
  adapt_ = make_adapt_params(config.d_v(), config.d_h, config.use_bias, init_rng);
  predictor_ = make_predictor_params(config.d_f, config.l_obs, config.l_pred,
                                     config.use_bias, init_rng);
}

Tensor Model::encode(Tape& tape, const std::vector<double>& rel_xy, int n,
                     int total_frames) const {
  return encode_frames(tape, rel_xy, n, total_frames,
                       std::min(total_frames, config_.l_obs),
                       config_.adjacency, graph_, config_.normalization);
}

GaussianHead Model::predict(Tape& tape, const Tensor& encoded) const {
  return gaussian_head(tape, temporal_predict(tape, encoded, predictor_),
                       predictor_);
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("graph.w_o", graph_.w_o);
  out.emplace_back("graph.w_l", graph_.w_l);
  for (size_t l = 0; l < graph_.w_gcn.size(); ++l)
    out.emplace_back("graph.w_gcn." + std::to_string(l), graph_.w_gcn[l]);
  out.emplace_back("adapt.w_f", adapt_.w_f);
  out.emplace_back("adapt.h", adapt_.h);
  out.emplace_back("adapt.pool_w", adapt_.pool_w);
  out.emplace_back("predict.time_proj", predictor_.time_proj);
  for (size_t l = 0; l < predictor_.w_conv.size(); ++l)
    out.emplace_back("predict.w_conv." + std::to_string(l),
                     predictor_.w_conv[l]);
  out.emplace_back("predict.w_p", predictor_.w_p);
  if (config_.use_bias) {
    out.emplace_back("graph.b_o", graph_.b_o);
    for (size_t l = 0; l < graph_.b_gcn.size(); ++l)
      out.emplace_back("graph.b_gcn." + std::to_string(l), graph_.b_gcn[l]);
    out.emplace_back("adapt.b_f", adapt_.b_f);
    out.emplace_back("predict.b_time", predictor_.b_time);
    for (size_t l = 0; l < predictor_.b_conv.size(); ++l)
      out.emplace_back("predict.b_conv." + std::to_string(l),
                       predictor_.b_conv[l]);
    out.emplace_back("predict.b_p", predictor_.b_p);
  }
  return out;
}

void Model::restore(
    const std::vector<std::pair<std::string, std::pair<Shape, std::vector<double>>>>& arrays) {
  std::map<std::string, Tensor> by_name;
  for (auto& [name, tensor] : named_params()) by_name.emplace(name, tensor);
  for (const auto& [name, payload] : arrays) {
    const auto it = by_name.find(name);
    if (it == by_name.end())
      throw ContractError("checkpoint parameter `" + name +
                          "` does not exist in this architecture");
    Tensor t = it->second;
    if (t.shape() != payload.first)
      throw ContractError("checkpoint parameter `" + name + "` has shape " +
                          shape_str(payload.first) + ", architecture expects " +
                          shape_str(t.shape()));
    auto dst = t.mutable_values();
    std::copy(payload.second.begin(), payload.second.end(), dst.begin());
  }
}

}  // namespace tgnn
