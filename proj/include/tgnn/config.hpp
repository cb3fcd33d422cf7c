#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tgnn/adapt.hpp"
#include "tgnn/graph.hpp"

namespace tgnn {

// Every knob of the pipeline. Parsed from `key = value` files with `#`
// comments; unknown keys are rejected.
struct TrainConfig {
  AdjacencyKind adjacency;
  NormalizationMode normalization = NormalizationMode::kAsWritten;
  AlignmentKind alignment = AlignmentKind::kL2;
  AlignDivisor align_divisor = AlignDivisor::kDf;

  int d_f = 64;
  int d_h = 64;
  int n_max = 64;
  int l_obs = 8;
  int l_pred = 12;

  double lambda = 1.0;
  int epochs = 200;
  int batch_size = 16;
  double lr_initial = 0.001;
  double lr_after_drop = 0.0005;
  int lr_drop_epoch = 100;
  std::uint64_t seed = 1;
  double grad_clip = 0.0;  // 0 disables clipping
  bool use_bias = false;

  int stride = 1;
  double frame_interval = 0.4;
  int best_of_k = 20;
  bool single_best_by_ade = false;  // one draw serves both metrics
  int checkpoint_every = 50;

  int d_v() const { return d_f * l_obs; }
};

TrainConfig parse_config_file(const std::filesystem::path& path);

// Parses config text (same grammar as the file) on top of `base`.
void apply_config_text(TrainConfig& base, const std::string& text,
                       const std::string& origin);

// Applies one `key=value` override; throws ConfigError on unknown keys or
// unparseable values.
void apply_override(TrainConfig& config, const std::string& key,
                    const std::string& value);

void validate(const TrainConfig& config);

// Stable `key = value` rendering, one line per key, sorted.
std::string canonical_config(const TrainConfig& config);

// FNV-1a 64 over the canonical rendering, as 16 hex digits.
std::string config_hash(const TrainConfig& config);

const char* to_string(AdjacencyVariant v);
const char* to_string(NormalizationMode m);
const char* to_string(AlignmentKind k);
const char* to_string(AlignDivisor d);

}  // namespace tgnn
