#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tgnn/model.hpp"
#include "tgnn/predict.hpp"
#include "tgnn/train.hpp"

namespace tgnn {

// Mean Euclidean error over all pedestrians and predicted steps. Arrays are
// n * l_pred * 2 world coordinates.
double ade(const std::vector<double>& predicted, const std::vector<double>& truth,
           int n, int l_pred);

// Mean Euclidean error at the final predicted step only.
double fde(const std::vector<double>& predicted, const std::vector<double>& truth,
           int n, int l_pred);

struct SampleEval {
  double best_ade = 0.0;
  double best_fde = 0.0;
  int n = 0;
};

// Draws k trajectories from the head, recentralizes each and keeps the
// minimum-ADE draw for ADE and the minimum-FDE draw for FDE (or one draw for
// both when single_best_by_ade is set).
SampleEval best_of_k_sample(const GaussianTrajectory& g,
                            const SequenceSample& sample, int k, Rng& rng,
                            bool single_best_by_ade = false);

struct EvalResult {
  double ade = 0.0;
  double fde = 0.0;
  int samples = 0;
  int pedestrians = 0;
};

// Best-of-k over a whole test split, aggregated with per-pedestrian weights.
// Each sample gets an independent stream forked from `seed`.
EvalResult evaluate_model(const Model& model,
                          const std::vector<SequenceSample>& samples, int k,
                          std::uint64_t seed, bool single_best_by_ade = false);

// Constant-velocity extrapolation of the last observed step; the desk-scale
// reference predictor.
EvalResult constant_velocity_baseline(const std::vector<SequenceSample>& samples);

struct TaskReport {
  std::string source;
  std::string target;
  double ade = 0.0;
  double fde = 0.0;
  int k = 0;
  int samples = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string error;  // nonempty when the task failed
};

struct MatrixReport {
  std::vector<TaskReport> rows;
  double ave_ade = 0.0;
  double ave_fde = 0.0;
};

// Trains and evaluates every ordered source != target pair, in input order.
// Failures are recorded per row; remaining tasks still run. jobs > 1 runs
// cells concurrently.
MatrixReport run_task_matrix(const std::vector<std::filesystem::path>& domains,
                             const TrainConfig& config,
                             const std::filesystem::path& out_dir,
                             std::uint64_t seed, int jobs = 1);

void emit_report_csv(const std::filesystem::path& path, const MatrixReport& report);
void emit_report_markdown(const std::filesystem::path& path,
                          const MatrixReport& report);
MatrixReport parse_report_csv(const std::filesystem::path& path);

struct SweepRow {
  std::string setting;
  double ade = 0.0;
  double fde = 0.0;
  int k = 0;
  int samples = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string error;
};

// All-else-fixed sweeps (lambda, adjacency kind, alignment kind,
// normalization mode) on the ordered pair domains[0] -> domains[1].
// Writes one CSV per sweep under out_dir and returns them in that order.
std::vector<std::vector<SweepRow>> run_ablations(
    const std::vector<std::filesystem::path>& domains, const TrainConfig& config,
    const std::filesystem::path& out_dir, std::uint64_t seed, int jobs = 1);

}  // namespace tgnn
