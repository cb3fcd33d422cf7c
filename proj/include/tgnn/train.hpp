#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tgnn/adam.hpp"
#include "tgnn/model.hpp"

namespace tgnn {

struct TaskSpec {
  std::filesystem::path source;
  std::filesystem::path target;
  std::filesystem::path out_dir;
};

struct EpochLoss {
  double l_pre = 0.0;
  double l_align = 0.0;
  double l = 0.0;
  double lr = 0.0;
};

// Target-domain training view: the future slab is never copied in, so the
// trainer cannot read it.
struct ObservedSample {
  std::vector<std::int64_t> ped_ids;
  std::vector<double> rel_obs;  // n * l_obs * 2
  int l_obs = 0;
  int n() const { return static_cast<int>(ped_ids.size()); }
};

ObservedSample observed_only(const SequenceSample& sample);

// Pairs one epoch of batch indices: every source batch in order, targets
// cycled with a reshuffle at each wrap.
std::vector<std::pair<int, int>> pair_batches(int source_batches,
                                              int target_batches, Rng& rng);

struct Checkpoint {
  std::uint32_t version = 1;
  TrainConfig config;
  int epoch = 0;
  std::array<std::uint64_t, 4> rng_state{};
  std::vector<EpochLoss> history;
  std::vector<std::pair<std::string, std::pair<Shape, std::vector<double>>>> params;
  // Optimizer moments, stored so a resumed run continues the exact update
  // sequence.
  std::int64_t opt_step = 0;
  std::vector<std::pair<std::string, std::pair<Shape, std::vector<double>>>> opt_m;
  std::vector<std::pair<std::string, std::pair<Shape, std::vector<double>>>> opt_v;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainResult {
  std::filesystem::path checkpoint_path;
  std::vector<EpochLoss> history;
};

// Trains source-train against target-val observations for config.epochs,
// writing train_log.csv, periodic checkpoints and checkpoint.tgnn under
// task.out_dir. `resume_from` continues a previous run bit-for-bit.
TrainResult train_task(const TaskSpec& task, const TrainConfig& config,
                       const std::optional<std::filesystem::path>& resume_from =
                           std::nullopt);

// In-memory variant used by tests and the matrix runner.
class Trainer {
 public:
  Trainer(std::vector<SequenceSample> source, std::vector<ObservedSample> target,
          const TrainConfig& config);

  // Restores parameters, optimizer moments, epoch and RNG state.
  void restore(const Checkpoint& ckpt);

  void run_epochs(int count);
  int epoch() const { return epoch_; }
  const std::vector<EpochLoss>& history() const { return history_; }
  const std::vector<double>& step_losses() const { return step_losses_; }
  Model& model() { return model_; }
  Checkpoint checkpoint() const;

 private:
  void run_one_epoch();

  TrainConfig config_;
  Model model_;
  AdamOptimizer optimizer_;
  std::vector<SequenceSample> source_;
  std::vector<ObservedSample> target_;
  Rng rng_;
  int epoch_ = 0;
  std::vector<EpochLoss> history_;
  std::vector<double> step_losses_;
};

}  // namespace tgnn
