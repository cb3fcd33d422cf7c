#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tgnn/rng.hpp"

namespace tgnn {

struct RawRecord {
  std::int64_t frame = 0;
  std::int64_t ped_id = 0;
  double x = 0.0;
  double y = 0.0;
};

// One prediction instance: N pedestrians over l_obs + l_pred frames.
// Coordinates are stored row-major as [ped][frame][xy].
struct SequenceSample {
  std::vector<std::int64_t> ped_ids;
  std::vector<double> abs_xy;
  std::vector<double> rel_xy;  // filled by decentralize()
  std::array<double, 2> offset{0.0, 0.0};
  int l_obs = 0;
  int l_pred = 0;

  int n() const { return static_cast<int>(ped_ids.size()); }
  int frames() const { return l_obs + l_pred; }
  double abs_at(int ped, int frame, int c) const {
    return abs_xy[static_cast<size_t>((ped * frames() + frame) * 2 + c)];
  }
  double rel_at(int ped, int frame, int c) const {
    return rel_xy[static_cast<size_t>((ped * frames() + frame) * 2 + c)];
  }
};

struct DomainStats {
  int nos = 0;      // sequences
  int nop = 0;      // pedestrians, summed over sequences
  double an = 0.0;  // nop / nos
  double av = 0.0;  // mean |dp|/dt, m/s
  double aa = 0.0;  // mean |dv|/dt, m/s^2
};

struct SyntheticDomainSpec {
  int scenes = 10;
  int peds_min = 2;
  int peds_max = 6;
  double speed_mean = 1.0;
  double speed_std = 0.2;
  double heading_noise_std = 0.0;  // rad per frame
  double frame_interval = 0.4;     // s
  int frames_per_scene = 40;
  double spawn_extent = 6.0;       // start positions uniform in [-e, e]^2
  std::uint64_t seed = 1;
};

// Parses a whitespace-separated `frame ped_id x y` file. Lines must be
// frame-monotone, (frame, ped) pairs unique; blank lines are skipped.
std::vector<RawRecord> load_domain(const std::filesystem::path& path);

// Windows records into samples. A window keeps only pedestrians present at
// every one of its l_obs + l_pred consecutive frames (consecutive in the
// file's ordered list of distinct frame ids); empty windows are dropped.
std::vector<SequenceSample> build_sequences(const std::vector<RawRecord>& records,
                                            int l_obs = 8, int l_pred = 12,
                                            int stride = 1);

// Subtracts the mean last-observed position (stored as the offset).
void decentralize(SequenceSample& sample);

// Adds the stored offset back; inverse of decentralize.
void recentralize(std::vector<double>& xy, const std::array<double, 2>& offset);

DomainStats compute_domain_stats(const std::vector<SequenceSample>& samples,
                                 double frame_interval);

// Extreme deviation (max - min) and sample standard deviation (n - 1).
std::pair<double, double> aggregate_cross_domain(const std::vector<double>& values);

// Noisy constant-heading walkers; deterministic per seed. Scenes occupy
// disjoint frame ranges and pedestrian id ranges.
std::vector<RawRecord> generate_synthetic_domain(const SyntheticDomainSpec& spec);

// train/ val/ test/ subdirectories, each with one or more trajectory files.
struct DomainLayout {
  std::filesystem::path root;
  std::vector<std::filesystem::path> train;
  std::vector<std::filesystem::path> val;
  std::vector<std::filesystem::path> test;

  std::string name() const { return root.filename().string(); }
};

DomainLayout discover_domain(const std::filesystem::path& root);

// Loads and windows every file of one split; samples never span files.
std::vector<SequenceSample> load_split_sequences(
    const std::vector<std::filesystem::path>& files, int l_obs, int l_pred,
    int stride);

void write_trajectory_file(const std::filesystem::path& path,
                           const std::vector<RawRecord>& records);

// Splits scenes 60/20/20 into train/val/test and writes one file per scene.
void write_synthetic_domain(const std::filesystem::path& root,
                            const SyntheticDomainSpec& spec);

}  // namespace tgnn
