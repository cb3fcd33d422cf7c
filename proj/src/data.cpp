#include "tgnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "tgnn/error.hpp"

namespace tgnn {

std::vector<RawRecord> load_domain(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file " + path.string());

  std::vector<RawRecord> records;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  std::string line;
  int line_no = 0;
  std::int64_t prev_frame = std::numeric_limits<std::int64_t>::min();
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    RawRecord r;
    if (!(ls >> r.frame)) {
      if (ls.eof()) continue;  // blank line
      throw ParseError(path.string(), line_no, "expected `frame ped_id x y`");
    }
    if (!(ls >> r.ped_id >> r.x >> r.y))
      throw ParseError(path.string(), line_no, "expected `frame ped_id x y`");
    std::string rest;
    if (ls >> rest)
      throw ParseError(path.string(), line_no, "trailing token `" + rest + "`");
    if (r.frame < prev_frame)
      throw ParseError(path.string(), line_no,
                       "frame ids must be monotone non-decreasing");
    prev_frame = r.frame;
    if (!seen.insert({r.frame, r.ped_id}).second)
      throw ParseError(path.string(), line_no,
                       "duplicate (frame, pedestrian) pair " +
                           std::to_string(r.frame) + ", " +
                           std::to_string(r.ped_id));
    records.push_back(r);
  }
  if (records.empty())
    throw EmptyDomainError("no trajectory records in " + path.string());
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame, a.ped_id) < std::tie(b.frame, b.ped_id);
  });
  return records;
}

std::vector<SequenceSample> build_sequences(const std::vector<RawRecord>& records,
                                            int l_obs, int l_pred, int stride) {
  if (l_obs < 1 || l_pred < 1)
    throw ConfigError("build_sequences: observation and prediction lengths "
                      "must be at least 1");
  if (stride < 1) throw ConfigError("build_sequences: stride must be >= 1");

  // Distinct frame ids in order become window positions.
  std::vector<std::int64_t> frames;
  for (const auto& r : records)
    if (frames.empty() || frames.back() != r.frame) frames.push_back(r.frame);
  std::unordered_map<std::int64_t, int> frame_pos;
  frame_pos.reserve(frames.size());
  for (size_t i = 0; i < frames.size(); ++i)
    frame_pos[frames[i]] = static_cast<int>(i);

  struct PedTrack {
    // position index -> xy; plus, per position, the end of its consecutive run
    std::unordered_map<int, std::array<double, 2>> coords;
    std::unordered_map<int, int> run_end;
  };
  std::map<std::int64_t, PedTrack> tracks;
  for (const auto& r : records)
    tracks[r.ped_id].coords[frame_pos[r.frame]] = {r.x, r.y};
  for (auto& [id, tr] : tracks) {
    std::vector<int> pos;
    pos.reserve(tr.coords.size());
    for (const auto& [p, c] : tr.coords) pos.push_back(p);
    std::sort(pos.begin(), pos.end());
    for (int i = static_cast<int>(pos.size()) - 1; i >= 0; --i) {
      const int p = pos[static_cast<size_t>(i)];
      const auto next = tr.run_end.find(p + 1);
      tr.run_end[p] = (next != tr.run_end.end()) ? next->second : p;
    }
  }

  const int total = l_obs + l_pred;
  std::vector<SequenceSample> samples;
  for (int start = 0; start + total <= static_cast<int>(frames.size());
       start += stride) {
    SequenceSample s;
    s.l_obs = l_obs;
    s.l_pred = l_pred;
    for (const auto& [id, tr] : tracks) {
      const auto it = tr.run_end.find(start);
      if (it == tr.run_end.end() || it->second < start + total - 1) continue;
      s.ped_ids.push_back(id);
      for (int f = 0; f < total; ++f) {
        const auto& c = tr.coords.at(start + f);
        s.abs_xy.push_back(c[0]);
        s.abs_xy.push_back(c[1]);
      }
    }
    if (s.n() > 0) samples.push_back(std::move(s));
  }
  return samples;
}

void decentralize(SequenceSample& sample) {
  const int last_obs = sample.l_obs - 1;
  double mx = 0.0, my = 0.0;
  for (int p = 0; p < sample.n(); ++p) {
    mx += sample.abs_at(p, last_obs, 0);
    my += sample.abs_at(p, last_obs, 1);
  }
  mx /= sample.n();
  my /= sample.n();
  sample.offset = {mx, my};
  sample.rel_xy.resize(sample.abs_xy.size());
  for (size_t i = 0; i < sample.abs_xy.size(); i += 2) {
    sample.rel_xy[i] = sample.abs_xy[i] - mx;
    sample.rel_xy[i + 1] = sample.abs_xy[i + 1] - my;
  }
}

void recentralize(std::vector<double>& xy, const std::array<double, 2>& offset) {
  for (size_t i = 0; i < xy.size(); i += 2) {
    xy[i] += offset[0];
    xy[i + 1] += offset[1];
  }
}

DomainStats compute_domain_stats(const std::vector<SequenceSample>& samples,
                                 double frame_interval) {
  if (samples.empty())
    throw EmptyDomainError("compute_domain_stats: no samples in domain");
  DomainStats st;
  st.nos = static_cast<int>(samples.size());
  double v_sum = 0.0, a_sum = 0.0;
  std::int64_t v_count = 0, a_count = 0;
  for (const auto& s : samples) {
    st.nop += s.n();
    for (int p = 0; p < s.n(); ++p) {
      double prev_vx = 0.0, prev_vy = 0.0;
      for (int f = 1; f < s.frames(); ++f) {
        const double vx =
            (s.abs_at(p, f, 0) - s.abs_at(p, f - 1, 0)) / frame_interval;
        const double vy =
            (s.abs_at(p, f, 1) - s.abs_at(p, f - 1, 1)) / frame_interval;
        v_sum += std::hypot(vx, vy);
        ++v_count;
        if (f >= 2) {
          a_sum += std::hypot(vx - prev_vx, vy - prev_vy) / frame_interval;
          ++a_count;
        }
        prev_vx = vx;
        prev_vy = vy;
      }
    }
  }
  st.an = static_cast<double>(st.nop) / st.nos;
  st.av = v_count ? v_sum / static_cast<double>(v_count) : 0.0;
  st.aa = a_count ? a_sum / static_cast<double>(a_count) : 0.0;
  return st;
}

std::pair<double, double> aggregate_cross_domain(const std::vector<double>& values) {
  if (values.size() < 2)
    throw ContractError("aggregate_cross_domain: need at least 2 domains");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return {*mx - *mn, sd};
}

std::vector<RawRecord> generate_synthetic_domain(const SyntheticDomainSpec& spec) {
  if (spec.speed_std < 0 || spec.heading_noise_std < 0 || spec.spawn_extent < 0)
    throw ConfigError("synthetic domain: dispersions must be nonnegative");
  if (spec.frame_interval <= 0)
    throw ConfigError("synthetic domain: frame interval must be positive");
  if (spec.scenes < 1 || spec.frames_per_scene < 1 || spec.peds_min < 1 ||
      spec.peds_max < spec.peds_min)
    throw ConfigError("synthetic domain: invalid scene/pedestrian counts");

  Rng rng(spec.seed);
  std::vector<RawRecord> records;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int sc = 0; sc < spec.scenes; ++sc) {
    const std::int64_t frame0 =
        static_cast<std::int64_t>(sc) * spec.frames_per_scene;
    const int n =
        static_cast<int>(rng.uniform_int(spec.peds_min, spec.peds_max));
    for (int p = 0; p < n; ++p) {
      const std::int64_t id = static_cast<std::int64_t>(sc) * 10000 + p;
      double x = rng.uniform(-spec.spawn_extent, spec.spawn_extent);
      double y = rng.uniform(-spec.spawn_extent, spec.spawn_extent);
      double heading = rng.uniform(0.0, two_pi);
      double speed = std::max(0.0, rng.normal(spec.speed_mean, spec.speed_std));
      for (int f = 0; f < spec.frames_per_scene; ++f) {
        records.push_back({frame0 + f, id, x, y});
        if (spec.heading_noise_std > 0)
          heading += rng.normal(0.0, spec.heading_noise_std);
        x += speed * spec.frame_interval * std::cos(heading);
        y += speed * spec.frame_interval * std::sin(heading);
      }
    }
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame, a.ped_id) < std::tie(b.frame, b.ped_id);
  });
  return records;
}

DomainLayout discover_domain(const std::filesystem::path& root) {
  DomainLayout d;
  d.root = root;
  for (auto [split, out] :
       {std::pair{"train", &d.train}, {"val", &d.val}, {"test", &d.test}}) {
    const auto dir = root / split;
    if (!std::filesystem::is_directory(dir)) continue;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file()) out->push_back(e.path());
    std::sort(out->begin(), out->end());
  }
  if (d.train.empty() && d.val.empty() && d.test.empty())
    throw ProtocolError("domain " + root.string() +
                        " has no train/, val/ or test/ files");
  return d;
}

std::vector<SequenceSample> load_split_sequences(
    const std::vector<std::filesystem::path>& files, int l_obs, int l_pred,
    int stride) {
  std::vector<SequenceSample> all;
  for (const auto& f : files) {
    auto samples = build_sequences(load_domain(f), l_obs, l_pred, stride);
    for (auto& s : samples) {
      decentralize(s);
      all.push_back(std::move(s));
    }
  }
  return all;
}

void write_trajectory_file(const std::filesystem::path& path,
                           const std::vector<RawRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << std::fixed;
  for (const auto& r : records)
    out << r.frame << " " << r.ped_id << " " << r.x << " " << r.y << "\n";
}

void write_synthetic_domain(const std::filesystem::path& root,
                            const SyntheticDomainSpec& spec) {
  const auto records = generate_synthetic_domain(spec);
  std::map<std::int64_t, std::vector<RawRecord>> by_scene;
  for (const auto& r : records)
    by_scene[r.frame / spec.frames_per_scene].push_back(r);

  for (const char* split : {"train", "val", "test"})
    std::filesystem::create_directories(root / split);

  int idx = 0;
  const int n = static_cast<int>(by_scene.size());
  const int n_train = std::max(1, static_cast<int>(n * 0.6));
  const int n_val = std::max(1, static_cast<int>(n * 0.2));
  for (const auto& [scene, recs] : by_scene) {
    const char* split = idx < n_train           ? "train"
                        : idx < n_train + n_val ? "val"
                                                : "test";
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03d.txt", idx);
    write_trajectory_file(root / split / name, recs);
    ++idx;
  }
}

}  // namespace tgnn
