#include "tgnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "tgnn/error.hpp"

namespace tgnn {

ObservedSample observed_only(const SequenceSample& sample) {
  ObservedSample obs;
  obs.ped_ids = sample.ped_ids;
  obs.l_obs = sample.l_obs;
  obs.rel_obs.reserve(static_cast<size_t>(sample.n() * sample.l_obs * 2));
  for (int p = 0; p < sample.n(); ++p)
    for (int f = 0; f < sample.l_obs; ++f) {
      obs.rel_obs.push_back(sample.rel_at(p, f, 0));
      obs.rel_obs.push_back(sample.rel_at(p, f, 1));
    }
  return obs;
}

std::vector<std::pair<int, int>> pair_batches(int source_batches,
                                              int target_batches, Rng& rng) {
  if (source_batches < 1)
    throw ProtocolError("pair_batches: source batches required");
  if (target_batches < 1)
    throw ProtocolError("target observed trajectories required");
  std::vector<int> order(static_cast<size_t>(target_batches));
  auto reshuffle = [&] {
    for (int i = 0; i < target_batches; ++i) order[static_cast<size_t>(i)] = i;
    rng.shuffle(order);
  };
  reshuffle();
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<size_t>(source_batches));
  int cursor = 0;
  for (int s = 0; s < source_batches; ++s) {
    if (cursor == target_batches) {
      reshuffle();
      cursor = 0;
    }
    pairs.emplace_back(s, order[static_cast<size_t>(cursor++)]);
  }
  return pairs;
}

namespace {

std::vector<std::vector<int>> chunk(const std::vector<int>& indices, int size) {
  std::vector<std::vector<int>> batches;
  for (size_t i = 0; i < indices.size(); i += static_cast<size_t>(size)) {
    const size_t end = std::min(indices.size(), i + static_cast<size_t>(size));
    batches.emplace_back(indices.begin() + static_cast<ptrdiff_t>(i),
                         indices.begin() + static_cast<ptrdiff_t>(end));
  }
  return batches;
}

Tensor future_truth(const SequenceSample& s) {
  std::vector<double> truth;
  truth.reserve(static_cast<size_t>(s.n() * s.l_pred * 2));
  for (int p = 0; p < s.n(); ++p)
    for (int f = s.l_obs; f < s.frames(); ++f) {
      truth.push_back(s.rel_at(p, f, 0));
      truth.push_back(s.rel_at(p, f, 1));
    }
  return Tensor::from({s.n(), s.l_pred, 2}, std::move(truth));
}

}  // namespace

Trainer::Trainer(std::vector<SequenceSample> source,
                 std::vector<ObservedSample> target, const TrainConfig& config)
    : config_(config),
      model_(config),
      optimizer_(model_.named_params()),
      source_(std::move(source)),
      target_(std::move(target)),
      rng_(Rng(config.seed).fork(2)) {
  if (source_.empty())
    throw ProtocolError("training requires source samples (train split)");
  if (target_.empty())
    throw ProtocolError("target observed trajectories required");
}

void Trainer::run_one_epoch() {
  const int epoch = epoch_ + 1;
  const double lr =
      epoch <= config_.lr_drop_epoch ? config_.lr_initial : config_.lr_after_drop;

  std::vector<int> src_idx(source_.size());
  for (size_t i = 0; i < src_idx.size(); ++i) src_idx[i] = static_cast<int>(i);
  rng_.shuffle(src_idx);
  std::vector<int> tgt_idx(target_.size());
  for (size_t i = 0; i < tgt_idx.size(); ++i) tgt_idx[i] = static_cast<int>(i);
  rng_.shuffle(tgt_idx);

  const auto src_batches = chunk(src_idx, config_.batch_size);
  const auto tgt_batches = chunk(tgt_idx, config_.batch_size);
  const auto pairs = pair_batches(static_cast<int>(src_batches.size()),
                                  static_cast<int>(tgt_batches.size()), rng_);

  double sum_pre = 0.0, sum_align = 0.0, sum_total = 0.0;
  int step = 0;
  for (const auto& [si, ti] : pairs) {
    ++step;
    Tape tape;

    std::vector<Tensor> src_flat, src_nll;
    for (int idx : src_batches[static_cast<size_t>(si)]) {
      const auto& s = source_[static_cast<size_t>(idx)];
      Tensor encoded = model_.encode(tape, s.rel_xy, s.n(), s.frames());
      src_flat.push_back(
          flatten_features(tape, encoded, DomainTag::kSource).matrix);
      GaussianHead head = model_.predict(tape, encoded);
      src_nll.push_back(nll_loss(tape, head, future_truth(s)));
    }
    FeatureVectorSet src_set{concat(tape, src_flat, 0), DomainTag::kSource};

    std::vector<Tensor> tgt_flat;
    for (int idx : tgt_batches[static_cast<size_t>(ti)]) {
      const auto& t = target_[static_cast<size_t>(idx)];
      Tensor encoded = model_.encode(tape, t.rel_obs, t.n(), t.l_obs);
      tgt_flat.push_back(
          flatten_features(tape, encoded, DomainTag::kTarget).matrix);
    }
    FeatureVectorSet tgt_set{concat(tape, tgt_flat, 0), DomainTag::kTarget};

    Tensor l_pre = scale(tape, sum_all(tape, concat(tape, src_nll, 0)),
                         1.0 / static_cast<double>(src_nll.size()));
    Tensor l_align =
        alignment_loss(tape, src_set, tgt_set, model_.adapt(),
                       config_.alignment, config_.align_divisor, config_.d_f);
    Tensor loss = add(tape, l_pre, scale(tape, l_align, config_.lambda));

    if (!std::isfinite(loss.value()))
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                          ", step " + std::to_string(step));
    tape.backward(loss);
    optimizer_.step(lr, config_.grad_clip);

    sum_pre += l_pre.value();
    sum_align += l_align.value();
    sum_total += loss.value();
    step_losses_.push_back(loss.value());
  }

  const double steps = static_cast<double>(pairs.size());
  history_.push_back({sum_pre / steps, sum_align / steps, sum_total / steps, lr});
  epoch_ = epoch;
}

void Trainer::run_epochs(int count) {
  for (int i = 0; i < count; ++i) run_one_epoch();
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.config = config_;
  ckpt.epoch = epoch_;
  ckpt.rng_state = rng_.state();
  ckpt.history = history_;
  for (const auto& [name, tensor] : optimizer_.params())
    ckpt.params.emplace_back(
        name, std::pair{tensor.shape(), std::vector<double>(
                                            tensor.values().begin(),
                                            tensor.values().end())});
  auto& states = const_cast<AdamOptimizer&>(optimizer_).states();
  std::int64_t step = 0;
  for (size_t i = 0; i < states.size(); ++i) {
    const auto& [name, tensor] = optimizer_.params()[i];
    step = std::max(step, states[i].step);
    auto m = states[i].m.empty()
                 ? std::vector<double>(tensor.values().size(), 0.0)
                 : states[i].m;
    auto v = states[i].v.empty()
                 ? std::vector<double>(tensor.values().size(), 0.0)
                 : states[i].v;
    ckpt.opt_m.emplace_back(name, std::pair{tensor.shape(), std::move(m)});
    ckpt.opt_v.emplace_back(name, std::pair{tensor.shape(), std::move(v)});
  }
  ckpt.opt_step = step;
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  model_.restore(ckpt.params);
  std::map<std::string, const std::vector<double>*> m_by_name, v_by_name;
  for (const auto& [name, payload] : ckpt.opt_m) m_by_name[name] = &payload.second;
  for (const auto& [name, payload] : ckpt.opt_v) v_by_name[name] = &payload.second;
  auto& states = optimizer_.states();
  for (size_t i = 0; i < states.size(); ++i) {
    const auto& name = optimizer_.params()[i].first;
    if (m_by_name.count(name)) states[i].m = *m_by_name[name];
    if (v_by_name.count(name)) states[i].v = *v_by_name[name];
    states[i].step = ckpt.opt_step;
  }
  epoch_ = ckpt.epoch;
  history_ = ckpt.history;
  rng_ = Rng::from_state(ckpt.rng_state);
}

// ---------------------------------------------------------------------------
// Checkpoint serialization: little-endian binary with a magic and a version.

namespace {

constexpr char kMagic[8] = {'T', 'G', 'N', 'N', 'C', 'K', 'P', '\n'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw IoError("checkpoint truncated");
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw IoError("checkpoint truncated");
  return v;
}
double read_f64(std::istream& in) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw IoError("checkpoint truncated");
  return v;
}
std::string read_string(std::istream& in) {
  const auto len = read_u32(in);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw IoError("checkpoint truncated");
  return s;
}

using NamedArrays =
    std::vector<std::pair<std::string, std::pair<Shape, std::vector<double>>>>;

void write_arrays(std::ostream& out, const NamedArrays& arrays) {
  write_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, payload] : arrays) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(payload.first.size()));
    for (int d : payload.first) write_u32(out, static_cast<std::uint32_t>(d));
    for (double v : payload.second) write_f64(out, v);
  }
}

NamedArrays read_arrays(std::istream& in) {
  NamedArrays arrays;
  const auto count = read_u32(in);
  arrays.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    const auto rank = read_u32(in);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_u32(in));
    std::vector<double> values(static_cast<size_t>(numel(shape)));
    for (auto& v : values) v = read_f64(in);
    arrays.emplace_back(std::move(name),
                        std::pair{std::move(shape), std::move(values)});
  }
  return arrays;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, ckpt.version);
  write_string(out, canonical_config(ckpt.config));
  write_u32(out, static_cast<std::uint32_t>(ckpt.epoch));
  for (auto s : ckpt.rng_state) write_u64(out, s);
  write_u32(out, static_cast<std::uint32_t>(ckpt.history.size()));
  for (const auto& h : ckpt.history) {
    write_f64(out, h.l_pre);
    write_f64(out, h.l_align);
    write_f64(out, h.l);
    write_f64(out, h.lr);
  }
  write_arrays(out, ckpt.params);
  write_u64(out, static_cast<std::uint64_t>(ckpt.opt_step));
  write_arrays(out, ckpt.opt_m);
  write_arrays(out, ckpt.opt_v);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  Checkpoint ckpt;
  ckpt.version = read_u32(in);
  if (ckpt.version != 1)
    throw IoError("unsupported checkpoint version " +
                  std::to_string(ckpt.version));
  apply_config_text(ckpt.config, read_string(in), path.string());
  ckpt.epoch = static_cast<int>(read_u32(in));
  for (auto& s : ckpt.rng_state) s = read_u64(in);
  const auto hist = read_u32(in);
  ckpt.history.resize(hist);
  for (auto& h : ckpt.history) {
    h.l_pre = read_f64(in);
    h.l_align = read_f64(in);
    h.l = read_f64(in);
    h.lr = read_f64(in);
  }
  ckpt.params = read_arrays(in);
  ckpt.opt_step = static_cast<std::int64_t>(read_u64(in));
  ckpt.opt_m = read_arrays(in);
  ckpt.opt_v = read_arrays(in);
  return ckpt;
}

namespace {

void write_train_log(const std::filesystem::path& path,
                     const std::vector<EpochLoss>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,L_pre,L_align,L,lr\n";
  out.precision(12);
  for (size_t i = 0; i < history.size(); ++i)
    out << (i + 1) << "," << history[i].l_pre << "," << history[i].l_align
        << "," << history[i].l << "," << history[i].lr << "\n";
}

}  // namespace

TrainResult train_task(const TaskSpec& task, const TrainConfig& config,
                       const std::optional<std::filesystem::path>& resume_from) {
  validate(config);
  const auto source = discover_domain(task.source);
  const auto target = discover_domain(task.target);
  if (source.train.empty())
    throw ProtocolError("source domain " + task.source.string() +
                        " has no train split");
  if (target.val.empty())
    throw ProtocolError("target domain " + task.target.string() +
                        " has no val split (observed trajectories required)");

  auto src_samples = load_split_sequences(source.train, config.l_obs,
                                          config.l_pred, config.stride);
  auto tgt_full = load_split_sequences(target.val, config.l_obs, config.l_pred,
                                       config.stride);
  std::vector<ObservedSample> tgt_obs;
  tgt_obs.reserve(tgt_full.size());
  for (const auto& s : tgt_full) tgt_obs.push_back(observed_only(s));

  TrainConfig effective = config;
  if (resume_from) {
    const auto ckpt = load_checkpoint(*resume_from);
    if (config_hash(ckpt.config) != config_hash(config))
      throw ContractError("resume: checkpoint config differs from the "
                          "requested config");
    effective = ckpt.config;
  }

  Trainer trainer(std::move(src_samples), std::move(tgt_obs), effective);
  if (resume_from) trainer.restore(load_checkpoint(*resume_from));

  std::filesystem::create_directories(task.out_dir);
  while (trainer.epoch() < effective.epochs) {
    trainer.run_epochs(1);
    if (trainer.epoch() % effective.checkpoint_every == 0 &&
        trainer.epoch() < effective.epochs) {
      char name[40];
      std::snprintf(name, sizeof(name), "checkpoint_ep%04d.tgnn",
                    trainer.epoch());
      save_checkpoint(task.out_dir / name, trainer.checkpoint());
    }
  }
  const auto final_path = task.out_dir / "checkpoint.tgnn";
  save_checkpoint(final_path, trainer.checkpoint());
  write_train_log(task.out_dir / "train_log.csv", trainer.history());
  return {final_path, trainer.history()};
}

}  // namespace tgnn
