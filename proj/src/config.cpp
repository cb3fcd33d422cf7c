#include "tgnn/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "tgnn/error.hpp"

namespace tgnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value `" + value + "` for " + key);
  }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const auto [p, ec] =
      std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || p != value.data() + value.size())
    throw ConfigError("config: bad integer value `" + value + "` for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: bad boolean value `" + value + "` for " + key);
}

}  // namespace

const char* to_string(AdjacencyVariant v) {
  switch (v) {
    case AdjacencyVariant::kL2: return "l2";
    case AdjacencyVariant::kReciprocal: return "reciprocal";
    case AdjacencyVariant::kGaussian: return "gaussian";
    case AdjacencyVariant::kRational: return "rational";
  }
  return "?";
}

const char* to_string(NormalizationMode m) {
  return m == NormalizationMode::kAsWritten ? "as_written" : "symmetric";
}

const char* to_string(AlignmentKind k) {
  switch (k) {
    case AlignmentKind::kL2: return "l2";
    case AlignmentKind::kMmd: return "mmd";
    case AlignmentKind::kCoral: return "coral";
    case AlignmentKind::kAvgPoolL2: return "avg_pool_l2";
    case AlignmentKind::kLinearPoolL2: return "linear_pool_l2";
  }
  return "?";
}

const char* to_string(AlignDivisor d) {
  return d == AlignDivisor::kDf ? "df" : "dv";
}

void apply_override(TrainConfig& c, const std::string& key,
                    const std::string& value) {
  if (key == "adjacency_kind") {
    if (value == "l2") c.adjacency.variant = AdjacencyVariant::kL2;
    else if (value == "reciprocal") c.adjacency.variant = AdjacencyVariant::kReciprocal;
    else if (value == "gaussian") c.adjacency.variant = AdjacencyVariant::kGaussian;
    else if (value == "rational") c.adjacency.variant = AdjacencyVariant::kRational;
    else throw ConfigError("config: unknown adjacency_kind `" + value + "`");
  } else if (key == "gaussian_sigma") {
    c.adjacency.sigma = parse_double(key, value);
  } else if (key == "adjacency_epsilon") {
    c.adjacency.epsilon = parse_double(key, value);
  } else if (key == "adjacency_c") {
    c.adjacency.c = parse_double(key, value);
  } else if (key == "normalization_mode") {
    if (value == "as_written") c.normalization = NormalizationMode::kAsWritten;
    else if (value == "symmetric") c.normalization = NormalizationMode::kSymmetric;
    else throw ConfigError("config: unknown normalization_mode `" + value + "`");
  } else if (key == "alignment_kind") {
    if (value == "l2") c.alignment = AlignmentKind::kL2;
    else if (value == "mmd") c.alignment = AlignmentKind::kMmd;
    else if (value == "coral") c.alignment = AlignmentKind::kCoral;
    else if (value == "avg_pool_l2") c.alignment = AlignmentKind::kAvgPoolL2;
    else if (value == "linear_pool_l2") c.alignment = AlignmentKind::kLinearPoolL2;
    else throw ConfigError("config: unknown alignment_kind `" + value + "`");
  } else if (key == "align_divisor") {
    if (value == "df") c.align_divisor = AlignDivisor::kDf;
    else if (value == "dv") c.align_divisor = AlignDivisor::kDv;
    else throw ConfigError("config: unknown align_divisor `" + value + "`");
  } else if (key == "d_f") {
    c.d_f = static_cast<int>(parse_int(key, value));
  } else if (key == "d_h") {
    c.d_h = static_cast<int>(parse_int(key, value));
  } else if (key == "n_max") {
    c.n_max = static_cast<int>(parse_int(key, value));
  } else if (key == "l_obs") {
    c.l_obs = static_cast<int>(parse_int(key, value));
  } else if (key == "l_pred") {
    c.l_pred = static_cast<int>(parse_int(key, value));
  } else if (key == "lambda") {
    c.lambda = parse_double(key, value);
  } else if (key == "epochs") {
    c.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "batch_size") {
    c.batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "lr_initial") {
    c.lr_initial = parse_double(key, value);
  } else if (key == "lr_after_drop") {
    c.lr_after_drop = parse_double(key, value);
  } else if (key == "lr_drop_epoch") {
    c.lr_drop_epoch = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "grad_clip") {
    c.grad_clip = parse_double(key, value);
  } else if (key == "use_bias") {
    c.use_bias = parse_bool(key, value);
  } else if (key == "stride") {
    c.stride = static_cast<int>(parse_int(key, value));
  } else if (key == "frame_interval") {
    c.frame_interval = parse_double(key, value);
  } else if (key == "best_of_k") {
    c.best_of_k = static_cast<int>(parse_int(key, value));
  } else if (key == "single_best_by_ade") {
    c.single_best_by_ade = parse_bool(key, value);
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = static_cast<int>(parse_int(key, value));
  } else {
    throw ConfigError("config: unknown key `" + key + "`");
  }
}

void apply_config_text(TrainConfig& base, const std::string& text,
                       const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + origin + ":" + std::to_string(line_no) +
                        ": expected `key = value`");
    apply_override(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

TrainConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  TrainConfig c;
  apply_config_text(c, buf.str(), path.string());
  return c;
}

void validate(const TrainConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  require(c.lambda >= 0.0, "lambda must be >= 0");
  require(c.epochs >= 1, "epochs must be >= 1");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.lr_initial > 0.0 && c.lr_after_drop > 0.0,
          "learning rates must be positive");
  require(c.d_f >= 1 && c.d_h >= 1 && c.n_max >= 1, "widths must be >= 1");
  require(c.l_obs >= 1 && c.l_pred >= 1, "window lengths must be >= 1");
  require(c.stride >= 1, "stride must be >= 1");
  require(c.frame_interval > 0.0, "frame_interval must be positive");
  require(c.best_of_k >= 1, "best_of_k must be >= 1");
  require(c.adjacency.sigma > 0.0, "gaussian_sigma must be positive");
  require(c.adjacency.epsilon > 0.0, "adjacency_epsilon must be positive");
  require(c.adjacency.c > 0.0, "adjacency_c must be positive");
  require(c.grad_clip >= 0.0, "grad_clip must be >= 0");
  require(c.checkpoint_every >= 1, "checkpoint_every must be >= 1");
}

std::string canonical_config(const TrainConfig& c) {
  std::map<std::string, std::string> kv;
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  kv["adjacency_kind"] = to_string(c.adjacency.variant);
  kv["gaussian_sigma"] = num(c.adjacency.sigma);
  kv["adjacency_epsilon"] = num(c.adjacency.epsilon);
  kv["adjacency_c"] = num(c.adjacency.c);
  kv["normalization_mode"] = to_string(c.normalization);
  kv["alignment_kind"] = to_string(c.alignment);
  kv["align_divisor"] = to_string(c.align_divisor);
  kv["d_f"] = std::to_string(c.d_f);
  kv["d_h"] = std::to_string(c.d_h);
  kv["n_max"] = std::to_string(c.n_max);
  kv["l_obs"] = std::to_string(c.l_obs);
  kv["l_pred"] = std::to_string(c.l_pred);
  kv["lambda"] = num(c.lambda);
  kv["epochs"] = std::to_string(c.epochs);
  kv["batch_size"] = std::to_string(c.batch_size);
  kv["lr_initial"] = num(c.lr_initial);
  kv["lr_after_drop"] = num(c.lr_after_drop);
  kv["lr_drop_epoch"] = std::to_string(c.lr_drop_epoch);
  kv["seed"] = std::to_string(c.seed);
  kv["grad_clip"] = num(c.grad_clip);
  kv["use_bias"] = c.use_bias ? "true" : "false";
  kv["stride"] = std::to_string(c.stride);
  kv["frame_interval"] = num(c.frame_interval);
  kv["best_of_k"] = std::to_string(c.best_of_k);
  kv["single_best_by_ade"] = c.single_best_by_ade ? "true" : "false";
  kv["checkpoint_every"] = std::to_string(c.checkpoint_every);

  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string config_hash(const TrainConfig& c) {
  const std::string text = canonical_config(c);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tgnn
