#include "marpo/run_io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "marpo/errors.hpp"

namespace marpo {
namespace {

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ValidationError("invalid value '" + std::string(value) + "' for " + std::string(key));
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(key, text);
  return v;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(key, text);
  return v;
}

std::size_t parse_size(std::string_view key, std::string_view text) {
  return static_cast<std::size_t>(parse_unsigned(key, text));
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  bad_value(key, text);
}

std::string format_exact(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "algorithm",     "iterations",       "epochs",        "minibatch_size",
      "rollout_steps", "alpha",            "sigma",         "beta",
      "kl_bias",       "baseline_epsilon", "learning_rate", "gamma",
      "lambda",        "seed",             "env_name",      "eval_episodes",
      "eval_interval", "clip_mode",        "advantage_selection",
      "next_target_scale", "value_coef",   "normalize_advantages",
      "optimizer",     "hidden_width",     "hidden_layers", "record_wall_time"};
  return keys;
}

void set_config_value(TrainConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  if (key == "algorithm") {
    if (v == "marpo") c.algorithm = Algorithm::kMarpo;
    else if (v == "mappo") c.algorithm = Algorithm::kMappo;
    else bad_value(key, v);
  } else if (key == "iterations") c.iterations = parse_size(key, v);
  else if (key == "epochs") c.epochs = parse_size(key, v);
  else if (key == "minibatch_size") c.minibatch_size = parse_size(key, v);
  else if (key == "rollout_steps") c.rollout_steps = parse_size(key, v);
  else if (key == "alpha") c.alpha = parse_double(key, v);
  else if (key == "sigma") c.sigma = parse_double(key, v);
  else if (key == "beta") c.beta = parse_double(key, v);
  else if (key == "kl_bias") c.kl_bias = parse_double(key, v);
  else if (key == "baseline_epsilon") c.baseline_epsilon = parse_double(key, v);
  else if (key == "learning_rate") c.learning_rate = parse_double(key, v);
  else if (key == "gamma") c.gamma = parse_double(key, v);
  else if (key == "lambda") c.lambda = parse_double(key, v);
  else if (key == "seed") c.seed = parse_unsigned(key, v);
  else if (key == "env_name") {
    if (v.empty()) bad_value(key, v);
    c.env_name = std::string(v);
  } else if (key == "eval_episodes") c.eval_episodes = parse_size(key, v);
  else if (key == "eval_interval") c.eval_interval = parse_size(key, v);
  else if (key == "clip_mode") {
    if (v == "dynamic") c.clip_mode = ClipMode::kDynamic;
    else if (v == "fixed") c.clip_mode = ClipMode::kFixed;
    else bad_value(key, v);
  } else if (key == "advantage_selection") {
    if (v == "next") c.advantage_selection = AdvantageSelection::kNext;
    else if (v == "current") c.advantage_selection = AdvantageSelection::kCurrent;
    else bad_value(key, v);
  } else if (key == "next_target_scale") c.next_target_scale = parse_double(key, v);
  else if (key == "value_coef") c.value_coef = parse_double(key, v);
  else if (key == "normalize_advantages") c.normalize_advantages = parse_bool(key, v);
  else if (key == "optimizer") {
    if (v == "adam") c.optimizer = OptimizerKind::kAdam;
    else if (v == "sgd") c.optimizer = OptimizerKind::kSgd;
    else bad_value(key, v);
  } else if (key == "hidden_width") c.hidden_width = parse_size(key, v);
  else if (key == "hidden_layers") c.hidden_layers = parse_size(key, v);
  else if (key == "record_wall_time") c.record_wall_time = parse_bool(key, v);
  else throw ValidationError("unknown config key '" + std::string(key) + "'");
}

std::string get_config_value(const TrainConfig& c, std::string_view key) {
  if (key == "algorithm") return c.algorithm == Algorithm::kMarpo ? "marpo" : "mappo";
  if (key == "iterations") return std::to_string(c.iterations);
  if (key == "epochs") return std::to_string(c.epochs);
  if (key == "minibatch_size") return std::to_string(c.minibatch_size);
  if (key == "rollout_steps") return std::to_string(c.rollout_steps);
  if (key == "alpha") return format_exact(c.alpha);
  if (key == "sigma") return format_exact(c.sigma);
  if (key == "beta") return format_exact(c.beta);
  if (key == "kl_bias") return format_exact(c.kl_bias);
  if (key == "baseline_epsilon") return format_exact(c.baseline_epsilon);
  if (key == "learning_rate") return format_exact(c.learning_rate);
  if (key == "gamma") return format_exact(c.gamma);
  if (key == "lambda") return format_exact(c.lambda);
  if (key == "seed") return std::to_string(c.seed);
  if (key == "env_name") return c.env_name;
  if (key == "eval_episodes") return std::to_string(c.eval_episodes);
  if (key == "eval_interval") return std::to_string(c.eval_interval);
  if (key == "clip_mode") return c.clip_mode == ClipMode::kDynamic ? "dynamic" : "fixed";
  if (key == "advantage_selection") {
    return c.advantage_selection == AdvantageSelection::kNext ? "next" : "current";
  }
  if (key == "next_target_scale") return format_exact(c.next_target_scale);
  if (key == "value_coef") return format_exact(c.value_coef);
  if (key == "normalize_advantages") return c.normalize_advantages ? "true" : "false";
  if (key == "optimizer") return c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
  if (key == "hidden_width") return std::to_string(c.hidden_width);
  if (key == "hidden_layers") return std::to_string(c.hidden_layers);
  if (key == "record_wall_time") return c.record_wall_time ? "true" : "false";
  throw ValidationError("unknown config key '" + std::string(key) + "'");
}

std::string serialize_config(const TrainConfig& config) {
  std::string out;
  for (const auto& key : config_keys()) {
    out += key + " = " + get_config_value(config, key) + "\n";
  }
  return out;
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto newline = text.find('\n');
    std::string_view line = text.substr(0, newline);
    text = newline == std::string_view::npos ? std::string_view{} : text.substr(newline + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string run_id(const TrainConfig& config) {
  // FNV-1a over the serialized config.
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(config)) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buffer, 12);
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> columns{
      "iteration", "env_steps",   "mean_return",   "win_rate", "measured_kl",
      "target_kl", "bound_lower", "bound_upper",   "clip_fraction", "l0",
      "l1",        "entropy",     "value_loss",    "wall_time_s"};
  return columns;
}

std::string format_metric(double value) {
  if (!std::isfinite(value)) return "nan";
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  const auto& columns = metrics_columns();
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const MetricsRow& r : rows) {
    out << r.iteration << ',' << r.env_steps;
    for (double v : {r.mean_return, r.win_rate, r.measured_kl, r.target_kl, r.bound_lower,
                     r.bound_upper, r.clip_fraction, r.l0, r.l1, r.entropy, r.value_loss,
                     r.wall_time_s}) {
      out << ',' << format_metric(v);
    }
    out << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("metrics csv: missing header");
  std::string expected;
  for (const auto& c : metrics_columns()) expected += (expected.empty() ? "" : ",") + c;
  if (line != expected) throw ValidationError("metrics csv: unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, ',');) fields.push_back(field);
    if (fields.size() != metrics_columns().size()) {
      throw ValidationError("metrics csv: wrong field count");
    }
    auto real = [](const std::string& f) {
      return f == "nan" ? std::numeric_limits<double>::quiet_NaN() : parse_double("metric", f);
    };
    MetricsRow r;
    r.iteration = parse_size("iteration", fields[0]);
    r.env_steps = parse_size("env_steps", fields[1]);
    double* targets[] = {&r.mean_return, &r.win_rate, &r.measured_kl, &r.target_kl,
                         &r.bound_lower, &r.bound_upper, &r.clip_fraction, &r.l0,
                         &r.l1, &r.entropy, &r.value_loss, &r.wall_time_s};
    for (std::size_t i = 0; i < std::size(targets); ++i) *targets[i] = real(fields[i + 2]);
    rows.push_back(r);
  }
  return rows;
}

std::filesystem::path create_run_directory(const std::filesystem::path& root,
                                           std::uint64_t seed) {
  std::filesystem::create_directories(root);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &utc);
  const std::string base = std::string(stamp) + "_seed" + std::to_string(seed);
  for (int suffix = 0;; ++suffix) {
    std::filesystem::path candidate = root / (suffix == 0 ? base : base + "_" + std::to_string(suffix));
    // create_directory returns false when the directory already exists.
    if (std::filesystem::create_directory(candidate)) return candidate;
  }
}

}  // namespace marpo
