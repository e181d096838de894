#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geoflow/checkpoint.hpp"
#include "geoflow/errors.hpp"
#include "geoflow/pipeline.hpp"
#include "geoflow/schedule.hpp"

namespace geoflow {

// Flat key = value run configuration. Every key is validated at load and
// unknown keys are rejected; command line flags override file values.
struct RunConfig {
  std::string method = "rfm";
  std::string schedule = "linear";
  double t_clamp_min = 1e-4;
  std::vector<int> hidden{256, 256, 256};
  int time_dim = 64;
  std::string activation = "gelu";
  double learning_rate = 1e-3;
  int batch = 256;
  int train_steps = 10000;
  int sample_steps = 0;  // 0 = method default (100 for ddpm, 250 otherwise)
  int draws = 32;
  int density_steps = 200;
  int grid_lat = 72;
  int grid_lon = 144;
  int localizability_samples = 10000;
  std::string r_km = "50";  // number or "unbounded"
  double alpha = 0.5;
  int anchors = 10;
  double tau = 0.07;
  int proj_dim = 128;
  double head_learning_rate = 1e-3;
  int head_steps = 2000;
  int head_batch = 64;
  std::string condition = "raw";
  std::string fallback = "generative-point";
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  int effective_sample_steps() const {
    if (sample_steps > 0) return sample_steps;
    return method == "ddpm" ? 100 : 250;
  }

  std::optional<double> parsed_r_km() const {
    if (r_km == "unbounded" || r_km == "inf") return std::nullopt;
    try {
      const double v = std::stod(r_km);
      if (!(v > 0.0)) throw ConfigError("r_km must be positive");
      return v;
    } catch (const std::invalid_argument&) {
      throw ConfigError("r_km must be a number or 'unbounded'");
    }
  }

  void validate() const {
    method_from_string(method);
    schedule_kind_from_string(schedule);
    if (!(t_clamp_min > 0.0 && t_clamp_min < 1.0))
      throw ConfigError("t_clamp_min must lie in (0, 1)");
    if (hidden.empty()) throw ConfigError("hidden widths must be non-empty");
    for (const int w : hidden)
      if (w < 1) throw ConfigError("hidden widths must be positive");
    if (time_dim < 2 || time_dim % 2 != 0)
      throw ConfigError("time_dim must be a positive even number");
    if (activation != "gelu" && activation != "relu")
      throw ConfigError("activation must be gelu or relu");
    if (!(learning_rate > 0.0) || !(head_learning_rate > 0.0))
      throw ConfigError("learning rates must be positive");
    if (batch < 1 || train_steps < 0 || sample_steps < 0 || draws < 1)
      throw ConfigError("batch/steps/draws out of range");
    if (density_steps < 1 || grid_lat < 2 || grid_lon < 2)
      throw ConfigError("density grid settings out of range");
    if (localizability_samples < 1)
      throw ConfigError("localizability_samples must be >= 1");
    parsed_r_km();
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw ConfigError("alpha must lie in [0, 1]");
    if (anchors < 1) throw ConfigError("anchors must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (proj_dim < 1 || head_steps < 0 || head_batch < 2)
      throw ConfigError("head settings out of range");
    condition_from_string(condition);
    fallback_from_string(fallback);
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
      throw ConfigError("test_fraction must lie in (0, 1)");
  }

  Schedule make_schedule() const {
    return Schedule{schedule_kind_from_string(schedule), t_clamp_min};
  }

  void set(const std::string& key, const std::string& value);
};

namespace detail {

inline int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

inline std::vector<int> parse_int_list(const std::string& key,
                                       const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_int(key, tok));
  if (out.empty()) throw ConfigError("key '" + key + "' expects a list");
  return out;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "method") method = value;
  else if (key == "schedule") schedule = value;
  else if (key == "t_clamp_min") t_clamp_min = detail::parse_double(key, value);
  else if (key == "hidden") hidden = detail::parse_int_list(key, value);
  else if (key == "time_dim") time_dim = detail::parse_int(key, value);
  else if (key == "activation") activation = value;
  else if (key == "lr") learning_rate = detail::parse_double(key, value);
  else if (key == "batch") batch = detail::parse_int(key, value);
  else if (key == "train_steps") train_steps = detail::parse_int(key, value);
  else if (key == "sample_steps") sample_steps = detail::parse_int(key, value);
  else if (key == "draws") draws = detail::parse_int(key, value);
  else if (key == "density_steps") density_steps = detail::parse_int(key, value);
  else if (key == "grid_lat") grid_lat = detail::parse_int(key, value);
  else if (key == "grid_lon") grid_lon = detail::parse_int(key, value);
  else if (key == "localizability_samples")
    localizability_samples = detail::parse_int(key, value);
  else if (key == "r_km") r_km = value;
  else if (key == "alpha") alpha = detail::parse_double(key, value);
  else if (key == "anchors") anchors = detail::parse_int(key, value);
  else if (key == "tau") tau = detail::parse_double(key, value);
  else if (key == "proj_dim") proj_dim = detail::parse_int(key, value);
  else if (key == "head_lr")
    head_learning_rate = detail::parse_double(key, value);
  else if (key == "head_steps") head_steps = detail::parse_int(key, value);
  else if (key == "head_batch") head_batch = detail::parse_int(key, value);
  else if (key == "condition") condition = value;
  else if (key == "fallback") fallback = value;
  else if (key == "test_fraction")
    test_fraction = detail::parse_double(key, value);
  else if (key == "seed")
    seed = static_cast<std::uint64_t>(
        std::stoull(value));
  else
    throw ConfigError("unknown config key: " + key);
}

// '#' starts a comment; keys and values are trimmed. The whole file is
// parsed before any value is applied, so a bad key cannot leave a
// half-applied configuration.
inline RunConfig load_config(const std::string& path,
                             RunConfig base = RunConfig{}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::string line;
  long lineno = 0;
  std::vector<std::pair<std::string, std::string>> kv;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not key = value");
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  RunConfig cfg = std::move(base);
  for (const auto& [k, v] : kv) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

}  // namespace geoflow
