#pragma once

#include <cmath>
#include <string>

#include "geoflow/errors.hpp"
#include "geoflow/sphere.hpp"

namespace geoflow {

enum class ScheduleKind { Linear, Cosine };

// Noise schedule beta(t): [0,1] -> [0,1] with beta(0) = 0, beta(1) = 1.
// t_clamp_min regularizes divisions by beta(t) near t = 0.
struct Schedule {
  ScheduleKind kind = ScheduleKind::Linear;
  double t_clamp_min = 1e-4;
};

namespace detail {
inline void check_t(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("t outside [0, 1]");
}
}  // namespace detail

inline double beta(const Schedule& s, double t) {
  detail::check_t(t);
  if (s.kind == ScheduleKind::Linear) return t;
  const double v = std::sin(kPi * t / 2.0);
  return v * v;
}

inline double beta_dot(const Schedule& s, double t) {
  detail::check_t(t);
  if (s.kind == ScheduleKind::Linear) return 1.0;
  return (kPi / 2.0) * std::sin(kPi * t);
}

inline std::string to_string(ScheduleKind k) {
  return k == ScheduleKind::Linear ? "linear" : "cosine";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "cosine") return ScheduleKind::Cosine;
  throw ConfigError("unknown schedule kind: " + s);
}

}  // namespace geoflow
