#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "geoflow/errors.hpp"
#include "geoflow/fieldnet.hpp"
#include "geoflow/schedule.hpp"

namespace geoflow {

enum class Method { Ddpm, Fm, Rfm };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Ddpm: return "ddpm";
    case Method::Fm: return "fm";
    case Method::Rfm: return "rfm";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "ddpm") return Method::Ddpm;
  if (s == "fm") return Method::Fm;
  if (s == "rfm") return Method::Rfm;
  throw ConfigError("unknown method: " + s);
}

struct CheckpointMeta {
  Method method = Method::Rfm;
  ScheduleKind schedule = ScheduleKind::Linear;
  double t_clamp_min = 1e-4;
  std::uint64_t seed = 0;
  std::uint32_t train_steps = 0;
  std::vector<double> loss_curve;
};

inline Schedule schedule_of(const CheckpointMeta& meta) {
  return Schedule{meta.schedule, meta.t_clamp_min};
}

struct Checkpoint {
  FieldNet net;
  CheckpointMeta meta;
};

// Binary layout (little-endian, see docs/FORMATS.md):
//   magic "GEOFLOW1", u32 version, u32 method, u32 schedule, u32 activation,
//   u32 time_dim, u32 cond_dim, u32 layer_count, f64 t_clamp_min, u64 seed,
//   u32 train_steps, u32 loss_curve_len, per layer { u32 rows, u32 cols },
//   then per layer the row-major f64 weights followed by f64 biases, then
//   the loss curve.
namespace detail {

constexpr char kFieldMagic[8] = {'G', 'E', 'O', 'F', 'L', 'O', 'W', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ParseError("truncated checkpoint file");
  return v;
}

inline void put_doubles(std::ostream& os, const double* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), sizeof(double) * n);
}

inline void get_doubles(std::istream& is, double* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), sizeof(double) * n);
  if (!is) throw ParseError("truncated checkpoint file");
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const FieldNet& net,
                            const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open checkpoint for writing: " + path);
  os.write(detail::kFieldMagic, 8);
  detail::put<std::uint32_t>(os, 1);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(meta.method));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(meta.schedule));
  detail::put<std::uint32_t>(os,
                             static_cast<std::uint32_t>(net.activation));
  detail::put<std::uint32_t>(os,
                             static_cast<std::uint32_t>(net.time_embedding.dim));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(net.cond_dim));
  detail::put<std::uint32_t>(os,
                             static_cast<std::uint32_t>(net.layer_count()));
  detail::put<double>(os, meta.t_clamp_min);
  detail::put<std::uint64_t>(os, meta.seed);
  detail::put<std::uint32_t>(os, meta.train_steps);
  detail::put<std::uint32_t>(os,
                             static_cast<std::uint32_t>(meta.loss_curve.size()));
  for (const auto& w : net.weights) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(w.rows()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(w.cols()));
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const auto& w = net.weights[l];
    // row-major on disk
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      detail::put_doubles(os, w.row(r).eval().data(),
                          static_cast<std::size_t>(w.cols()));
    detail::put_doubles(os, net.biases[l].data(),
                        static_cast<std::size_t>(net.biases[l].size()));
  }
  if (!meta.loss_curve.empty())
    detail::put_doubles(os, meta.loss_curve.data(), meta.loss_curve.size());
  if (!os) throw ParseError("write failure: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kFieldMagic, 8) != 0)
    throw ParseError("not a GEOFLOW1 checkpoint: " + path);
  const auto version = detail::get<std::uint32_t>(is);
  if (version != 1)
    throw ParseError("unsupported checkpoint version " +
                     std::to_string(version));
  Checkpoint ck;
  ck.meta.method = static_cast<Method>(detail::get<std::uint32_t>(is));
  ck.meta.schedule = static_cast<ScheduleKind>(detail::get<std::uint32_t>(is));
  ck.net.activation = static_cast<Activation>(detail::get<std::uint32_t>(is));
  const auto time_dim = detail::get<std::uint32_t>(is);
  ck.net.time_embedding = TimeEmbedding::make(static_cast<int>(time_dim));
  ck.net.cond_dim = static_cast<int>(detail::get<std::uint32_t>(is));
  const auto layers = detail::get<std::uint32_t>(is);
  ck.meta.t_clamp_min = detail::get<double>(is);
  ck.meta.seed = detail::get<std::uint64_t>(is);
  ck.meta.train_steps = detail::get<std::uint32_t>(is);
  const auto curve_len = detail::get<std::uint32_t>(is);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(layers);
  for (auto& s : shapes) {
    s.first = detail::get<std::uint32_t>(is);
    s.second = detail::get<std::uint32_t>(is);
  }
  for (const auto& [rows, cols] : shapes) {
    Eigen::MatrixXd w(rows, cols);
    std::vector<double> row(cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      detail::get_doubles(is, row.data(), cols);
      for (std::uint32_t c = 0; c < cols; ++c) w(r, c) = row[c];
    }
    Eigen::VectorXd b(rows);
    detail::get_doubles(is, b.data(), rows);
    ck.net.weights.push_back(std::move(w));
    ck.net.biases.push_back(std::move(b));
  }
  ck.meta.loss_curve.resize(curve_len);
  if (curve_len > 0)
    detail::get_doubles(is, ck.meta.loss_curve.data(), curve_len);
  // shape sanity: chained layers ending in a 3-vector
  if (!ck.net.weights.empty()) {
    if (ck.net.weights.front().cols() != ck.net.input_dim())
      throw ParseError("checkpoint input width inconsistent with header");
    if (ck.net.weights.back().rows() != 3)
      throw ParseError("checkpoint output width must be 3");
    for (std::size_t l = 0; l + 1 < ck.net.weights.size(); ++l)
      if (ck.net.weights[l].rows() != ck.net.weights[l + 1].cols())
        throw ParseError("checkpoint layer shapes are inconsistent");
  }
  return ck;
}

}  // namespace geoflow
