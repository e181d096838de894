#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <vector>

#include "geoflow/fieldnet.hpp"
#include "geoflow/flowmatch.hpp"
#include "geoflow/schedule.hpp"
#include "geoflow/sphere.hpp"

namespace geoflow {

// log P(x_n | c) on the sphere via the divergence-augmented ODE: the
// trajectory runs from the data point at t = 0 toward noise at t = 1
// (stepping against the sampling velocity), f accumulates the divergence of
// the sampling field along the way, and the result is
//   log P = log(1 / 4pi) - f(1)
// with the uniform noise density measured per steradian.

inline constexpr double kLogUniformSphere = -2.5310242469692907;  // -ln(4 pi)

namespace detail {

// One evaluation of (velocity, divergence) for every live row, fused into a
// single network pass over 5n probe points (the point itself plus the four
// finite-difference probes of the divergence).
struct FlowStage {
  Eigen::MatrixXd dx;   // n x 3, d(position)/dt
  Eigen::VectorXd df;   // n, d(f)/dt
};

inline FlowStage density_stage(const FieldNet& net, const Eigen::MatrixXd& Y,
                               double t, const Eigen::VectorXd& c,
                               double h_fd) {
  const Eigen::Index n = Y.rows();
  Eigen::MatrixXd Yn = Y;
  normalize_rows(Yn);

  // orthonormal tangent bases, matching tangent_basis()
  Eigen::MatrixXd E1(n, 3), E2(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [e1, e2] = tangent_basis(UnitVec3(Vec3(Yn.row(i))));
    E1.row(i) = e1;
    E2.row(i) = e2;
  }

  Eigen::MatrixXd P(5 * n, 3);
  P.topRows(n) = Yn;
  P.middleRows(n, n) = exp_map_rows(Yn, h_fd * E1);
  P.middleRows(2 * n, n) = exp_map_rows(Yn, -h_fd * E1);
  P.middleRows(3 * n, n) = exp_map_rows(Yn, h_fd * E2);
  P.middleRows(4 * n, n) = exp_map_rows(Yn, -h_fd * E2);

  Eigen::MatrixXd out = forward_batch_shared(net, P, t, c);
  for (int block = 0; block < 5; ++block) {
    auto rows = out.middleRows(block * n, n);
    const Eigen::MatrixXd base = P.middleRows(block * n, n);
    const Eigen::VectorXd d = (rows.array() * base.array()).rowwise().sum();
    rows -= d.asDiagonal() * base;
  }

  FlowStage st;
  st.dx = -out.topRows(n);  // data -> noise runs against the sampling field
  st.df.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d1 = (out.row(n + i).dot(E1.row(i)) -
                       out.row(2 * n + i).dot(E1.row(i))) /
                      (2.0 * h_fd);
    const double d2 = (out.row(3 * n + i).dot(E2.row(i)) -
                       out.row(4 * n + i).dot(E2.row(i))) /
                      (2.0 * h_fd);
    st.df[i] = d1 + d2;
  }
  return st;
}

}  // namespace detail

// Batched log-density; rows of Xn are evaluation points sharing condition c.
// A row whose trajectory turns non-finite yields NaN rather than failing the
// whole batch.
inline Eigen::VectorXd log_prob_batch(const FieldNet& net,
                                      const Eigen::MatrixXd& Xn,
                                      const Eigen::VectorXd& c, int n_steps,
                                      const Schedule& s, double h_fd = 1e-4) {
  if (n_steps < 1) throw DomainError("n_steps must be >= 1");
  const Eigen::Index n = Xn.rows();
  Eigen::MatrixXd X = Xn;
  detail::normalize_rows(X);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  std::vector<bool> failed(static_cast<std::size_t>(n), false);

  const double h = 1.0 / n_steps;
  for (int k = 0; k < n_steps; ++k) {
    const double t0 = static_cast<double>(k) / n_steps;
    const auto k1 = detail::density_stage(net, X, t0, c, h_fd);
    const auto k2 = detail::density_stage(net, X + 0.5 * h * k1.dx,
                                          t0 + 0.5 * h, c, h_fd);
    const auto k3 = detail::density_stage(net, X + 0.5 * h * k2.dx,
                                          t0 + 0.5 * h, c, h_fd);
    const auto k4 =
        detail::density_stage(net, X + h * k3.dx, t0 + h, c, h_fd);
    X += (h / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
    f += (h / 6.0) * (k1.df + 2.0 * k2.df + 2.0 * k3.df + k4.df);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (failed[i]) continue;
      const double nrm = X.row(i).norm();
      if (!std::isfinite(nrm) || nrm < 1e-12 || !std::isfinite(f[i])) {
        failed[i] = true;
        X.row(i) = Vec3(1.0, 0.0, 0.0);
        continue;
      }
      X.row(i) /= nrm;
    }
  }

  Eigen::VectorXd lp(n);
  for (Eigen::Index i = 0; i < n; ++i)
    lp[i] = failed[i] ? std::numeric_limits<double>::quiet_NaN()
                      : kLogUniformSphere - f[i];
  return lp;
}

inline double log_prob(const FieldNet& net, const UnitVec3& x_n,
                       const Eigen::VectorXd& c, int n_steps,
                       const Schedule& s) {
  Eigen::MatrixXd X(1, 3);
  X.row(0) = x_n.vec();
  const double v = log_prob_batch(net, X, c, n_steps, s)[0];
  if (!std::isfinite(v)) throw NonFiniteError("log_prob trajectory diverged");
  return v;
}

// Equiangular lat/lon discretization of log P(. | c). Cell solid angles sum
// to 4 pi exactly (telescoping in sin(lat)).
struct DensityGrid {
  int n_lat = 0;
  int n_lon = 0;
  std::vector<GeoCoord> centers;   // row-major, lat rows from south to north
  Eigen::VectorXd log_density;     // natural log, per steradian; NaN = failed
  Eigen::VectorXd solid_angle;     // steradians
  int failed_cells = 0;

  double integral() const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < log_density.size(); ++i)
      if (std::isfinite(log_density[i]))
        acc += std::exp(log_density[i]) * solid_angle[i];
    return acc;
  }
};

inline DensityGrid density_grid(const FieldNet& net, const Eigen::VectorXd& c,
                                int n_lat, int n_lon, int n_steps,
                                const Schedule& s) {
  if (n_lat < 2 || n_lon < 2) throw DomainError("grid must be at least 2x2");
  DensityGrid g;
  g.n_lat = n_lat;
  g.n_lon = n_lon;
  const int cells = n_lat * n_lon;
  g.centers.reserve(cells);
  g.solid_angle.resize(cells);
  Eigen::MatrixXd P(cells, 3);
  const double dlat = 180.0 / n_lat;
  const double dlon_rad = 2.0 * kPi / n_lon;
  for (int i = 0; i < n_lat; ++i) {
    const double lat_bot = -90.0 + i * dlat;
    const double lat_top = lat_bot + dlat;
    const double sa = dlon_rad * (std::sin(lat_top * kRadPerDeg) -
                                  std::sin(lat_bot * kRadPerDeg));
    for (int j = 0; j < n_lon; ++j) {
      const double lon = -180.0 + (j + 0.5) * (360.0 / n_lon);
      const GeoCoord center =
          GeoCoord::make(lat_bot + 0.5 * dlat, lon);
      const int idx = i * n_lon + j;
      g.centers.push_back(center);
      g.solid_angle[idx] = sa;
      P.row(idx) = to_unit_vec(center).vec();
    }
  }
  g.log_density = log_prob_batch(net, P, c, n_steps, s);
  g.failed_cells = 0;
  for (Eigen::Index i = 0; i < g.log_density.size(); ++i)
    if (!std::isfinite(g.log_density[i])) ++g.failed_cells;
  return g;
}

// Monte-Carlo negative entropy (in bits) of the model distribution for one
// condition: mean of log2 P over model samples, with its standard error.
struct LocalizabilityScore {
  double bits = 0.0;
  int n_samples = 0;
  double std_error = 0.0;
};

inline LocalizabilityScore localizability(const FieldNet& net,
                                          const Eigen::VectorXd& c,
                                          int n_samples, int n_steps,
                                          SeededRng& rng, const Schedule& s) {
  if (n_samples < 1) throw DomainError("n_samples must be >= 1");
  Eigen::MatrixXd X1(n_samples, 3);
  for (int i = 0; i < n_samples; ++i)
    X1.row(i) = sample_uniform_sphere(rng).vec();
  Eigen::MatrixXd C(n_samples, c.size());
  C.rowwise() = c.transpose();
  const Eigen::MatrixXd XS = rfm_sample_batch(net, C, X1, n_steps, s);
  const Eigen::VectorXd lp = log_prob_batch(net, XS, c, n_steps, s);
  if (!lp.allFinite())
    throw NonFiniteError("localizability: log_prob diverged for a sample");

  const Eigen::VectorXd bits = lp / std::log(2.0);
  LocalizabilityScore score;
  score.n_samples = n_samples;
  score.bits = bits.mean();
  if (n_samples > 1) {
    const double var =
        (bits.array() - score.bits).square().sum() / (n_samples - 1);
    score.std_error = std::sqrt(var / n_samples);
  }
  return score;
}

}  // namespace geoflow
