#pragma once

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "geoflow/batch.hpp"
#include "geoflow/fieldnet.hpp"
#include "geoflow/schedule.hpp"
#include "geoflow/sphere.hpp"

namespace geoflow {

// ---------------------------------------------------------------------------
// Euclidean flow matching: straight-line path x_t = (1 - beta) x0 + beta eps
// with regression target v = beta_dot (eps - x0).
// ---------------------------------------------------------------------------

inline std::pair<Vec3, Vec3> fm_target(const UnitVec3& x0, const Vec3& eps,
                                       double t, const Schedule& s) {
  const double b = beta(s, t);
  const Vec3 xt = (1.0 - b) * x0.vec() + b * eps;
  const Vec3 v = beta_dot(s, t) * (eps - x0.vec());
  return {xt, v};
}

namespace detail {

struct FmDraw {
  Eigen::MatrixXd xt;       // n x 3
  Eigen::VectorXd t;        // n
  Eigen::MatrixXd targets;  // n x 3
};

inline FmDraw fm_draw(const Eigen::MatrixXd& X0, const Schedule& s,
                      SeededRng& rng) {
  const Eigen::Index n = X0.rows();
  FmDraw d;
  d.xt.resize(n, 3);
  d.t.resize(n);
  d.targets.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.t[i] = uniform01(rng);
    const Vec3 eps(normal01(rng), normal01(rng), normal01(rng));
    const auto [x, v] = fm_target(UnitVec3(Vec3(X0.row(i))), eps, d.t[i], s);
    d.xt.row(i) = x;
    d.targets.row(i) = v;
  }
  return d;
}

}  // namespace detail

inline double fm_loss(const FieldNet& net,
                      std::span<const ConditionedPoint> batch,
                      const Schedule& s, SeededRng& rng) {
  Eigen::MatrixXd X0, C;
  detail::pack_batch(batch, X0, C);
  const auto draw = detail::fm_draw(X0, s, rng);
  const Eigen::MatrixXd pred = forward_batch(net, draw.xt, draw.t, C);
  const double loss =
      (pred - draw.targets).squaredNorm() / static_cast<double>(X0.rows());
  if (!std::isfinite(loss)) throw NonFiniteError("fm loss not finite");
  return loss;
}

// Euler integration of dx/dt = phi from t = 1 to 0, then projection to S^2.
inline GeoCoord fm_sample(const FieldNet& net, const Eigen::VectorXd& c,
                          int n_steps, SeededRng& rng, const Schedule& s) {
  if (n_steps < 1) throw DomainError("n_steps must be >= 1");
  (void)s;  // the learned field carries the schedule
  for (int attempt = 0; attempt < 2; ++attempt) {
    Vec3 x(normal01(rng), normal01(rng), normal01(rng));
    const double dt = 1.0 / n_steps;
    for (int k = 0; k < n_steps; ++k) {
      const double t = 1.0 - static_cast<double>(k) / n_steps;
      x -= forward(net, x, t, c) * dt;
      if (!x.allFinite()) throw NonFiniteError("fm sample diverged");
    }
    if (x.norm() >= 1e-8) return to_geo(UnitVec3(x));
  }
  throw DegenerateError("fm sample collapsed to the origin twice");
}

// ---------------------------------------------------------------------------
// Riemannian flow matching on S^2.
// ---------------------------------------------------------------------------

// Geodesic interpolation from the data point toward the noise point.
inline UnitVec3 rfm_noisy_point(const UnitVec3& x0, const UnitVec3& eps,
                                double t, const Schedule& s) {
  return geodesic_interpolate(x0, eps, beta(s, t));
}

// Regression target: the tangent vector at x_t whose backward Euler
// integration transports x_t to x0. The beta in the denominator is clamped
// below by t_clamp_min (removable singularity at t -> 0).
inline TangentVec rfm_target(const UnitVec3& x0, const UnitVec3& xt, double t,
                             const Schedule& s) {
  const double scale = beta_dot(s, t) / std::max(beta(s, t), s.t_clamp_min);
  const TangentVec lg = log_map(xt, x0);
  return TangentVec(xt, scale * lg.dir());
}

namespace detail {

struct RfmDraw {
  Eigen::MatrixXd xt;       // n x 3, on the sphere
  Eigen::VectorXd t;        // n
  Eigen::MatrixXd targets;  // n x 3, tangent at xt
};

inline RfmDraw rfm_draw(const Eigen::MatrixXd& X0, const Schedule& s,
                        SeededRng& rng) {
  const Eigen::Index n = X0.rows();
  RfmDraw d;
  d.xt.resize(n, 3);
  d.t.resize(n);
  d.targets.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const UnitVec3 x0{Vec3(X0.row(i))};
    d.t[i] = uniform_in(rng, s.t_clamp_min, 1.0);
    for (;;) {
      const UnitVec3 eps = sample_uniform_sphere(rng);
      try {
        const UnitVec3 xt = rfm_noisy_point(x0, eps, d.t[i], s);
        d.xt.row(i) = xt.vec();
        d.targets.row(i) = rfm_target(x0, xt, d.t[i], s).dir();
        break;
      } catch (const AntipodalError&) {
        // eps landed antipodal to x0; redraw
      }
    }
  }
  return d;
}

}  // namespace detail

inline double rfm_loss(const FieldNet& net,
                       std::span<const ConditionedPoint> batch,
                       const Schedule& s, SeededRng& rng) {
  Eigen::MatrixXd X0, C;
  detail::pack_batch(batch, X0, C);
  const auto draw = detail::rfm_draw(X0, s, rng);
  Eigen::MatrixXd pred = forward_batch(net, draw.xt, draw.t, C);
  detail::project_rows_to_tangent(draw.xt, pred);
  const double loss =
      (pred - draw.targets).squaredNorm() / static_cast<double>(X0.rows());
  if (!std::isfinite(loss)) throw NonFiniteError("rfm loss not finite");
  return loss;
}

// Tangent Euler steps for a batch of trajectories, t from 1 down to
// t_clamp_min. Deterministic given the initial points; every intermediate
// state stays on the sphere by construction.
inline Eigen::MatrixXd rfm_sample_batch(const FieldNet& net,
                                        const Eigen::MatrixXd& C,
                                        const Eigen::MatrixXd& X1,
                                        int n_steps, const Schedule& s) {
  if (n_steps < 1) throw DomainError("n_steps must be >= 1");
  Eigen::MatrixXd X = X1;
  const double t_end = s.t_clamp_min;
  for (int k = 0; k < n_steps; ++k) {
    const double t = 1.0 + (t_end - 1.0) * static_cast<double>(k) / n_steps;
    const double t_next =
        1.0 + (t_end - 1.0) * static_cast<double>(k + 1) / n_steps;
    const double dt = t - t_next;
    Eigen::MatrixXd U = forward_batch_shared_t(net, X, t, C);
    detail::project_rows_to_tangent(X, U);
    if (!U.allFinite()) throw NonFiniteError("rfm sample diverged");
    X = detail::exp_map_rows(X, dt * U);
  }
  return X;
}

inline GeoCoord rfm_sample(const FieldNet& net, const Eigen::VectorXd& c,
                           int n_steps, SeededRng& rng, const Schedule& s) {
  Eigen::MatrixXd X1(1, 3);
  X1.row(0) = sample_uniform_sphere(rng).vec();
  Eigen::MatrixXd C(1, c.size());
  C.row(0) = c;
  const Eigen::MatrixXd XF = rfm_sample_batch(net, C, X1, n_steps, s);
  return to_geo(UnitVec3(Vec3(XF.row(0))));
}

namespace detail {

// index of the sample minimizing summed geodesic distance to the others;
// ties resolved toward the lowest index
inline Eigen::Index medoid_index(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = geodesic_distance_rad(UnitVec3(Vec3(X.row(i))),
                                             UnitVec3(Vec3(X.row(j))));
      total[i] += d;
      total[j] += d;
    }
  Eigen::Index best = 0;
  total.minCoeff(&best);
  return best;
}

}  // namespace detail

// Point estimate: spherical medoid of n_draws independent samples.
inline GeoCoord predict_location(const FieldNet& net, const Eigen::VectorXd& c,
                                 int n_steps, int n_draws, SeededRng& rng,
                                 const Schedule& s) {
  if (n_draws < 1) throw DomainError("n_draws must be >= 1");
  Eigen::MatrixXd X1(n_draws, 3);
  for (int i = 0; i < n_draws; ++i)
    X1.row(i) = sample_uniform_sphere(rng).vec();
  Eigen::MatrixXd C(n_draws, c.size());
  C.rowwise() = c.transpose();
  const Eigen::MatrixXd XF = rfm_sample_batch(net, C, X1, n_steps, s);
  return to_geo(UnitVec3(Vec3(XF.row(detail::medoid_index(XF)))));
}

}  // namespace geoflow
