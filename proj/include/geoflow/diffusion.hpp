#pragma once

#include <Eigen/Core>
#include <cmath>
#include <span>

#include "geoflow/batch.hpp"
#include "geoflow/fieldnet.hpp"
#include "geoflow/schedule.hpp"
#include "geoflow/sphere.hpp"

namespace geoflow {

// DDPM baseline in R^3. The continuous-time reading of the forward process
// is x_t = sqrt(1 - beta(t)) x0 + sqrt(beta(t)) eps, which the denoising
// update inverts exactly when the network returns the true noise.

inline Vec3 forward_noise(const UnitVec3& x0, double t, const Vec3& eps,
                          const Schedule& s) {
  const double b = beta(s, t);
  return std::sqrt(1.0 - b) * x0.vec() + std::sqrt(b) * eps;
}

namespace detail {

// shared draw used by the loss and by the trainer: per-item t ~ U(0,1),
// eps ~ N(0, I3)
struct DdpmDraw {
  Eigen::MatrixXd xt;       // n x 3
  Eigen::VectorXd t;        // n
  Eigen::MatrixXd targets;  // n x 3, the noise itself
};

inline DdpmDraw ddpm_draw(const Eigen::MatrixXd& X0, const Schedule& s,
                          SeededRng& rng) {
  const Eigen::Index n = X0.rows();
  DdpmDraw d;
  d.xt.resize(n, 3);
  d.t.resize(n);
  d.targets.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.t[i] = uniform01(rng);
    const Vec3 eps(normal01(rng), normal01(rng), normal01(rng));
    d.targets.row(i) = eps;
    const double b = beta(s, d.t[i]);
    d.xt.row(i) = std::sqrt(1.0 - b) * X0.row(i) +
                  std::sqrt(b) * eps.transpose();
  }
  return d;
}

}  // namespace detail

inline double ddpm_loss(const FieldNet& net,
                        std::span<const ConditionedPoint> batch,
                        const Schedule& s, SeededRng& rng) {
  Eigen::MatrixXd X0, C;
  detail::pack_batch(batch, X0, C);
  const auto draw = detail::ddpm_draw(X0, s, rng);
  const Eigen::MatrixXd pred = forward_batch(net, draw.xt, draw.t, C);
  const double loss =
      (pred - draw.targets).squaredNorm() / static_cast<double>(X0.rows());
  if (!std::isfinite(loss)) throw NonFiniteError("ddpm loss not finite");
  return loss;
}

// Iterative denoising from x_1 = eps, n_steps uniform steps from t = 1 to 0,
// then projection of x_0 onto the sphere.
inline GeoCoord ddpm_sample(const FieldNet& net, const Eigen::VectorXd& c,
                            int n_steps, SeededRng& rng, const Schedule& s) {
  if (n_steps < 1) throw DomainError("n_steps must be >= 1");
  for (int attempt = 0; attempt < 2; ++attempt) {
    Vec3 x(normal01(rng), normal01(rng), normal01(rng));
    for (int k = 0; k < n_steps; ++k) {
      const double t = 1.0 - static_cast<double>(k) / n_steps;
      const double t_next = 1.0 - static_cast<double>(k + 1) / n_steps;
      const double b = std::min(beta(s, t), 1.0 - 1e-6);
      const double b_next = beta(s, t_next);
      const Vec3 phi = forward(net, x, t, c);
      const Vec3 x_hat = (x - std::sqrt(b) * phi) / std::sqrt(1.0 - b);
      x = std::sqrt(1.0 - b_next) * x_hat + std::sqrt(b_next) * phi;
      if (!x.allFinite()) throw NonFiniteError("ddpm sample diverged");
    }
    if (x.norm() >= 1e-8) return to_geo(UnitVec3(x));
  }
  throw DegenerateError("ddpm sample collapsed to the origin twice");
}

}  // namespace geoflow
