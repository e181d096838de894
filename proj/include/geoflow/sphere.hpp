#pragma once

#include <Eigen/Core>
#include <cassert>
#include <cmath>
#include <utility>

#include "geoflow/errors.hpp"
#include "geoflow/rng.hpp"

namespace geoflow {

using Vec3 = Eigen::Vector3d;

inline constexpr double kEarthRadiusKm = 6371.0088;  // IUGG mean radius
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kDegPerRad = 180.0 / kPi;
inline constexpr double kRadPerDeg = kPi / 180.0;

// Latitude/longitude in degrees; lon normalized to [-180, 180).
struct GeoCoord {
  double lat_deg = 0.0;
  double lon_deg = 0.0;

  static GeoCoord make(double lat_deg, double lon_deg) {
    if (!(lat_deg >= -90.0 && lat_deg <= 90.0))
      throw DomainError("latitude out of [-90, 90]");
    if (!std::isfinite(lon_deg)) throw DomainError("longitude not finite");
    lon_deg = std::fmod(lon_deg, 360.0);
    if (lon_deg < -180.0) lon_deg += 360.0;
    if (lon_deg >= 180.0) lon_deg -= 360.0;
    return GeoCoord{lat_deg, lon_deg};
  }
};

// Point on S^2; constructor renormalizes, accessor asserts unit norm.
class UnitVec3 {
 public:
  UnitVec3() : v_(1.0, 0.0, 0.0) {}
  explicit UnitVec3(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 1e-12) || !std::isfinite(n))
      throw DegenerateError("cannot normalize near-zero vector");
    v_ = v / n;
  }

  const Vec3& vec() const {
    assert(std::abs(v_.norm() - 1.0) < 1e-9);
    return v_;
  }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  double dot(const UnitVec3& o) const { return v_.dot(o.v_); }

  friend bool operator==(const UnitVec3& a, const UnitVec3& b) {
    return a.v_ == b.v_;
  }

 private:
  Vec3 v_;
};

// Tangent vector at `base`; constructor projects `dir` into the tangent
// plane, magnitude is geodesic speed in radians.
class TangentVec {
 public:
  TangentVec(const UnitVec3& base, const Vec3& dir)
      : base_(base), dir_(dir - dir.dot(base.vec()) * base.vec()) {}

  const UnitVec3& base() const { return base_; }
  const Vec3& dir() const {
    assert(std::abs(dir_.dot(base_.vec())) < 1e-9);
    return dir_;
  }
  double norm() const { return dir_.norm(); }

 private:
  UnitVec3 base_;
  Vec3 dir_;
};

inline UnitVec3 to_unit_vec(const GeoCoord& g) {
  const double lat = g.lat_deg * kRadPerDeg;
  const double lon = g.lon_deg * kRadPerDeg;
  return UnitVec3(
      Vec3(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
           std::sin(lat)));
}

inline GeoCoord to_geo(const UnitVec3& v) {
  const double lat = std::asin(std::clamp(v.z(), -1.0, 1.0)) * kDegPerRad;
  const double hx = std::hypot(v.x(), v.y());
  // at the poles longitude is conventionally 0
  const double lon = hx < 1e-12 ? 0.0 : std::atan2(v.y(), v.x()) * kDegPerRad;
  return GeoCoord::make(lat, lon);
}

inline double geodesic_distance_rad(const UnitVec3& a, const UnitVec3& b) {
  const Vec3 cr = a.vec().cross(b.vec());
  return std::atan2(cr.norm(), a.dot(b));
}

inline double geodesic_distance_km(const UnitVec3& a, const UnitVec3& b) {
  return kEarthRadiusKm * geodesic_distance_rad(a, b);
}

inline TangentVec log_map(const UnitVec3& base, const UnitVec3& target) {
  const double d = base.dot(target);
  if (d <= -1.0 + 1e-12) throw AntipodalError();
  const Vec3 perp = target.vec() - d * base.vec();
  const double pn = perp.norm();
  if (pn < 1e-15) return TangentVec(base, Vec3::Zero());
  const double angle = std::atan2(pn, d);
  return TangentVec(base, perp * (angle / pn));
}

inline UnitVec3 exp_map(const TangentVec& t) {
  const double n = t.norm();
  if (n < 1e-15) return t.base();
  return UnitVec3(std::cos(n) * t.base().vec() +
                  (std::sin(n) / n) * t.dir());
}

inline UnitVec3 geodesic_interpolate(const UnitVec3& x0, const UnitVec3& x1,
                                     double s) {
  const TangentVec full = log_map(x0, x1);
  return exp_map(TangentVec(x0, s * full.dir()));
}

inline TangentVec project_to_tangent(const UnitVec3& base, const Vec3& v) {
  return TangentVec(base, v);
}

inline UnitVec3 sample_uniform_sphere(SeededRng& rng) {
  for (;;) {
    const Vec3 g(normal01(rng), normal01(rng), normal01(rng));
    if (g.norm() > 1e-12) return UnitVec3(g);
  }
}

// Deterministic orthonormal basis of the tangent plane at v.
inline std::pair<Vec3, Vec3> tangent_basis(const UnitVec3& v) {
  const Vec3 axis =
      std::abs(v.x()) < 0.9 ? Vec3(1.0, 0.0, 0.0) : Vec3(0.0, 1.0, 0.0);
  Vec3 e1 = v.vec().cross(axis).normalized();
  Vec3 e2 = v.vec().cross(e1);
  return {e1, e2};
}

namespace detail {

// Row-batched variants used on the sampling and density hot paths.

inline void normalize_rows(Eigen::MatrixXd& X) {
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double n = X.row(i).norm();
    if (!(n > 1e-12) || !std::isfinite(n))
      throw DegenerateError("row collapsed to zero during normalization");
    X.row(i) /= n;
  }
}

// exp map per row; rows of B unit, rows of D tangent at the matching row
inline Eigen::MatrixXd exp_map_rows(const Eigen::MatrixXd& B,
                                    const Eigen::MatrixXd& D) {
  Eigen::MatrixXd out(B.rows(), 3);
  for (Eigen::Index i = 0; i < B.rows(); ++i) {
    const double n = D.row(i).norm();
    if (n < 1e-15) {
      out.row(i) = B.row(i);
    } else {
      out.row(i) = std::cos(n) * B.row(i) + (std::sin(n) / n) * D.row(i);
      out.row(i) /= out.row(i).norm();
    }
  }
  return out;
}

}  // namespace detail

// von Mises-Fisher on S^2 via inverse-CDF of the cosine against the mode;
// kappa = 0 reduces to the uniform distribution.
inline UnitVec3 sample_vmf(SeededRng& rng, const UnitVec3& mode,
                           double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw DomainError("vMF kappa must be finite and >= 0");
  const double u = uniform01(rng);
  const double phi = 2.0 * kPi * uniform01(rng);
  double w;
  if (kappa < 1e-12) {
    w = 2.0 * u - 1.0;
  } else {
    // stable for large kappa: w = 1 + log(1 - u (1 - e^{-2k})) / k
    w = 1.0 + std::log1p(-u * (1.0 - std::exp(-2.0 * kappa))) / kappa;
  }
  w = std::clamp(w, -1.0, 1.0);
  const auto [e1, e2] = tangent_basis(mode);
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
  return UnitVec3(w * mode.vec() +
                  s * (std::cos(phi) * e1 + std::sin(phi) * e2));
}

}  // namespace geoflow
