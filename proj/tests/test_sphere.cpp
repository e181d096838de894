#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "geoflow/sphere.hpp"

using namespace geoflow;

TEST_CASE("lat/lon to cartesian axis alignments") {
  const UnitVec3 a = to_unit_vec(GeoCoord::make(0, 0));
  CHECK(a.vec().isApprox(Vec3(1, 0, 0), 1e-12));
  const UnitVec3 b = to_unit_vec(GeoCoord::make(90, 0));
  CHECK(b.vec().isApprox(Vec3(0, 0, 1), 1e-12));
  const UnitVec3 c = to_unit_vec(GeoCoord::make(45, 45));
  CHECK(c.x() == Catch::Approx(0.5).margin(1e-9));
  CHECK(c.y() == Catch::Approx(0.5).margin(1e-9));
  CHECK(c.z() == Catch::Approx(0.70710678).margin(1e-8));
}

TEST_CASE("cartesian to lat/lon with pole convention") {
  const GeoCoord pole = to_geo(UnitVec3(Vec3(0, 0, 1)));
  CHECK(pole.lat_deg == Catch::Approx(90.0).margin(1e-12));
  CHECK(pole.lon_deg == 0.0);
  const GeoCoord origin = to_geo(UnitVec3(Vec3(1, 0, 0)));
  CHECK(origin.lat_deg == Catch::Approx(0.0).margin(1e-12));
  CHECK(origin.lon_deg == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("geo round trip over random points") {
  SeededRng rng(42);
  for (int i = 0; i < 10000; ++i) {
    const UnitVec3 v = sample_uniform_sphere(rng);
    const GeoCoord g = to_geo(v);
    const GeoCoord g2 = to_geo(to_unit_vec(g));
    CHECK(std::abs(g.lat_deg - g2.lat_deg) < 1e-9);
    CHECK(std::abs(g.lon_deg - g2.lon_deg) < 1e-9);
  }
}

TEST_CASE("geodesic distance landmarks") {
  const UnitVec3 n(Vec3(0, 0, 1)), s(Vec3(0, 0, -1));
  CHECK(geodesic_distance_km(n, n) == 0.0);
  CHECK(geodesic_distance_km(n, s) ==
        Catch::Approx(kPi * kEarthRadiusKm).epsilon(1e-12));
  CHECK(geodesic_distance_km(n, s) == Catch::Approx(20015.09).margin(0.01));
  const UnitVec3 a = to_unit_vec(GeoCoord::make(0, 0));
  const UnitVec3 b = to_unit_vec(GeoCoord::make(0, 90));
  CHECK(geodesic_distance_km(a, b) ==
        Catch::Approx(kPi / 2 * kEarthRadiusKm).epsilon(1e-12));
}

TEST_CASE("log map basics") {
  const UnitVec3 v(Vec3(0.3, -0.2, 0.9));
  CHECK(log_map(v, v).norm() == 0.0);

  const UnitVec3 e1(Vec3(1, 0, 0)), e2(Vec3(0, 1, 0));
  const TangentVec t = log_map(e1, e2);
  CHECK(t.dir().isApprox(Vec3(0, kPi / 2, 0), 1e-12));

  CHECK_THROWS_AS(log_map(e1, UnitVec3(Vec3(-1, 0, 0))), AntipodalError);
}

TEST_CASE("log map magnitude equals geodesic distance") {
  SeededRng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const UnitVec3 a = sample_uniform_sphere(rng);
    const UnitVec3 b = sample_uniform_sphere(rng);
    if (a.dot(b) <= -1 + 1e-9) continue;
    const double lhs = log_map(a, b).norm() * kEarthRadiusKm;
    CHECK(std::abs(lhs - geodesic_distance_km(a, b)) < 1e-6);
  }
}

TEST_CASE("exp map basics and exp-log identity") {
  const UnitVec3 v(Vec3(0.5, 0.5, std::sqrt(0.5)));
  CHECK(exp_map(TangentVec(v, Vec3::Zero())) == v);

  const UnitVec3 e1(Vec3(1, 0, 0));
  const UnitVec3 half = exp_map(TangentVec(e1, Vec3(0, kPi, 0)));
  CHECK(half.vec().isApprox(Vec3(-1, 0, 0), 1e-9));

  SeededRng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const UnitVec3 a = sample_uniform_sphere(rng);
    const UnitVec3 b = sample_uniform_sphere(rng);
    if (a.dot(b) <= -1 + 1e-9) continue;
    const UnitVec3 back = exp_map(log_map(a, b));
    CHECK((back.vec() - b.vec()).norm() < 1e-9);
  }
}

TEST_CASE("log-exp identity inside the injectivity radius") {
  SeededRng rng(13);
  for (int i = 0; i < 2000; ++i) {
    const UnitVec3 base = sample_uniform_sphere(rng);
    const auto [b1, b2] = tangent_basis(base);
    const double angle = uniform_in(rng, 0.0, kPi - 1e-3);
    const double phi = uniform_in(rng, 0.0, 2 * kPi);
    const Vec3 dir = angle * (std::cos(phi) * b1 + std::sin(phi) * b2);
    const TangentVec t(base, dir);
    const TangentVec back = log_map(base, exp_map(t));
    CHECK((back.dir() - dir).norm() < 1e-9);
  }
}

TEST_CASE("geodesic interpolation") {
  const UnitVec3 a(Vec3(1, 0, 0)), b(Vec3(0, 1, 0));
  CHECK(geodesic_interpolate(a, b, 0.0) == a);
  CHECK((geodesic_interpolate(a, b, 1.0).vec() - b.vec()).norm() < 1e-12);
  const UnitVec3 mid = geodesic_interpolate(a, b, 0.5);
  const double r = std::sqrt(0.5);
  CHECK(mid.vec().isApprox(Vec3(r, r, 0), 1e-12));

  SeededRng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const UnitVec3 x0 = sample_uniform_sphere(rng);
    const UnitVec3 x1 = sample_uniform_sphere(rng);
    if (x0.dot(x1) <= -1 + 1e-9) continue;
    const double s = uniform01(rng);
    const double full = geodesic_distance_rad(x0, x1);
    const double part = geodesic_distance_rad(x0, geodesic_interpolate(x0, x1, s));
    CHECK(std::abs(part - s * full) < 1e-9);
  }
}

TEST_CASE("tangent projection") {
  const UnitVec3 base(Vec3(0, 0, 1));
  CHECK(project_to_tangent(base, Vec3(0, 0, 2.5)).norm() == 0.0);
  const Vec3 tang(0.4, -0.7, 0);
  CHECK(project_to_tangent(base, tang).dir().isApprox(tang, 1e-12));

  SeededRng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const UnitVec3 b = sample_uniform_sphere(rng);
    const Vec3 v(normal01(rng), normal01(rng), normal01(rng));
    CHECK(std::abs(project_to_tangent(b, v).dir().dot(b.vec())) < 1e-9);
  }
}

TEST_CASE("uniform sphere sampling statistics") {
  SeededRng rng(2024);
  Vec3 mean = Vec3::Zero();
  const int n_mean = 100000;
  for (int i = 0; i < n_mean; ++i) mean += sample_uniform_sphere(rng).vec();
  mean /= n_mean;
  CHECK(mean.norm() < 0.02);

  // octant occupancy, binomial 3 sigma ~ 280 around 10,000
  int counts[8] = {0};
  for (int i = 0; i < 80000; ++i) {
    const UnitVec3 v = sample_uniform_sphere(rng);
    const int oct = (v.x() > 0 ? 1 : 0) | (v.y() > 0 ? 2 : 0) |
                    (v.z() > 0 ? 4 : 0);
    ++counts[oct];
  }
  for (const int c : counts) CHECK(std::abs(c - 10000) <= 400);
}

TEST_CASE("vMF sampling") {
  SeededRng rng(99);
  SECTION("kappa 0 is uniform (octant occupancy)") {
    const UnitVec3 mode(Vec3(0, 0, 1));
    int counts[8] = {0};
    for (int i = 0; i < 80000; ++i) {
      const UnitVec3 v = sample_vmf(rng, mode, 0.0);
      const int oct = (v.x() > 0 ? 1 : 0) | (v.y() > 0 ? 2 : 0) |
                      (v.z() > 0 ? 4 : 0);
      ++counts[oct];
    }
    for (const int c : counts) CHECK(std::abs(c - 10000) <= 400);
  }
  SECTION("kappa 1000 concentrates within 4 degrees on average") {
    const UnitVec3 mode(Vec3(0, 0, 1));
    double sum_angle = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i)
      sum_angle += geodesic_distance_rad(sample_vmf(rng, mode, 1000.0), mode);
    CHECK(sum_angle / n * kDegPerRad < 4.0);
  }
  SECTION("empirical mean direction aligns with the mode") {
    const UnitVec3 mode(Vec3(1, 2, -1).normalized());
    Vec3 acc = Vec3::Zero();
    for (int i = 0; i < 50000; ++i)
      acc += sample_vmf(rng, mode, 100.0).vec();
    const double off = geodesic_distance_rad(UnitVec3(acc), mode) * kDegPerRad;
    CHECK(off < 1.0);
  }
}

TEST_CASE("type invariants") {
  CHECK_THROWS_AS(GeoCoord::make(91, 0), DomainError);
  CHECK(GeoCoord::make(0, 180).lon_deg == -180.0);
  CHECK(GeoCoord::make(0, 270).lon_deg == -90.0);
  CHECK_THROWS_AS(UnitVec3(Vec3::Zero()), DegenerateError);
  CHECK(UnitVec3(Vec3(0, 0, 10)).vec().isApprox(Vec3(0, 0, 1), 1e-15));
}
