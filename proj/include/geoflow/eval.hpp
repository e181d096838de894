#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "geoflow/errors.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/sphere.hpp"

namespace geoflow {

struct EvalReport {
  std::map<double, double> acc;  // radius_km -> fraction
  double mean_km = 0.0;
  double median_km = 0.0;
  std::size_t n = 0;
  std::string split;
  std::vector<double> distances_km;  // per query, in input order
};

inline std::vector<double> pairwise_distances_km(
    const std::vector<GeoCoord>& preds, const std::vector<GeoCoord>& truths) {
  if (preds.size() != truths.size() || preds.empty())
    throw LengthMismatchError("predictions and truths must have equal size >= 1");
  std::vector<double> d(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    d[i] = geodesic_distance_km(to_unit_vec(preds[i]), to_unit_vec(truths[i]));
  return d;
}

// fraction of pairs within radius_km inclusive
inline double acc_at_k(const std::vector<GeoCoord>& preds,
                       const std::vector<GeoCoord>& truths, double radius_km) {
  const auto d = pairwise_distances_km(preds, truths);
  std::size_t hits = 0;
  for (const double v : d)
    if (v <= radius_km) ++hits;
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

// mean and median distance; even-length median is the average of the two
// central order statistics
inline std::pair<double, double> distance_stats(
    const std::vector<GeoCoord>& preds, const std::vector<GeoCoord>& truths) {
  auto d = pairwise_distances_km(preds, truths);
  double mean = 0.0;
  for (const double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const double median =
      n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  return {mean, median};
}

inline EvalReport make_report(const std::vector<GeoCoord>& preds,
                              const std::vector<GeoCoord>& truths,
                              const std::vector<double>& radii_km,
                              const std::string& split = {}) {
  EvalReport r;
  r.distances_km = pairwise_distances_km(preds, truths);
  r.n = r.distances_km.size();
  for (const double radius : radii_km) r.acc[radius] = acc_at_k(preds, truths, radius);
  const auto [mean, median] = distance_stats(preds, truths);
  r.mean_km = mean;
  r.median_km = median;
  r.split = split;
  return r;
}

struct Split {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

// Deterministic partition: ids are sorted, shuffled by the seeded generator,
// and the first floor(n * test_fraction) become the test set. The paper's
// protocols use 8:2 and 7:3; other fractions need allow_any_fraction.
inline Split split(std::vector<std::string> ids, double test_fraction,
                   std::uint64_t seed, bool allow_any_fraction = false) {
  if (ids.empty()) throw DomainError("dataset must be non-empty");
  if (!allow_any_fraction &&
      !(std::abs(test_fraction - 0.2) < 1e-12 ||
        std::abs(test_fraction - 0.3) < 1e-12))
    throw DomainError("test fraction must be 0.2 or 0.3 (or pass --fraction-any)");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DomainError("test fraction must lie in (0, 1)");
  std::sort(ids.begin(), ids.end());
  SeededRng rng = substream(seed, "split");
  shuffle(ids.begin(), ids.end(), rng);
  const std::size_t n_test = static_cast<std::size_t>(
      std::floor(static_cast<double>(ids.size()) * test_fraction));
  Split out;
  out.test_ids.assign(ids.begin(), ids.begin() + n_test);
  out.train_ids.assign(ids.begin() + n_test, ids.end());
  return out;
}

}  // namespace geoflow
