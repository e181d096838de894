#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace geoflow {

// All randomness flows through SeededRng. The helpers below are spelled out
// (rather than using std:: distributions) so a given seed produces the same
// stream on every standard library.
using SeededRng = std::mt19937_64;

inline double uniform01(SeededRng& rng) {
  // top 53 bits -> [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(SeededRng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// unbiased integer in [0, n)
inline std::uint64_t uniform_index(SeededRng& rng, std::uint64_t n) {
  const std::uint64_t limit = n * (UINT64_MAX / n);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// Marsaglia polar method; one value per call (the spare is discarded to keep
// the stream position independent of call pairing).
inline double normal01(SeededRng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, SeededRng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

// Independent substream for (seed, stream id), e.g. one stream per query.
inline SeededRng substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{seed, stream};
  return SeededRng(seq);
}

inline SeededRng substream(std::uint64_t seed, std::string_view name) {
  return substream(seed, fnv1a(name));
}

}  // namespace geoflow
