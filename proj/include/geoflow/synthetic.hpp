#pragma once

#include <Eigen/Core>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "geoflow/retrieval.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/sphere.hpp"

namespace geoflow {

// Desk-scale stand-in for the disaster cross-view datasets: clustered
// locations with paired VGI/RSI embeddings built from a shared per-pair
// latent on top of a one-hot-style cluster latent. Optional distractors
// plant an exact embedding copy of a pair's RSI record in a far cluster,
// with an id that sorts before the genuine partner.
struct SyntheticWorldSpec {
  int n_clusters = 8;
  std::vector<GeoCoord> modes;   // empty -> built-in spread modes
  std::vector<double> kappas;    // one per cluster, or a single broadcast value
  int pairs_per_cluster = 500;
  int embed_dim = 8;
  double cluster_scale = 2.0;
  double pair_sigma = 0.35;
  double noise_sigma = 0.1;
  double distractor_fraction = 0.0;

  void validate() const {
    if (n_clusters < 1) throw DomainError("n_clusters must be >= 1");
    if (pairs_per_cluster < 1) throw DomainError("counts must be >= 1");
    if (embed_dim < 1) throw DomainError("embed_dim must be >= 1");
    for (const double k : kappas)
      if (!(k >= 0.0)) throw DomainError("kappa must be >= 0");
    if (!(distractor_fraction >= 0.0 && distractor_fraction <= 1.0))
      throw DomainError("distractor_fraction must lie in [0, 1]");
  }
};

struct SyntheticWorld {
  std::vector<EmbeddingRecord> vgi;
  std::vector<EmbeddingRecord> rsi;
  // truth map: vgi id -> rsi partner id (same geo by construction)
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<int> vgi_cluster;  // cluster index per vgi record
};

namespace detail {

inline std::vector<UnitVec3> default_modes(int n, SeededRng& rng) {
  std::vector<UnitVec3> modes;
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        modes.emplace_back(
            Vec3(sx * inv_sqrt3, sy * inv_sqrt3, sz * inv_sqrt3));
  while (static_cast<int>(modes.size()) < n)
    modes.push_back(sample_uniform_sphere(rng));
  modes.resize(n);
  return modes;
}

inline Eigen::VectorXd cluster_latent(int cluster, int dim, double scale,
                                      SeededRng& rng) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  if (cluster < dim) {
    v[cluster] = scale;
  } else {
    for (int i = 0; i < dim; ++i) v[i] = normal01(rng);
    v *= scale / v.norm();
  }
  return v;
}

}  // namespace detail

inline SyntheticWorld generate_synthetic(const SyntheticWorldSpec& spec,
                                         std::uint64_t seed) {
  spec.validate();
  SeededRng rng = substream(seed, "synthetic-world");

  std::vector<UnitVec3> modes;
  if (spec.modes.empty()) {
    modes = detail::default_modes(spec.n_clusters, rng);
  } else {
    if (static_cast<int>(spec.modes.size()) != spec.n_clusters)
      throw DomainError("modes list must match n_clusters");
    for (const auto& g : spec.modes) modes.push_back(to_unit_vec(g));
  }
  std::vector<double> kappas = spec.kappas;
  if (kappas.empty()) kappas.assign(spec.n_clusters, 200.0);
  if (kappas.size() == 1)
    kappas.assign(spec.n_clusters, kappas.front());
  if (static_cast<int>(kappas.size()) != spec.n_clusters)
    throw DomainError("kappas list must match n_clusters");

  std::vector<Eigen::VectorXd> latents;
  for (int c = 0; c < spec.n_clusters; ++c)
    latents.push_back(detail::cluster_latent(c, spec.embed_dim,
                                             spec.cluster_scale, rng));

  SyntheticWorld world;
  char idbuf[64];
  for (int c = 0; c < spec.n_clusters; ++c) {
    for (int i = 0; i < spec.pairs_per_cluster; ++i) {
      const UnitVec3 loc = sample_vmf(rng, modes[c], kappas[c]);
      const GeoCoord geo = to_geo(loc);

      Eigen::VectorXd pair_latent = latents[c];
      for (int d = 0; d < spec.embed_dim; ++d)
        pair_latent[d] += spec.pair_sigma * normal01(rng);
      Eigen::VectorXd v_vgi = pair_latent, v_rsi = pair_latent;
      for (int d = 0; d < spec.embed_dim; ++d) {
        v_vgi[d] += spec.noise_sigma * normal01(rng);
        v_rsi[d] += spec.noise_sigma * normal01(rng);
      }

      std::snprintf(idbuf, sizeof(idbuf), "c%d-%05d", c, i);
      const std::string stem(idbuf);
      world.vgi.push_back({stem + "-vgi", geo, Modality::Vgi, v_vgi});
      world.rsi.push_back({stem + "-rsi", geo, Modality::Rsi, v_rsi});
      world.pairs.emplace_back(stem + "-vgi", stem + "-rsi");
      world.vgi_cluster.push_back(c);

      if (spec.distractor_fraction > 0.0 &&
          uniform01(rng) < spec.distractor_fraction &&
          spec.n_clusters > 1) {
        // same embedding, far location, id sorting before "-rsi"
        const int far = (c + spec.n_clusters / 2) % spec.n_clusters;
        const UnitVec3 dloc = sample_vmf(rng, modes[far], kappas[far]);
        world.rsi.push_back(
            {stem + "-dup", to_geo(dloc), Modality::Rsi, v_rsi});
      }
    }
  }
  return world;
}

}  // namespace geoflow
