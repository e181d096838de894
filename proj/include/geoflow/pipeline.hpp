#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geoflow/checkpoint.hpp"
#include "geoflow/density.hpp"
#include "geoflow/eval.hpp"
#include "geoflow/flowmatch.hpp"
#include "geoflow/retrieval.hpp"

namespace geoflow {

enum class FallbackPolicy { GenerativePoint, GlobalRetrieval };
enum class ConditionSource { Raw, Projected };

inline FallbackPolicy fallback_from_string(const std::string& s) {
  if (s == "generative-point") return FallbackPolicy::GenerativePoint;
  if (s == "global-retrieval") return FallbackPolicy::GlobalRetrieval;
  throw ConfigError("unknown fallback policy: " + s);
}

inline ConditionSource condition_from_string(const std::string& s) {
  if (s == "raw") return ConditionSource::Raw;
  if (s == "projected") return ConditionSource::Projected;
  throw ConfigError("unknown condition source: " + s);
}

struct ProbGLCConfig {
  std::optional<double> r_km = 50.0;  // nullopt = unbounded region
  int rfm_steps = 250;
  int draws = 32;
  int anchors = 10;
  double alpha = 0.5;
  int localizability_samples = 0;  // 0 = do not attach
  int localizability_steps = 200;
  FallbackPolicy fallback = FallbackPolicy::GenerativePoint;
  ConditionSource condition = ConditionSource::Raw;
  std::uint64_t seed = 0;

  void validate() const {
    if (r_km && !(*r_km > 0.0))
      throw ConfigError("r_km must be positive when bounded");
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw ConfigError("alpha must lie in [0, 1]");
    if (rfm_steps < 1 || draws < 1 || anchors < 1)
      throw ConfigError("steps, draws and anchors must be >= 1");
  }
};

struct GeolocationResult {
  std::string query_id;
  GeoCoord final;
  GeoCoord generative_center;
  RankedList retrieval_list;  // empty when the region filtered out everything
  std::optional<LocalizabilityScore> localizability;
  bool used_fallback = false;
};

namespace detail {

inline Eigen::VectorXd condition_vector(const EmbeddingRecord& query,
                                        const ProjectionHeads& heads,
                                        ConditionSource source) {
  return source == ConditionSource::Raw
             ? query.vec
             : heads.project(query.vec, Modality::Vgi);
}

// full ranking of the gallery (optionally region-restricted) + reranking
inline RankedList ranked_candidates(const EmbeddingRecord& query,
                                    const Gallery& gallery,
                                    const ProjectionHeads& heads,
                                    const std::optional<Region>& region,
                                    int anchors, double alpha) {
  RankedList base = retrieve_topk(query, gallery, heads,
                                  static_cast<int>(gallery.size()), region);
  const int k = std::min<int>(anchors, static_cast<int>(base.size()));
  return rerank(query, base, gallery, heads, k, alpha);
}

}  // namespace detail

// The ProbGLC fusion for one query: generative center -> radius-restricted
// retrieval -> anchor reranking -> top-1, with the configured fallback when
// the r-ball holds no gallery record.
inline GeolocationResult geolocate(const EmbeddingRecord& query,
                                   const Gallery& gallery,
                                   const Checkpoint& model,
                                   const ProjectionHeads& heads,
                                   const ProbGLCConfig& cfg) {
  cfg.validate();
  if (query.modality != Modality::Vgi)
    throw ConfigError("geolocate query must be VGI modality");
  if (model.meta.method != Method::Rfm)
    throw ConfigError("geolocate requires an RFM checkpoint, got " +
                      to_string(model.meta.method));
  const Eigen::VectorXd c =
      detail::condition_vector(query, heads, cfg.condition);
  if (c.size() != model.net.cond_dim)
    throw ConfigError("condition dimension " + std::to_string(c.size()) +
                      " does not match checkpoint cond_dim " +
                      std::to_string(model.net.cond_dim));

  const Schedule sched = schedule_of(model.meta);
  SeededRng rng = substream(cfg.seed, fnv1a(query.id));

  GeolocationResult res;
  res.query_id = query.id;
  res.generative_center =
      predict_location(model.net, c, cfg.rfm_steps, cfg.draws, rng, sched);

  std::optional<Region> region;
  if (cfg.r_km) region = Region{res.generative_center, *cfg.r_km};
  try {
    res.retrieval_list = detail::ranked_candidates(
        query, gallery, heads, region, cfg.anchors, cfg.alpha);
    res.final = res.retrieval_list.front().geo;
  } catch (const EmptyRegionError&) {
    res.used_fallback = true;
    if (cfg.fallback == FallbackPolicy::GenerativePoint) {
      res.final = res.generative_center;
    } else {
      res.retrieval_list = detail::ranked_candidates(
          query, gallery, heads, std::nullopt, cfg.anchors, cfg.alpha);
      res.final = res.retrieval_list.front().geo;
    }
  }

  if (cfg.localizability_samples > 0)
    res.localizability =
        localizability(model.net, c, cfg.localizability_samples,
                       cfg.localizability_steps, rng, sched);
  return res;
}

inline std::vector<GeolocationResult> geolocate_batch(
    const std::vector<EmbeddingRecord>& queries, const Gallery& gallery,
    const Checkpoint& model, const ProjectionHeads& heads,
    const ProbGLCConfig& cfg) {
  std::vector<GeolocationResult> out;
  out.reserve(queries.size());
  for (const auto& q : queries)
    out.push_back(geolocate(q, gallery, model, heads, cfg));
  return out;
}

struct SweepRow {
  std::optional<double> radius_km;  // nullopt = unbounded
  EvalReport report;
};

inline const std::vector<double>& default_acc_radii() {
  static const std::vector<double> radii{1.0, 25.0, 50.0, 200.0};
  return radii;
}

// Ablation over the decision threshold r. The generative pass runs once per
// query; each radius reuses the cached centers, so a row equals an
// independent geolocate run at that radius with the same seed.
inline std::vector<SweepRow> threshold_sweep(
    const std::vector<EmbeddingRecord>& queries, const Gallery& gallery,
    const Checkpoint& model, const ProjectionHeads& heads,
    const ProbGLCConfig& cfg,
    const std::vector<std::optional<double>>& radii) {
  cfg.validate();
  if (radii.empty()) throw ConfigError("sweep needs at least one radius");
  for (const auto& r : radii)
    if (r && !(*r > 0.0)) throw ConfigError("sweep radii must be positive");
  if (model.meta.method != Method::Rfm)
    throw ConfigError("sweep requires an RFM checkpoint");

  const Schedule sched = schedule_of(model.meta);
  std::vector<GeoCoord> centers;
  std::vector<GeoCoord> truths;
  centers.reserve(queries.size());
  truths.reserve(queries.size());
  for (const auto& q : queries) {
    const Eigen::VectorXd c =
        detail::condition_vector(q, heads, cfg.condition);
    if (c.size() != model.net.cond_dim)
      throw ConfigError("condition dimension mismatch for query " + q.id);
    SeededRng rng = substream(cfg.seed, fnv1a(q.id));
    centers.push_back(
        predict_location(model.net, c, cfg.rfm_steps, cfg.draws, rng, sched));
    truths.push_back(q.geo);
  }

  std::vector<SweepRow> rows;
  rows.reserve(radii.size());
  for (const auto& r : radii) {
    std::vector<GeoCoord> preds;
    preds.reserve(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
      std::optional<Region> region;
      if (r) region = Region{centers[i], *r};
      GeoCoord final = centers[i];
      try {
        final = detail::ranked_candidates(queries[i], gallery, heads, region,
                                          cfg.anchors, cfg.alpha)
                    .front()
                    .geo;
      } catch (const EmptyRegionError&) {
        if (cfg.fallback == FallbackPolicy::GlobalRetrieval)
          final = detail::ranked_candidates(queries[i], gallery, heads,
                                            std::nullopt, cfg.anchors,
                                            cfg.alpha)
                      .front()
                      .geo;
      }
      preds.push_back(final);
    }
    SweepRow row;
    row.radius_km = r;
    row.report = make_report(preds, truths, default_acc_radii());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace geoflow
