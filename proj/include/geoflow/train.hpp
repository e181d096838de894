#pragma once

#include <vector>

#include "geoflow/checkpoint.hpp"
#include "geoflow/diffusion.hpp"
#include "geoflow/fieldnet.hpp"
#include "geoflow/flowmatch.hpp"
#include "geoflow/retrieval.hpp"

namespace geoflow {

struct FieldTrainConfig {
  Method method = Method::Rfm;
  Schedule schedule;
  std::vector<int> hidden{256, 256, 256};
  int time_dim = 64;
  Activation activation = Activation::Gelu;
  double learning_rate = 1e-3;
  int batch = 256;
  int steps = 10000;
  std::uint64_t seed = 0;
  int loss_every = 50;
};

inline std::vector<ConditionedPoint> to_training_points(
    const std::vector<EmbeddingRecord>& records) {
  std::vector<ConditionedPoint> pts;
  pts.reserve(records.size());
  for (const auto& r : records)
    pts.push_back({to_unit_vec(r.geo), r.vec});
  return pts;
}

// Single-writer Adam loop shared by the three generative methods; the per
// item (t, noise, target) construction is the only method-specific part.
inline Checkpoint train_field_model(const std::vector<ConditionedPoint>& data,
                                    const FieldTrainConfig& cfg) {
  if (data.empty()) throw DomainError("training dataset is empty");
  const int cond_dim = static_cast<int>(data[0].cond.size());

  Eigen::MatrixXd X0_all, C_all;
  detail::pack_batch(std::span<const ConditionedPoint>(data), X0_all, C_all);

  SeededRng rng = substream(cfg.seed, "train-field");
  Checkpoint ck;
  ck.net = FieldNet::make(cfg.hidden, cfg.time_dim, cond_dim,
                          cfg.activation, rng);
  ck.meta.method = cfg.method;
  ck.meta.schedule = cfg.schedule.kind;
  ck.meta.t_clamp_min = cfg.schedule.t_clamp_min;
  ck.meta.seed = cfg.seed;
  ck.meta.train_steps = static_cast<std::uint32_t>(cfg.steps);

  OptimizerState opt = OptimizerState::make(ck.net, cfg.learning_rate);
  const int batch =
      std::min<int>(cfg.batch, static_cast<int>(data.size()));
  Eigen::MatrixXd X0(batch, 3), C(batch, cond_dim);

  for (int step = 0; step < cfg.steps; ++step) {
    for (int i = 0; i < batch; ++i) {
      const auto idx =
          static_cast<Eigen::Index>(uniform_index(rng, data.size()));
      X0.row(i) = X0_all.row(idx);
      C.row(i) = C_all.row(idx);
    }
    double loss = 0.0;
    Gradients grads;
    switch (cfg.method) {
      case Method::Ddpm: {
        const auto d = detail::ddpm_draw(X0, cfg.schedule, rng);
        std::tie(loss, grads) = backward(ck.net, d.xt, d.t, C, d.targets,
                                         LossKind::SquaredError);
        break;
      }
      case Method::Fm: {
        const auto d = detail::fm_draw(X0, cfg.schedule, rng);
        std::tie(loss, grads) = backward(ck.net, d.xt, d.t, C, d.targets,
                                         LossKind::SquaredError);
        break;
      }
      case Method::Rfm: {
        const auto d = detail::rfm_draw(X0, cfg.schedule, rng);
        std::tie(loss, grads) = backward(ck.net, d.xt, d.t, C, d.targets,
                                         LossKind::TangentSquaredError);
        break;
      }
    }
    adam_step(ck.net, opt, grads);
    if (cfg.loss_every > 0 &&
        (step % cfg.loss_every == 0 || step + 1 == cfg.steps))
      ck.meta.loss_curve.push_back(loss);
  }
  return ck;
}

}  // namespace geoflow
