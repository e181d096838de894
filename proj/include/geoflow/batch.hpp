#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "geoflow/errors.hpp"
#include "geoflow/sphere.hpp"

namespace geoflow {

// One training item for the generative models: a location on S^2 and the
// conditioning embedding of the matching query imagery.
struct ConditionedPoint {
  UnitVec3 x0;
  Eigen::VectorXd cond;
};

namespace detail {

inline void pack_batch(std::span<const ConditionedPoint> items,
                       Eigen::MatrixXd& X0, Eigen::MatrixXd& C) {
  if (items.empty()) throw ShapeError("empty batch");
  const Eigen::Index n = static_cast<Eigen::Index>(items.size());
  const Eigen::Index d = items[0].cond.size();
  X0.resize(n, 3);
  C.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (items[i].cond.size() != d)
      throw ShapeError("inconsistent condition dimension in batch");
    X0.row(i) = items[i].x0.vec();
    C.row(i) = items[i].cond;
  }
}

}  // namespace detail
}  // namespace geoflow
