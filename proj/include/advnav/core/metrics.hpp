#pragma once

#include <stdexcept>

#include "advnav/core/types.hpp"

namespace advnav {

/// Average displacement error: mean Euclidean position distance per step.
inline double ade(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("ade: length mismatch");
  if (pred.size() == 0) throw std::invalid_argument("ade: empty trajectory");
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t)
    sum += distance(pred[t].position, gt[t].position);
  return sum / static_cast<double>(pred.size());
}

/// Final displacement error: Euclidean position distance at the last step.
inline double fde(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("fde: length mismatch");
  if (pred.size() == 0) throw std::invalid_argument("fde: empty trajectory");
  return distance(pred.back().position, gt.back().position);
}

}  // namespace advnav
