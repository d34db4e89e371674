#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "advnav/core/types.hpp"

namespace advnav {

/// Clearance cost parameters. Distances are signed: center distance minus the
/// summed radii, so d < 0 means the bodies overlap.
struct CostParams {
  double epsilon = 0.2;  // m of clearance beyond contact
  enum class Aggregate { kMax, kSum } aggregate = Aggregate::kMax;

  void check() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("CostParams: epsilon must be > 0");
  }
};

struct ColCost {
  double value = 0.0;
  Vec2 grad_robot;  // d value / d robot position
  Vec2 grad_human;  // d value / d human position
};

/// Piecewise obstacle cost on the signed clearance d:
///   d < 0       ->  -d + eps/2          (linear in penetration)
///   0 <= d < eps -> (d - eps)^2 / (2 eps)
///   d >= eps    ->  0
/// C1 everywhere: both one-sided derivatives are -1 at d = 0 and 0 at d = eps.
inline ColCost col_cost(const AgentState& robot, const AgentState& human,
                        const CostParams& p) {
  const Vec2 diff = robot.position - human.position;
  const double center_dist = diff.norm();
  const double d = center_dist - robot.radius - human.radius;

  double value, dvalue_dd;
  if (d < 0.0) {
    value = -d + 0.5 * p.epsilon;
    dvalue_dd = -1.0;
  } else if (d < p.epsilon) {
    value = (d - p.epsilon) * (d - p.epsilon) / (2.0 * p.epsilon);
    dvalue_dd = (d - p.epsilon) / p.epsilon;
  } else {
    value = 0.0;
    dvalue_dd = 0.0;
  }

  // Direction of increasing d w.r.t. the robot position; zero when centers
  // coincide (the value is still well defined there).
  const Vec2 unit = center_dist > 0.0 ? diff / center_dist : Vec2{0.0, 0.0};
  ColCost out;
  out.value = value;
  out.grad_robot = unit * dvalue_dd;
  out.grad_human = -out.grad_robot;
  return out;
}

/// Trajectory pair cost: sum of col_cost over matched timesteps.
inline double pair_cost(const Trajectory& robot, const Trajectory& human,
                        const CostParams& p) {
  if (robot.size() != human.size())
    throw std::invalid_argument("pair_cost: trajectory length mismatch");
  double sum = 0.0;
  for (std::size_t t = 0; t < robot.size(); ++t)
    sum += col_cost(robot[t], human[t], p).value;
  return sum;
}

/// Same, with gradients w.r.t. every position of both trajectories.
struct PairCostGrad {
  double value = 0.0;
  std::vector<Vec2> grad_robot;
  std::vector<Vec2> grad_human;
};

inline PairCostGrad pair_cost_grad(const Trajectory& robot,
                                   const Trajectory& human,
                                   const CostParams& p) {
  if (robot.size() != human.size())
    throw std::invalid_argument("pair_cost: trajectory length mismatch");
  PairCostGrad out;
  out.grad_robot.resize(robot.size());
  out.grad_human.resize(robot.size());
  for (std::size_t t = 0; t < robot.size(); ++t) {
    const ColCost c = col_cost(robot[t], human[t], p);
    out.value += c.value;
    out.grad_robot[t] = c.grad_robot;
    out.grad_human[t] = c.grad_human;
  }
  return out;
}

struct SceneCost {
  double value = 0.0;
  int argmax_human = 0;  // lowest index on ties; gradients flow only here
};

/// Scene-level aggregation over humans. The default is the max rule ("the
/// human trajectory with the largest cost"); sum is available as a config
/// alternative.
inline SceneCost scene_cost(const Trajectory& robot,
                            const std::vector<Trajectory>& humans,
                            const CostParams& p) {
  SceneCost out;
  if (humans.empty()) return out;
  if (p.aggregate == CostParams::Aggregate::kSum) {
    for (const auto& h : humans) out.value += pair_cost(robot, h, p);
    return out;
  }
  out.value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < humans.size(); ++i) {
    const double c = pair_cost(robot, humans[i], p);
    if (c > out.value) {
      out.value = c;
      out.argmax_human = static_cast<int>(i);
    }
  }
  return out;
}

/// True when any timestep of any human is within body contact of the plan.
inline bool in_collision(const Trajectory& robot,
                         const std::vector<Trajectory>& humans) {
  for (const auto& h : humans) {
    const std::size_t n = std::min(robot.size(), h.size());
    for (std::size_t t = 0; t < n; ++t) {
      const double center = distance(robot[t].position, h[t].position);
      if (center < robot[t].radius + h[t].radius) return true;
    }
  }
  return false;
}

/// Fraction of scenes whose plan comes within body contact of some human.
inline double collision_rate(const std::vector<Trajectory>& plans,
                             const std::vector<std::vector<Trajectory>>& human_sets) {
  if (plans.size() != human_sets.size())
    throw std::invalid_argument("collision_rate: size mismatch");
  if (plans.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < plans.size(); ++i)
    if (in_collision(plans[i], human_sets[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(plans.size());
}

}  // namespace advnav
