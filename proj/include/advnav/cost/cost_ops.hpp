#pragma once

#include <vector>

#include "advnav/cost/chomp.hpp"
#include "advnav/diff/tape.hpp"

namespace advnav {

/// Obstacle cost between two T x 2 position nodes as a differentiable tape
/// op. Forward and backward both route through col_cost, so the analytic
/// gradients used in training are the same ones the unit oracle verifies.
inline diff::Node chomp_pair_cost_node(diff::Tape& tape, diff::Node robot_pos,
                                       diff::Node human_pos, double robot_radius,
                                       double human_radius, const CostParams& p) {
  const diff::Mat& rp = tape.value(robot_pos);
  const diff::Mat& hp = tape.value(human_pos);
  if (rp.rows() != hp.rows() || rp.cols() != 2 || hp.cols() != 2)
    throw std::invalid_argument("chomp_pair_cost: positions must be T x 2");

  double total = 0.0;
  diff::Mat grad_r(rp.rows(), 2), grad_h(rp.rows(), 2);
  for (Eigen::Index t = 0; t < rp.rows(); ++t) {
    AgentState r{{rp(t, 0), rp(t, 1)}, {}, robot_radius};
    AgentState h{{hp(t, 0), hp(t, 1)}, {}, human_radius};
    const ColCost c = col_cost(r, h, p);
    total += c.value;
    grad_r(t, 0) = c.grad_robot.x;
    grad_r(t, 1) = c.grad_robot.y;
    grad_h(t, 0) = c.grad_human.x;
    grad_h(t, 1) = c.grad_human.y;
  }

  diff::Mat out(1, 1);
  out(0, 0) = total;
  return tape.custom_binary(
      robot_pos, human_pos, std::move(out),
      [grad_r, grad_h](const diff::Mat& g, diff::Mat& ga, diff::Mat& gb) {
        ga = g(0, 0) * grad_r;
        gb = g(0, 0) * grad_h;
      });
}

/// Max (or sum) over per-human pair costs. With the max rule the subgradient
/// flows only through the argmax human, ties to the lowest index.
inline diff::Node scene_cost_node(diff::Tape& tape, diff::Node robot_pos,
                                  const std::vector<diff::Node>& human_pos,
                                  double robot_radius,
                                  const std::vector<double>& human_radii,
                                  const CostParams& p) {
  if (human_pos.empty()) return tape.scalar_constant(0.0);
  std::vector<diff::Node> pair_costs;
  pair_costs.reserve(human_pos.size());
  for (std::size_t i = 0; i < human_pos.size(); ++i)
    pair_costs.push_back(chomp_pair_cost_node(tape, robot_pos, human_pos[i],
                                              robot_radius, human_radii[i], p));
  const diff::Node stacked = tape.vstack(pair_costs);
  if (p.aggregate == CostParams::Aggregate::kSum) return tape.sum(stacked);
  return tape.max_all(stacked);
}

/// Isotropic Gaussian negative log-likelihood with the constant dropped:
/// sum over steps of |pred - gt|^2 / (2 sigma^2).
inline diff::Node nll_node(diff::Tape& tape, diff::Node pred_pos,
                           const diff::Mat& gt_pos, double sigma) {
  const diff::Node diffn = tape.sub(pred_pos, tape.constant(gt_pos));
  return tape.scale(tape.sum(tape.square(diffn)), 1.0 / (2.0 * sigma * sigma));
}

}  // namespace advnav
