#pragma once

#include <string>
#include <vector>

#include "advnav/core/types.hpp"
#include "advnav/cost/cost_ops.hpp"
#include "advnav/model/model.hpp"

namespace advnav {

/// One minibatch element of the adversarial game: the demonstration tuple
/// plus the current players' rollouts on it, all as position matrices.
struct GameSample {
  ContextWindow window;
  diff::Mat demo_positions;                    // xi_R
  std::vector<diff::Mat> gt_human_positions;   // xi_H
  std::vector<diff::Mat> forecast_positions;   // current forecasts
  diff::Mat plan_positions;                    // current plan
  double robot_radius = 0.0;
  std::vector<double> human_radii;
};

inline GameSample make_game_sample(ContextWindow window, ForecasterModel& f,
                                   PlannerModel& p) {
  GameSample s;
  s.window = std::move(window);
  s.demo_positions = trajectory_positions(s.window.robot_future);
  for (const auto& h : s.window.human_futures)
    s.gt_human_positions.push_back(trajectory_positions(h));
  const auto& ctx = s.window.context;
  const auto ego = static_cast<std::size_t>(ctx.robot_index);
  s.robot_radius = ctx.histories[ego].back().radius;
  for (std::size_t a = 0; a < ctx.num_agents(); ++a)
    if (a != ego) s.human_radii.push_back(ctx.histories[a].back().radius);

  {
    diff::Tape tape;
    const auto out = f.forward(tape, ctx);
    for (const auto& node : out.positions)
      s.forecast_positions.push_back(tape.value(node));
  }
  {
    diff::Tape tape;
    s.plan_positions = tape.value(p.forward(tape, ctx, s.forecast_positions));
  }
  return s;
}

struct LossBreakdown {
  diff::Node total;        // live on the caller's tape
  double cost_diff = 0.0;  // batch mean of the cost-difference term
  double nll = 0.0;        // batch mean of the likelihood term (unweighted)
  double mean_plan_cost = 0.0;  // plans scored against current forecasts
};

/// Forecaster round loss: mean over the batch of
///   scene_cost(xi_R, xi_hat_H(theta)) - scene_cost(xi_hat_R, xi_hat_H(theta))
///     + lambda * sum_h nll(xi_hat_H(theta), xi_H)
/// with the current plans held constant. Minimizing it pushes forecasts
/// toward futures the current planner handles worse than the demonstrator,
/// anchored to the data by the likelihood term.
inline LossBreakdown forecaster_round_loss(diff::Tape& tape, ForecasterModel& f,
                                           const std::vector<GameSample>& batch,
                                           double lambda,
                                           const CostParams& cost_params) {
  std::vector<diff::Node> cost_terms, nll_terms;
  for (const auto& s : batch) {
    const auto out = f.forward(tape, s.window.context);
    const diff::Node demo_cost = scene_cost_node(
        tape, tape.constant(s.demo_positions), out.positions, s.robot_radius,
        s.human_radii, cost_params);
    const diff::Node plan_cost = scene_cost_node(
        tape, tape.constant(s.plan_positions), out.positions, s.robot_radius,
        s.human_radii, cost_params);
    cost_terms.push_back(tape.sub(demo_cost, plan_cost));

    diff::Node nll_sum = tape.scalar_constant(0.0);
    for (std::size_t h = 0; h < out.positions.size(); ++h)
      nll_sum = tape.add(nll_sum, nll_node(tape, out.positions[h],
                                           s.gt_human_positions[h], f.cfg.sigma));
    nll_terms.push_back(nll_sum);
  }
  const diff::Node cost_mean = tape.mean(tape.vstack(cost_terms));
  const diff::Node nll_mean = tape.mean(tape.vstack(nll_terms));
  LossBreakdown out;
  out.total = tape.add(cost_mean, tape.scale(nll_mean, lambda));
  out.cost_diff = tape.scalar(cost_mean);
  out.nll = tape.scalar(nll_mean);
  return out;
}

/// Planner round loss: mean over the batch of
///   scene_cost(xi_hat_R(psi), xi_hat_H) - scene_cost(xi_R, xi_hat_H)
///     + beta * nll(xi_hat_R(psi), xi_R)
/// with the forecasts held constant. The demo-cost term carries no psi
/// gradient and is kept for logging.
inline LossBreakdown planner_round_loss(diff::Tape& tape, PlannerModel& p,
                                        const std::vector<GameSample>& batch,
                                        double beta,
                                        const CostParams& cost_params) {
  std::vector<diff::Node> cost_terms, nll_terms;
  double plan_cost_sum = 0.0;
  for (const auto& s : batch) {
    const diff::Node plan =
        p.forward(tape, s.window.context, s.forecast_positions);
    std::vector<diff::Node> forecast_nodes;
    forecast_nodes.reserve(s.forecast_positions.size());
    for (const auto& m : s.forecast_positions)
      forecast_nodes.push_back(tape.constant(m));

    const diff::Node plan_cost = scene_cost_node(
        tape, plan, forecast_nodes, s.robot_radius, s.human_radii, cost_params);
    const diff::Node demo_cost = scene_cost_node(
        tape, tape.constant(s.demo_positions), forecast_nodes, s.robot_radius,
        s.human_radii, cost_params);
    cost_terms.push_back(tape.sub(plan_cost, demo_cost));
    nll_terms.push_back(nll_node(tape, plan, s.demo_positions, p.cfg.sigma));
    plan_cost_sum += tape.scalar(plan_cost);
  }
  const diff::Node cost_mean = tape.mean(tape.vstack(cost_terms));
  const diff::Node nll_mean = tape.mean(tape.vstack(nll_terms));
  LossBreakdown out;
  out.total = tape.add(cost_mean, tape.scale(nll_mean, beta));
  out.cost_diff = tape.scalar(cost_mean);
  out.nll = tape.scalar(nll_mean);
  out.mean_plan_cost = plan_cost_sum / static_cast<double>(batch.size());
  return out;
}

}  // namespace advnav
