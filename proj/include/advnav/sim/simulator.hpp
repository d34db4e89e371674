#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "advnav/core/types.hpp"
#include "advnav/cost/chomp.hpp"
#include "advnav/rng.hpp"
#include "advnav/sim/orca.hpp"

namespace advnav {

/// Circle-crossing crowd simulation parameters. Defaults mirror the usual
/// CrowdNav setup: five unresponsive ORCA humans, dt chosen so that an 8-step
/// history spans 2 seconds.
struct SimConfig {
  int n_humans = 5;
  double dt = 0.25;            // s
  double arena_radius = 4.0;   // m, circle the agents start on
  double v_max = 1.0;          // m/s, every agent
  double agent_radius = 0.3;   // m
  double orca_tau = 5.0;       // s, ORCA time horizon
  int episode_max_steps = 100;
  double goal_tolerance = 0.3;   // m, robot episode termination
  double placement_margin = 0.2; // m beyond summed radii between starts

  // Privileged demonstrator: receding-horizon search over a velocity grid.
  int demo_speeds = 5;
  int demo_headings = 16;
  double demo_margin = 0.1;      // m of radius inflation
  int demo_rollout = 8;          // steps
  double demo_cost_weight = 10.0;
  double demo_epsilon = 0.2;     // clearance threshold fed to the cost

  // Windowing of recorded episodes.
  int history = 8;
  int horizon = 8;

  void check() const {
    if (n_humans < 1) throw std::invalid_argument("SimConfig: n_humans must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be > 0");
    if (!(v_max > 0.0)) throw std::invalid_argument("SimConfig: v_max must be > 0");
    if (!(orca_tau > 0.0)) throw std::invalid_argument("SimConfig: orca_tau must be > 0");
    if (!(agent_radius > 0.0)) throw std::invalid_argument("SimConfig: agent_radius must be > 0");
    if (episode_max_steps < 1)
      throw std::invalid_argument("SimConfig: episode_max_steps must be >= 1");
    if (history < 1 || horizon < 1)
      throw std::invalid_argument("SimConfig: history/horizon must be >= 1");
  }
};

/// Start and goal layout for one episode.
struct ScenarioSpec {
  Vec2 robot_start;
  Vec2 robot_goal;
  std::vector<Vec2> human_starts;
  std::vector<Vec2> human_goals;
};

/// Places the robot across the circle (bottom to top) and the humans on the
/// remaining arc with angular jitter, goals near the antipodal points.
/// Resamples until no two starts are within summed radii plus margin.
inline ScenarioSpec sample_scenario(const SimConfig& cfg, std::uint64_t seed) {
  cfg.check();
  Rng rng(mix_seed(seed, 0xa6e0));
  const double R = cfg.arena_radius;
  const int slots = cfg.n_humans + 1;
  const double slot_angle = 2.0 * M_PI / slots;
  const double start_jitter = 0.4 * slot_angle;
  const double goal_jitter = 0.1;  // rad

  ScenarioSpec spec;
  spec.robot_start = {0.0, -R};
  spec.robot_goal = {0.0, R};

  const int max_attempts = 1000;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    spec.human_starts.clear();
    spec.human_goals.clear();
    for (int i = 0; i < cfg.n_humans; ++i) {
      const double base = -M_PI / 2.0 + slot_angle * (i + 1);
      const double theta = base + rng.uniform(-start_jitter, start_jitter);
      const double goal_theta = theta + M_PI + rng.uniform(-goal_jitter, goal_jitter);
      spec.human_starts.push_back({R * std::cos(theta), R * std::sin(theta)});
      spec.human_goals.push_back({R * std::cos(goal_theta), R * std::sin(goal_theta)});
    }

    std::vector<Vec2> starts = spec.human_starts;
    starts.push_back(spec.robot_start);
    const double min_gap = 2.0 * cfg.agent_radius + cfg.placement_margin;
    bool ok = true;
    for (std::size_t i = 0; i < starts.size() && ok; ++i)
      for (std::size_t j = i + 1; j < starts.size() && ok; ++j)
        if (distance(starts[i], starts[j]) < min_gap) ok = false;
    if (ok) return spec;
  }
  throw std::runtime_error(
      "sample_scenario: could not place " + std::to_string(cfg.n_humans) +
      " humans of radius " + std::to_string(cfg.agent_radius) +
      " on a circle of radius " + std::to_string(cfg.arena_radius) + " after " +
      std::to_string(max_attempts) + " attempts");
}

/// One ORCA step for the unresponsive humans. Each human only sees the other
/// humans; the robot never enters their neighbor sets.
inline std::vector<AgentState> step_humans(const std::vector<AgentState>& humans,
                                           const std::vector<Vec2>& goals,
                                           const SimConfig& cfg) {
  std::vector<AgentState> next = humans;
  std::vector<Vec2> chosen(humans.size());
  for (std::size_t i = 0; i < humans.size(); ++i) {
    std::vector<AgentState> others;
    others.reserve(humans.size() - 1);
    for (std::size_t j = 0; j < humans.size(); ++j)
      if (j != i) others.push_back(humans[j]);
    const Vec2 v_pref = preferred_velocity(humans[i], goals[i], cfg.v_max, cfg.dt);
    const auto planes = orca_halfplanes(humans[i], others, cfg.orca_tau, cfg.dt);
    chosen[i] = solve_velocity(planes, v_pref, cfg.v_max);
  }
  for (std::size_t i = 0; i < humans.size(); ++i) {
    next[i].velocity = chosen[i];
    next[i].position = humans[i].position + chosen[i] * cfg.dt;
  }
  return next;
}

/// Human-only rollout used by the privileged demonstrator and as ground truth
/// for their future motion.
inline std::vector<Trajectory> rollout_humans(std::vector<AgentState> humans,
                                              const std::vector<Vec2>& goals,
                                              const SimConfig& cfg, int steps) {
  std::vector<Trajectory> futures(humans.size());
  for (auto& f : futures) f.dt = cfg.dt;
  for (int s = 0; s < steps; ++s) {
    humans = step_humans(humans, goals, cfg);
    for (std::size_t i = 0; i < humans.size(); ++i)
      futures[i].states.push_back(humans[i]);
  }
  return futures;
}

namespace detail {

struct Candidate {
  Vec2 velocity;
  double heading_change = 0.0;
  double speed = 0.0;
};

}  // namespace detail

/// Receding-horizon expert action: scores every (speed, heading) candidate's
/// constant-velocity rollout against the humans' true future with radii
/// inflated by the safety margin. Any candidate that dips below the margin is
/// ranked strictly after every candidate that does not, so the expert keeps
/// margin clearance whenever the grid allows it. Ties break toward smaller
/// heading change, then lower speed.
inline Vec2 demonstrate(const AgentState& robot, const Vec2& robot_goal,
                        const std::vector<Trajectory>& human_future,
                        const SimConfig& cfg) {
  const int K = cfg.demo_rollout;
  CostParams cost_params;
  cost_params.epsilon = cfg.demo_epsilon;

  const Vec2 to_goal = robot_goal - robot.position;
  const double ref_heading = robot.velocity.norm() > 1e-9
                                 ? std::atan2(robot.velocity.y, robot.velocity.x)
                                 : std::atan2(to_goal.y, to_goal.x);

  std::vector<detail::Candidate> candidates;
  candidates.push_back({{0.0, 0.0}, 0.0, 0.0});  // stop is always available
  for (int si = 1; si <= cfg.demo_speeds; ++si) {
    const double speed = cfg.v_max * si / cfg.demo_speeds;
    for (int hi = 0; hi < cfg.demo_headings; ++hi) {
      const double heading = 2.0 * M_PI * hi / cfg.demo_headings;
      double dh = std::remainder(heading - ref_heading, 2.0 * M_PI);
      candidates.push_back(
          {{speed * std::cos(heading), speed * std::sin(heading)},
           std::abs(dh), speed});
    }
  }

  double best_score = 0.0, best_heading = 0.0, best_speed = 0.0;
  Vec2 best_velocity;
  bool first = true;
  for (const auto& cand : candidates) {
    Trajectory roll;
    roll.dt = cfg.dt;
    for (int s = 1; s <= K; ++s) {
      AgentState st;
      st.position = robot.position + cand.velocity * (cfg.dt * s);
      st.velocity = cand.velocity;
      st.radius = robot.radius + cfg.demo_margin;  // inflated
      roll.states.push_back(st);
    }

    double penetration = 0.0;
    for (const auto& h : human_future)
      for (int s = 0; s < K; ++s) {
        const double clearance = distance(roll[s].position, h[s].position) -
                                 roll[s].radius - h[s].radius;
        penetration = std::max(penetration, -clearance);
      }

    const double goal_term = distance(roll.back().position, robot_goal);
    const double cost_term =
        cfg.demo_cost_weight * scene_cost(roll, human_future, cost_params).value;
    double score = goal_term + cost_term;
    if (penetration > 0.0) score += 1e6 + 1e3 * penetration;

    const bool better =
        first || score < best_score ||
        (score == best_score && (cand.heading_change < best_heading ||
                                 (cand.heading_change == best_heading &&
                                  cand.speed < best_speed)));
    if (better) {
      best_score = score;
      best_heading = cand.heading_change;
      best_speed = cand.speed;
      best_velocity = cand.velocity;
      first = false;
    }
  }
  return best_velocity;
}

/// Runs one full episode and records every frame. Frame t stores the position
/// at t together with the action taken at t, so consecutive frames satisfy
/// p[t+1] = p[t] + v[t]*dt exactly.
inline EpisodeRecord run_episode(const SimConfig& cfg, std::uint64_t seed) {
  cfg.check();
  const ScenarioSpec spec = sample_scenario(cfg, seed);

  EpisodeRecord rec;
  rec.seed = seed;
  rec.robot_index = 0;
  rec.agents.push_back({0, cfg.agent_radius, spec.robot_goal});
  for (int i = 0; i < cfg.n_humans; ++i)
    rec.agents.push_back({i + 1, cfg.agent_radius, spec.human_goals[i]});

  AgentState robot{spec.robot_start, {0.0, 0.0}, cfg.agent_radius};
  std::vector<AgentState> humans;
  for (int i = 0; i < cfg.n_humans; ++i)
    humans.push_back({spec.human_starts[i], {0.0, 0.0}, cfg.agent_radius});

  auto record_frame = [&](const AgentState& r, const std::vector<AgentState>& hs) {
    std::vector<AgentState> frame;
    frame.reserve(hs.size() + 1);
    frame.push_back(r);
    frame.insert(frame.end(), hs.begin(), hs.end());
    rec.frames.push_back(std::move(frame));
  };

  for (int t = 0; t < cfg.episode_max_steps; ++t) {
    if (distance(robot.position, spec.robot_goal) < cfg.goal_tolerance) break;

    const auto human_future =
        rollout_humans(humans, spec.human_goals, cfg, cfg.demo_rollout);
    const Vec2 action = demonstrate(robot, spec.robot_goal, human_future, cfg);
    const auto next_humans = step_humans(humans, spec.human_goals, cfg);

    robot.velocity = action;
    std::vector<AgentState> frame_humans = humans;
    for (std::size_t i = 0; i < humans.size(); ++i)
      frame_humans[i].velocity = next_humans[i].velocity;
    record_frame(robot, frame_humans);
    robot.position = robot.position + action * cfg.dt;
    humans = next_humans;
  }
  // Terminal frame; its velocity repeats the last action and constrains nothing.
  record_frame(robot, humans);
  return rec;
}

/// Episode-level collision check used for the expert quality gate.
inline bool episode_has_collision(const EpisodeRecord& rec) {
  for (const auto& frame : rec.frames) {
    const auto& robot = frame[static_cast<std::size_t>(rec.robot_index)];
    for (std::size_t a = 0; a < frame.size(); ++a) {
      if (static_cast<int>(a) == rec.robot_index) continue;
      if (distance(robot.position, frame[a].position) <
          robot.radius + frame[a].radius)
        return true;
    }
  }
  return false;
}

}  // namespace advnav
