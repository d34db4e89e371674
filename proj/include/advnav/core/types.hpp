#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "advnav/geometry.hpp"

namespace advnav {

/// Kinematic state of one agent at one timestep.
struct AgentState {
  Vec2 position;  // m
  Vec2 velocity;  // m/s
  double radius = 0.0;  // m, > 0

  bool valid() const {
    return radius > 0.0 && position.finite() && velocity.finite();
  }
};

/// Ordered sequence of states at a fixed timestep. Velocities act as the
/// agent's actions under unit-gain kinematics p[t+1] = p[t] + v[t]*dt.
struct Trajectory {
  std::vector<AgentState> states;
  double dt = 0.0;  // s, > 0

  std::size_t size() const { return states.size(); }
  const AgentState& back() const { return states.back(); }
  const AgentState& operator[](std::size_t i) const { return states[i]; }

  void check() const {
    if (states.empty()) throw std::invalid_argument("Trajectory: empty");
    if (!(dt > 0.0)) throw std::invalid_argument("Trajectory: dt must be > 0");
  }

  /// Max deviation from the integration relation over consecutive states.
  double integration_residual() const {
    double worst = 0.0;
    for (std::size_t t = 0; t + 1 < states.size(); ++t) {
      const Vec2 predicted = states[t].position + states[t].velocity * dt;
      worst = std::max(worst, (states[t + 1].position - predicted).norm());
    }
    return worst;
  }
  bool integration_consistent(double tol = 1e-6) const {
    return integration_residual() <= tol;
  }
};

/// Conditioning input for forecaster and planner: per-agent H-step histories,
/// per-agent goals with a visibility flag (only the ego goal is ever visible,
/// and only to the planner), and a symmetric neighbor relation.
struct SceneContext {
  std::vector<std::vector<AgentState>> histories;  // [agent][H]
  int robot_index = 0;
  std::vector<Vec2> goals;
  std::vector<bool> goal_visible;          // true only where a planner may look
  std::vector<std::uint8_t> adjacency;     // n*n symmetric, zero diagonal
  double dt = 0.0;

  std::size_t num_agents() const { return histories.size(); }
  std::size_t history_len() const { return histories.empty() ? 0 : histories[0].size(); }
  bool adjacent(std::size_t i, std::size_t j) const {
    return adjacency[i * num_agents() + j] != 0;
  }

  void check() const {
    const std::size_t n = num_agents();
    if (n == 0) throw std::invalid_argument("SceneContext: no agents");
    const std::size_t h = histories[0].size();
    if (h == 0) throw std::invalid_argument("SceneContext: empty history");
    for (const auto& hist : histories)
      if (hist.size() != h)
        throw std::invalid_argument("SceneContext: ragged histories");
    if (robot_index < 0 || static_cast<std::size_t>(robot_index) >= n)
      throw std::invalid_argument("SceneContext: robot_index out of range");
    if (goals.size() != n || goal_visible.size() != n || adjacency.size() != n * n)
      throw std::invalid_argument("SceneContext: field size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      if (adjacency[i * n + i] != 0)
        throw std::invalid_argument("SceneContext: self-edge in adjacency");
      for (std::size_t j = 0; j < n; ++j)
        if (adjacency[i * n + j] != adjacency[j * n + i])
          throw std::invalid_argument("SceneContext: adjacency not symmetric");
    }
  }
};

/// One demonstration episode: raw per-agent frames plus enough metadata to
/// window it into (context, robot future, human futures) training tuples.
struct EpisodeRecord {
  struct AgentInfo {
    int id = 0;
    double radius = 0.0;
    Vec2 goal;
  };

  std::uint64_t seed = 0;
  int robot_index = 0;
  std::vector<AgentInfo> agents;
  // frames[t][agent]; radius inside each AgentState mirrors agents[i].radius.
  std::vector<std::vector<AgentState>> frames;

  std::size_t num_frames() const { return frames.size(); }
  std::size_t num_agents() const { return agents.size(); }

  /// Windows available for history length H and horizon T: max(0, L-H-T+1).
  std::size_t num_windows(int H, int T) const {
    const auto need = static_cast<std::size_t>(H + T);
    return frames.size() < need ? 0 : frames.size() - need + 1;
  }

  Trajectory agent_trajectory(std::size_t agent, std::size_t from,
                              std::size_t count, double dt) const {
    Trajectory traj;
    traj.dt = dt;
    traj.states.reserve(count);
    for (std::size_t t = from; t < from + count; ++t)
      traj.states.push_back(frames[t][agent]);
    return traj;
  }
};

/// Context window extracted from an episode: the training tuple (phi, xi_R, xi_H).
struct ContextWindow {
  SceneContext context;
  Trajectory robot_future;
  std::vector<Trajectory> human_futures;  // non-ego agents, in agent order
  std::vector<int> human_agent_indices;   // their indices within the record
};

struct Dataset {
  std::vector<EpisodeRecord> records;
  std::string split_tag = "train";  // "train" | "test"
  int horizon = 8;   // T, steps
  int history = 8;   // H, steps
  double dt = 0.0;   // s
  std::string provenance;  // opaque JSON blob carried through round trips

  std::size_t num_contexts() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.num_windows(history, horizon);
    return n;
  }
};

/// Default adjacency rule: agents within `radius` meters of each other at the
/// end of the history are neighbors.
inline std::vector<std::uint8_t> adjacency_within(
    const std::vector<std::vector<AgentState>>& histories, double radius) {
  const std::size_t n = histories.size();
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d =
          distance(histories[i].back().position, histories[j].back().position);
      adj[i * n + j] = adj[j * n + i] = (d <= radius) ? 1 : 0;
    }
  return adj;
}

inline constexpr double kDefaultAdjacencyRadius = 5.0;  // m

/// Builds the scene context at step index t of an episode: histories are
/// steps [t-H+1, t], futures (extracted separately) are steps [t+1, t+T].
inline SceneContext make_context(const EpisodeRecord& ep, int t, int H, int T,
                                 double dt,
                                 double adjacency_radius = kDefaultAdjacencyRadius) {
  if (t < H - 1 || static_cast<std::size_t>(t + T) >= ep.frames.size())
    throw std::out_of_range("make_context: step index " + std::to_string(t) +
                            " out of range for H=" + std::to_string(H) +
                            " T=" + std::to_string(T) + " frames=" +
                            std::to_string(ep.frames.size()));
  SceneContext ctx;
  ctx.dt = dt;
  ctx.robot_index = ep.robot_index;
  const std::size_t n = ep.num_agents();
  ctx.histories.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    ctx.histories[a].reserve(static_cast<std::size_t>(H));
    for (int s = t - H + 1; s <= t; ++s)
      ctx.histories[a].push_back(ep.frames[static_cast<std::size_t>(s)][a]);
  }
  ctx.goals.resize(n);
  ctx.goal_visible.assign(n, false);
  for (std::size_t a = 0; a < n; ++a) ctx.goals[a] = ep.agents[a].goal;
  ctx.goal_visible[static_cast<std::size_t>(ep.robot_index)] = true;
  ctx.adjacency = adjacency_within(ctx.histories, adjacency_radius);
  return ctx;
}

/// Full training tuple at step index t.
inline ContextWindow make_window(const EpisodeRecord& ep, int t, int H, int T,
                                 double dt,
                                 double adjacency_radius = kDefaultAdjacencyRadius) {
  ContextWindow w;
  w.context = make_context(ep, t, H, T, dt, adjacency_radius);
  const auto from = static_cast<std::size_t>(t + 1);
  w.robot_future = ep.agent_trajectory(static_cast<std::size_t>(ep.robot_index),
                                       from, static_cast<std::size_t>(T), dt);
  for (std::size_t a = 0; a < ep.num_agents(); ++a) {
    if (static_cast<int>(a) == ep.robot_index) continue;
    w.human_futures.push_back(
        ep.agent_trajectory(a, from, static_cast<std::size_t>(T), dt));
    w.human_agent_indices.push_back(static_cast<int>(a));
  }
  return w;
}

/// Flat index over every (record, step) window in a dataset.
struct ContextRef {
  std::size_t record = 0;
  int t = 0;
};

inline std::vector<ContextRef> enumerate_contexts(const Dataset& d) {
  std::vector<ContextRef> refs;
  for (std::size_t r = 0; r < d.records.size(); ++r) {
    const std::size_t count = d.records[r].num_windows(d.history, d.horizon);
    for (std::size_t k = 0; k < count; ++k)
      refs.push_back({r, d.history - 1 + static_cast<int>(k)});
  }
  return refs;
}

inline ContextWindow window_at(const Dataset& d, const ContextRef& ref,
                               double adjacency_radius = kDefaultAdjacencyRadius) {
  return make_window(d.records[ref.record], ref.t, d.history, d.horizon, d.dt,
                     adjacency_radius);
}

}  // namespace advnav
