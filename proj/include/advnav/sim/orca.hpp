#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "advnav/core/types.hpp"

namespace advnav {

/// Linear velocity constraint: feasible velocities v satisfy
/// (v - point) . normal <= 0.
struct HalfPlane {
  Vec2 point;
  Vec2 normal;  // outward (unit) normal of the infeasible side

  double violation(const Vec2& v) const { return (v - point).dot(normal); }
  bool satisfied(const Vec2& v, double tol = 0.0) const {
    return violation(v) <= tol;
  }
  /// Direction along the boundary with the feasible side on the left.
  Vec2 direction() const { return normal.perp(); }
};

/// Unit vector toward the goal scaled by min(v_max, distance/dt); exactly
/// zero at the goal. The distance/dt cap stops agents from overshooting.
inline Vec2 preferred_velocity(const AgentState& state, const Vec2& goal,
                               double v_max, double dt) {
  const Vec2 to_goal = goal - state.position;
  const double dist = to_goal.norm();
  if (dist <= 0.0) return {0.0, 0.0};
  return to_goal * (std::min(v_max, dist / dt) / dist);
}

/// One ORCA half-plane per neighbor: the truncated velocity-obstacle
/// construction with reciprocity factor 1/2. Overlapping pairs switch to the
/// dt-horizon escape variant so the constraint pushes the agents apart within
/// one step.
inline std::vector<HalfPlane> orca_halfplanes(const AgentState& ego,
                                              const std::vector<AgentState>& neighbors,
                                              double tau, double dt) {
  std::vector<HalfPlane> planes;
  planes.reserve(neighbors.size());
  const double inv_tau = 1.0 / tau;

  for (const auto& other : neighbors) {
    const Vec2 rel_pos = other.position - ego.position;
    const Vec2 rel_vel = ego.velocity - other.velocity;
    const double dist_sq = rel_pos.squared_norm();
    const double combined_r = ego.radius + other.radius;
    const double combined_r_sq = combined_r * combined_r;

    Vec2 dir;  // boundary direction, feasible side on the left
    Vec2 u;    // smallest change to rel_vel that leaves the velocity obstacle

    if (dist_sq > combined_r_sq) {
      const Vec2 w = rel_vel - inv_tau * rel_pos;
      const double w_len_sq = w.squared_norm();
      const double dot = w.dot(rel_pos);

      if (dot < 0.0 && dot * dot > combined_r_sq * w_len_sq) {
        // Project on the cut-off circle.
        const double w_len = std::sqrt(w_len_sq);
        const Vec2 unit_w = w / w_len;
        dir = {unit_w.y, -unit_w.x};
        u = (combined_r * inv_tau - w_len) * unit_w;
      } else {
        // Project on the nearer leg of the cone.
        const double leg = std::sqrt(dist_sq - combined_r_sq);
        if (rel_pos.det(w) > 0.0) {
          dir = Vec2{rel_pos.x * leg - rel_pos.y * combined_r,
                     rel_pos.x * combined_r + rel_pos.y * leg} /
                dist_sq;
        } else {
          dir = Vec2{rel_pos.x * leg + rel_pos.y * combined_r,
                     -rel_pos.x * combined_r + rel_pos.y * leg} /
                -dist_sq;
        }
        u = rel_vel.dot(dir) * dir - rel_vel;
      }
    } else {
      // Already overlapping: escape within one timestep.
      const double inv_dt = 1.0 / dt;
      const Vec2 w = rel_vel - inv_dt * rel_pos;
      const double w_len = w.norm();
      const Vec2 unit_w = w_len > 0.0 ? w / w_len : Vec2{1.0, 0.0};
      dir = {unit_w.y, -unit_w.x};
      u = (combined_r * inv_dt - w_len) * unit_w;
    }

    HalfPlane plane;
    plane.point = ego.velocity + 0.5 * u;  // each agent takes half the effort
    plane.normal = {dir.y, -dir.x};
    planes.push_back(plane);
  }
  return planes;
}

namespace detail {

inline constexpr double kLpEpsilon = 1e-12;

// One-dimensional LP on the boundary line of constraint `index`, restricted
// to the |v| <= radius disk and the half-planes before it. Follows the
// classic randomized-LP-without-randomization layout used by RVO2.
inline bool lp_boundary(const std::vector<HalfPlane>& planes, std::size_t index,
                        double radius, const Vec2& opt, bool direction_opt,
                        Vec2& result) {
  const Vec2 line_dir = planes[index].direction();
  const Vec2 line_pt = planes[index].point;
  const double dot = line_pt.dot(line_dir);
  const double discriminant = dot * dot + radius * radius - line_pt.squared_norm();
  if (discriminant < 0.0) return false;  // disk misses the boundary line

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot - sqrt_disc;
  double t_right = -dot + sqrt_disc;

  for (std::size_t i = 0; i < index; ++i) {
    const Vec2 other_dir = planes[i].direction();
    const double denom = line_dir.det(other_dir);
    const double numer = other_dir.det(line_pt - planes[i].point);
    if (std::abs(denom) <= kLpEpsilon) {
      if (numer < 0.0) return false;  // parallel and fully excluded
      continue;
    }
    const double t = numer / denom;
    if (denom >= 0.0)
      t_right = std::min(t_right, t);
    else
      t_left = std::max(t_left, t);
    if (t_left > t_right) return false;
  }

  double t;
  if (direction_opt) {
    t = opt.dot(line_dir) > 0.0 ? t_right : t_left;
  } else {
    t = line_dir.dot(opt - line_pt);
    t = std::min(std::max(t, t_left), t_right);
  }
  result = line_pt + t * line_dir;
  return true;
}

// 2D LP over the disk; returns planes.size() on success, otherwise the index
// of the first unsatisfiable constraint (result then holds the best point for
// the constraints before it).
inline std::size_t lp_disk(const std::vector<HalfPlane>& planes, double radius,
                           const Vec2& opt, bool direction_opt, Vec2& result) {
  if (direction_opt) {
    result = opt * radius;  // opt is a unit direction here
  } else if (opt.squared_norm() > radius * radius) {
    result = opt.normalized() * radius;
  } else {
    result = opt;
  }

  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (planes[i].violation(result) > 0.0) {
      const Vec2 saved = result;
      if (!lp_boundary(planes, i, radius, opt, direction_opt, result)) {
        result = saved;
        return i;
      }
    }
  }
  return planes.size();
}

// Infeasible fallback: minimize the maximum violation by sweeping the failed
// constraints and re-solving on progressively shifted boundaries.
inline void lp_minimize_violation(const std::vector<HalfPlane>& planes,
                                  std::size_t begin, double radius, Vec2& result) {
  double distance = 0.0;
  for (std::size_t i = begin; i < planes.size(); ++i) {
    if (planes[i].violation(result) <= distance) continue;
    const Vec2 dir_i = planes[i].direction();

    std::vector<HalfPlane> projected;
    projected.reserve(i);
    for (std::size_t j = 0; j < i; ++j) {
      const Vec2 dir_j = planes[j].direction();
      const double determinant = dir_i.det(dir_j);
      HalfPlane plane;
      if (std::abs(determinant) <= kLpEpsilon) {
        if (dir_i.dot(dir_j) > 0.0) continue;  // same direction: redundant
        plane.point = 0.5 * (planes[i].point + planes[j].point);
      } else {
        plane.point = planes[i].point +
                      (dir_j.det(planes[i].point - planes[j].point) / determinant) * dir_i;
      }
      const Vec2 d = (dir_j - dir_i).normalized();
      plane.normal = {d.y, -d.x};
      projected.push_back(plane);
    }

    const Vec2 saved = result;
    if (lp_disk(projected, radius, Vec2{-dir_i.y, dir_i.x}, true, result) <
        projected.size()) {
      // Only reachable through floating-point noise; keep the feasible iterate.
      result = saved;
    }
    distance = planes[i].violation(result);
  }
}

}  // namespace detail

/// Velocity closest to v_pref satisfying every half-plane and |v| <= v_max.
/// When the constraints are mutually infeasible, returns the velocity that
/// minimizes the maximum violation instead. Deterministic.
inline Vec2 solve_velocity(const std::vector<HalfPlane>& planes,
                           const Vec2& v_pref, double v_max) {
  Vec2 result;
  const std::size_t fail = detail::lp_disk(planes, v_max, v_pref, false, result);
  if (fail < planes.size())
    detail::lp_minimize_violation(planes, fail, v_max, result);
  return result;
}

}  // namespace advnav
