#include <gtest/gtest.h>

#include <cmath>

#include "advnav/cost/chomp.hpp"
#include "advnav/rng.hpp"
#include "test_util.hpp"

using namespace advnav;
using testutil::traj_through;

namespace {

constexpr double kEps = 0.2;

// Two agents whose signed clearance is exactly d.
std::pair<AgentState, AgentState> pair_at_clearance(double d, double rR = 0.3,
                                                    double rH = 0.25,
                                                    const Vec2& dir = {1, 0}) {
  AgentState robot{{0, 0}, {}, rR};
  AgentState human{dir * (d + rR + rH), {}, rH};
  return {robot, human};
}

CostParams params(double eps = kEps) {
  CostParams p;
  p.epsilon = eps;
  return p;
}

double value_at(double d) {
  const auto [r, h] = pair_at_clearance(d);
  return col_cost(r, h, params()).value;
}

}  // namespace

// ---- col_cost examples (all pinned to 1e-12) ---------------------------------

TEST(ColCost, ZeroAtEpsilonBoundary) {
  EXPECT_NEAR(value_at(kEps), 0.0, 1e-12);
}

TEST(ColCost, HalfEpsilonAtContactFromBothBranches) {
  EXPECT_NEAR(value_at(0.0), kEps / 2.0, 1e-12);
  // Both adjacent branches agree at the seam.
  EXPECT_NEAR(value_at(1e-13), kEps / 2.0, 1e-9);
  EXPECT_NEAR(value_at(-1e-13), kEps / 2.0, 1e-9);
}

TEST(ColCost, QuadraticBranchValue) {
  // (0.1 - 0.2)^2 / (2 * 0.2) = 0.025
  EXPECT_NEAR(value_at(0.1), 0.025, 1e-12);
}

TEST(ColCost, PenetrationBranchValue) {
  // -(-0.1) + 0.2/2 = 0.2
  EXPECT_NEAR(value_at(-0.1), 0.2, 1e-12);
}

TEST(ColCost, CoincidentCentersDefined) {
  AgentState r{{1, 1}, {}, 0.3};
  AgentState h{{1, 1}, {}, 0.25};
  const ColCost c = col_cost(r, h, params());
  EXPECT_NEAR(c.value, 0.55 + kEps / 2.0, 1e-12);  // d = -(rR + rH)
  EXPECT_EQ(c.grad_robot.x, 0.0);
  EXPECT_EQ(c.grad_robot.y, 0.0);
}

// ---- seam smoothness -----------------------------------------------------------

TEST(ColCost, ContinuousAndC1AtSeams) {
  const double h = 1e-7;
  for (const double seam : {0.0, kEps}) {
    const double left = (value_at(seam) - value_at(seam - h)) / h;
    const double right = (value_at(seam + h) - value_at(seam)) / h;
    EXPECT_NEAR(left, right, 1e-5);
    EXPECT_NEAR(value_at(seam - h), value_at(seam + h), 1e-6);
  }
  // One-sided derivatives are -1 at d = 0 and 0 at d = eps.
  EXPECT_NEAR((value_at(h) - value_at(-h)) / (2 * h), -1.0, 1e-5);
  EXPECT_NEAR((value_at(kEps + h) - value_at(kEps - h)) / (2 * h), 0.0, 1e-5);
}

TEST(ColCost, NonNegativeZeroIffClear) {
  for (double d = -0.5; d <= 0.6; d += 0.01) {
    const double v = value_at(d);
    EXPECT_GE(v, 0.0);
    if (d >= kEps)
      EXPECT_EQ(v, 0.0);
    else
      EXPECT_GT(v, 0.0);
  }
}

TEST(ColCost, StrictlyDecreasingBelowEpsilon) {
  double prev = value_at(-0.5);
  for (double d = -0.49; d < kEps; d += 0.01) {
    const double v = value_at(d);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

// ---- analytic vs finite-difference gradients -------------------------------------

TEST(ColCost, GradientMatchesFiniteDifferences) {
  Rng rng(2024);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 100) {
    AgentState r{{rng.uniform(-2, 2), rng.uniform(-2, 2)}, {}, rng.uniform(0.1, 0.5)};
    AgentState hum{{rng.uniform(-2, 2), rng.uniform(-2, 2)}, {}, rng.uniform(0.1, 0.5)};
    const double d =
        distance(r.position, hum.position) - r.radius - hum.radius;
    // Stay away from the seams so the finite difference is meaningful.
    if (std::abs(d) < 5 * h || std::abs(d - kEps) < 5 * h) continue;

    const ColCost c = col_cost(r, hum, params());
    for (int coord = 0; coord < 4; ++coord) {
      const auto eval = [&](double delta) {
        AgentState r2 = r, h2 = hum;
        if (coord == 0) r2.position.x += delta;
        if (coord == 1) r2.position.y += delta;
        if (coord == 2) h2.position.x += delta;
        if (coord == 3) h2.position.y += delta;
        return col_cost(r2, h2, params()).value;
      };
      const double numeric = (eval(h) - eval(-h)) / (2 * h);
      const double analytic = coord == 0   ? c.grad_robot.x
                              : coord == 1 ? c.grad_robot.y
                              : coord == 2 ? c.grad_human.x
                                           : c.grad_human.y;
      const double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      EXPECT_LT(rel, 1e-5) << "coord " << coord << " d=" << d;
    }
    ++checked;
  }
}

// ---- pair_cost -----------------------------------------------------------------

TEST(PairCost, ZeroWhenAlwaysClear) {
  const Trajectory r = traj_through({{0, 0}, {1, 0}, {2, 0}});
  const Trajectory h = traj_through({{0, 5}, {1, 5}, {2, 5}});
  EXPECT_EQ(pair_cost(r, h, params()), 0.0);
}

TEST(PairCost, ConstantContactOverEightSteps) {
  // d = 0 at every one of T=8 steps: 8 * eps/2 = 0.8.
  std::vector<Vec2> rp(8), hp(8);
  for (int t = 0; t < 8; ++t) {
    rp[t] = {double(t), 0.0};
    hp[t] = {double(t), 0.3 + 0.25};
  }
  const double c = pair_cost(traj_through(rp, 0.25, 0.3),
                             traj_through(hp, 0.25, 0.25), params());
  EXPECT_NEAR(c, 8 * kEps / 2.0, 1e-12);
}

TEST(PairCost, SingleOverlappingStepDominatesSum) {
  std::vector<Vec2> rp = {{0, 0}, {1, 0}, {2, 0}};
  std::vector<Vec2> hp = {{0, 9}, {1, 0.1}, {2, 9}};  // close only at t=1
  const Trajectory r = traj_through(rp, 0.25, 0.3);
  const Trajectory h = traj_through(hp, 0.25, 0.25);
  const double whole = pair_cost(r, h, params());
  const double step = col_cost(r[1], h[1], params()).value;
  EXPECT_NEAR(whole, step, 1e-12);
  EXPECT_GT(step, 0.0);
}

TEST(PairCost, LengthMismatchThrows) {
  const Trajectory r = traj_through({{0, 0}, {1, 0}});
  const Trajectory h = traj_through({{0, 0}});
  EXPECT_THROW(pair_cost(r, h, params()), std::invalid_argument);
}

// ---- scene_cost -----------------------------------------------------------------

namespace {

std::vector<Trajectory> humans_at_clearances(const Trajectory& robot,
                                             const std::vector<double>& ds) {
  std::vector<Trajectory> out;
  for (const double d : ds) {
    std::vector<Vec2> hp;
    for (std::size_t t = 0; t < robot.size(); ++t)
      hp.push_back(robot[t].position + Vec2{0.0, d + 0.3 + 0.25});
    out.push_back(traj_through(hp, robot.dt, 0.25));
  }
  return out;
}

}  // namespace

TEST(SceneCost, SingleHumanEqualsPairCost) {
  const Trajectory r = traj_through({{0, 0}, {1, 0}}, 0.25, 0.3);
  const auto humans = humans_at_clearances(r, {0.05});
  const SceneCost sc = scene_cost(r, humans, params());
  EXPECT_EQ(sc.value, pair_cost(r, humans[0], params()));
  EXPECT_EQ(sc.argmax_human, 0);
}

TEST(SceneCost, MaxOverHumansWithIndex) {
  const Trajectory r = traj_through({{0, 0}, {1, 0}}, 0.25, 0.3);
  // Clearances eps (cost 0), 0 (highest), 0.1 (middle).
  const auto humans = humans_at_clearances(r, {kEps, 0.0, 0.1});
  const SceneCost sc = scene_cost(r, humans, params());
  EXPECT_NEAR(sc.value, 2 * kEps / 2.0, 1e-12);
  EXPECT_EQ(sc.argmax_human, 1);
}

TEST(SceneCost, AllZeroTiesToLowestIndex) {
  const Trajectory r = traj_through({{0, 0}, {1, 0}}, 0.25, 0.3);
  const auto humans = humans_at_clearances(r, {kEps, kEps + 1, kEps + 2});
  const SceneCost sc = scene_cost(r, humans, params());
  EXPECT_EQ(sc.value, 0.0);
  EXPECT_EQ(sc.argmax_human, 0);
}

TEST(SceneCost, DominatesEveryPairCost) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Trajectory r = testutil::random_traj(rng, 8);
    std::vector<Trajectory> humans;
    for (int i = 0; i < 4; ++i) humans.push_back(testutil::random_traj(rng, 8));
    const SceneCost sc = scene_cost(r, humans, params());
    for (const auto& h : humans)
      EXPECT_GE(sc.value, pair_cost(r, h, params()) - 1e-15);
  }
}

TEST(SceneCost, SumAggregateOption) {
  const Trajectory r = traj_through({{0, 0}, {1, 0}}, 0.25, 0.3);
  const auto humans = humans_at_clearances(r, {0.0, 0.1});
  CostParams p = params();
  p.aggregate = CostParams::Aggregate::kSum;
  EXPECT_NEAR(scene_cost(r, humans, p).value,
              pair_cost(r, humans[0], p) + pair_cost(r, humans[1], p), 1e-12);
}

TEST(SceneCost, RigidTransformInvariance) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Trajectory r = testutil::random_traj(rng, 6);
    std::vector<Trajectory> humans{testutil::random_traj(rng, 6),
                                   testutil::random_traj(rng, 6)};
    const double base = scene_cost(r, humans, params()).value;

    const double theta = rng.uniform(0, 2 * M_PI);
    const Vec2 shift{rng.uniform(-4, 4), rng.uniform(-4, 4)};
    const auto rigid = [&](const Trajectory& t) {
      Trajectory out = t;
      for (auto& s : out.states) {
        const Vec2 p = s.position;
        s.position = {p.x * std::cos(theta) - p.y * std::sin(theta) + shift.x,
                      p.x * std::sin(theta) + p.y * std::cos(theta) + shift.y};
      }
      return out;
    };
    std::vector<Trajectory> moved;
    for (const auto& h : humans) moved.push_back(rigid(h));
    EXPECT_NEAR(scene_cost(rigid(r), moved, params()).value, base, 1e-9);
  }
}

// ---- collision_rate ---------------------------------------------------------------

TEST(CollisionRate, AllClearIsZero) {
  const Trajectory r = traj_through({{0, 0}, {1, 0}});
  const auto humans = humans_at_clearances(r, {1.0});
  EXPECT_EQ(collision_rate({r, r}, {humans, humans}), 0.0);
}

TEST(CollisionRate, AllOverlappingIsOne) {
  const Trajectory r = traj_through({{0, 0}, {1, 0}});
  const auto humans = humans_at_clearances(r, {-0.01});
  EXPECT_EQ(collision_rate({r, r}, {humans, humans}), 1.0);
}

TEST(CollisionRate, OneOfFourIsAQuarter) {
  const Trajectory r = traj_through({{0, 0}, {1, 0}});
  const auto clear = humans_at_clearances(r, {1.0});
  const auto hit = humans_at_clearances(r, {-0.05});
  EXPECT_EQ(collision_rate({r, r, r, r}, {clear, hit, clear, clear}), 0.25);
}

TEST(CollisionRate, BoundaryIsNotACollision) {
  // Exactly at contact distance: center distance == r1 + r2 is not "within".
  const Trajectory r = traj_through({{0, 0}}, 0.25, 0.3);
  const auto humans = humans_at_clearances(r, {0.0});
  EXPECT_EQ(collision_rate({r}, {humans}), 0.0);
}
