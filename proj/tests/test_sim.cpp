#include <gtest/gtest.h>

#include <cmath>

#include "advnav/core/dataset_io.hpp"
#include "advnav/sim/simulator.hpp"

using namespace advnav;

namespace {

double min_human_pair_distance(const std::vector<AgentState>& humans) {
  double best = 1e18;
  for (std::size_t i = 0; i < humans.size(); ++i)
    for (std::size_t j = i + 1; j < humans.size(); ++j)
      best = std::min(best, distance(humans[i].position, humans[j].position));
  return best;
}

}  // namespace

// ---- sample_scenario ---------------------------------------------------------

TEST(Scenario, DeterministicUnderSeed) {
  SimConfig cfg;
  const ScenarioSpec a = sample_scenario(cfg, 12);
  const ScenarioSpec b = sample_scenario(cfg, 12);
  ASSERT_EQ(a.human_starts.size(), b.human_starts.size());
  for (std::size_t i = 0; i < a.human_starts.size(); ++i) {
    EXPECT_EQ(a.human_starts[i], b.human_starts[i]);
    EXPECT_EQ(a.human_goals[i], b.human_goals[i]);
  }
}

TEST(Scenario, SingleHumanApproximatelyAntipodal) {
  SimConfig cfg;
  cfg.n_humans = 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ScenarioSpec s = sample_scenario(cfg, seed);
    // Goal jitter is 0.1 rad, so |start + goal| <= R * 0.1 plus slack.
    const Vec2 sum = s.human_starts[0] + s.human_goals[0];
    EXPECT_LE(sum.norm(), cfg.arena_radius * 0.1 + 1e-9);
  }
}

TEST(Scenario, StartsRespectSeparation) {
  SimConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ScenarioSpec s = sample_scenario(cfg, seed);
    std::vector<Vec2> starts = s.human_starts;
    starts.push_back(s.robot_start);
    for (std::size_t i = 0; i < starts.size(); ++i)
      for (std::size_t j = i + 1; j < starts.size(); ++j)
        EXPECT_GE(distance(starts[i], starts[j]),
                  2 * cfg.agent_radius + cfg.placement_margin - 1e-12);
  }
}

TEST(Scenario, TooSmallArenaFailsPlacement) {
  SimConfig cfg;
  cfg.n_humans = 5;
  cfg.agent_radius = 1.0;
  cfg.arena_radius = 1.5;  // circumference cannot hold six 1 m bodies
  EXPECT_THROW(sample_scenario(cfg, 0), std::runtime_error);
}

// ---- demonstrate ----------------------------------------------------------------

TEST(Demonstrate, EmptySceneHeadsToGoal) {
  SimConfig cfg;
  const AgentState robot{{0, -4}, {0, 0}, cfg.agent_radius};
  // Goal along a grid heading (straight up = 90 degrees with 16 headings).
  const Vec2 action = demonstrate(robot, {0, 4}, {}, cfg);
  EXPECT_NEAR(action.x, 0.0, 1e-9);
  EXPECT_NEAR(action.y, cfg.v_max, 1e-9);
}

TEST(Demonstrate, KeepsMarginWheneverSomeCandidateCan) {
  // A human crossing the robot's straight path: exhaustively verify that the
  // chosen action keeps margin clearance when any feasible candidate exists.
  SimConfig cfg;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(mix_seed(seed, 77));
    const AgentState robot{{0, -2}, {0, rng.uniform(0, 1)}, cfg.agent_radius};
    const Vec2 goal{0, 4};

    std::vector<AgentState> humans{
        {{rng.uniform(-2.0, 2.0), rng.uniform(-1.5, 0.5)},
         {rng.uniform(-1, 1), rng.uniform(-1, 1)},
         cfg.agent_radius}};
    const std::vector<Vec2> human_goals{{rng.uniform(-3, 3), rng.uniform(-3, 3)}};
    const auto future = rollout_humans(humans, human_goals, cfg, cfg.demo_rollout);

    const Vec2 chosen = demonstrate(robot, goal, future, cfg);

    const auto min_clearance = [&](const Vec2& action) {
      double worst = 1e18;
      for (int s = 1; s <= cfg.demo_rollout; ++s) {
        const Vec2 p = robot.position + action * (cfg.dt * s);
        for (const auto& h : future)
          worst = std::min(worst, distance(p, h[s - 1].position) -
                                      robot.radius - h[s - 1].radius);
      }
      return worst;
    };

    // Enumerate the full grid: does any candidate keep >= margin clearance?
    bool any_feasible = min_clearance({0, 0}) >= cfg.demo_margin;
    for (int si = 1; si <= cfg.demo_speeds && !any_feasible; ++si)
      for (int hi = 0; hi < cfg.demo_headings && !any_feasible; ++hi) {
        const double speed = cfg.v_max * si / cfg.demo_speeds;
        const double heading = 2.0 * M_PI * hi / cfg.demo_headings;
        if (min_clearance({speed * std::cos(heading),
                           speed * std::sin(heading)}) >= cfg.demo_margin)
          any_feasible = true;
      }

    if (any_feasible)
      EXPECT_GE(min_clearance(chosen), cfg.demo_margin - 1e-12)
          << "seed " << seed;
  }
}

TEST(Demonstrate, DeterministicAcrossRuns) {
  SimConfig cfg;
  const EpisodeRecord a = run_episode(cfg, 3);
  const EpisodeRecord b = run_episode(cfg, 3);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t t = 0; t < a.frames.size(); ++t)
    for (std::size_t i = 0; i < a.frames[t].size(); ++i) {
      EXPECT_EQ(a.frames[t][i].position, b.frames[t][i].position);
      EXPECT_EQ(a.frames[t][i].velocity, b.frames[t][i].velocity);
    }
}

// ---- run_episode ------------------------------------------------------------------

TEST(RunEpisode, RecordsSatisfyIntegrationInvariant) {
  SimConfig cfg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const EpisodeRecord ep = run_episode(cfg, seed);
    ASSERT_GE(ep.num_frames(), 2u);
    for (std::size_t a = 0; a < ep.num_agents(); ++a) {
      const Trajectory t = ep.agent_trajectory(a, 0, ep.num_frames(), cfg.dt);
      EXPECT_TRUE(t.integration_consistent(1e-6)) << "agent " << a;
    }
  }
}

TEST(RunEpisode, RobotMakesProgressTowardGoal) {
  SimConfig cfg;
  int reached = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EpisodeRecord ep = run_episode(cfg, seed);
    const Vec2 goal = ep.agents[0].goal;
    const Vec2 last = ep.frames.back()[0].position;
    if (distance(last, goal) < cfg.goal_tolerance + 1e-9) ++reached;
  }
  EXPECT_GE(reached, 8) << "expert should reach the goal almost always";
}

TEST(RunEpisode, HumanMotionInvariantToRobot) {
  // Re-simulating the humans alone reproduces the recorded human frames
  // bit-identically: the robot never perturbs them.
  SimConfig cfg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const EpisodeRecord ep = run_episode(cfg, seed);
    const ScenarioSpec spec = sample_scenario(cfg, seed);

    std::vector<AgentState> humans;
    for (int i = 0; i < cfg.n_humans; ++i)
      humans.push_back({spec.human_starts[i], {0, 0}, cfg.agent_radius});

    for (std::size_t t = 0; t + 1 < ep.num_frames(); ++t) {
      const auto next = step_humans(humans, spec.human_goals, cfg);
      for (int i = 0; i < cfg.n_humans; ++i) {
        // Frame t stores position at t with the action taken at t.
        EXPECT_EQ(ep.frames[t][i + 1].position, humans[i].position);
        EXPECT_EQ(ep.frames[t][i + 1].velocity, next[i].velocity);
      }
      humans = next;
    }
  }
}

TEST(RunEpisode, FiveHumanCrossingHasNoHumanHumanCollisions) {
  // Subset here; the acceptance suite sweeps 100 seeds.
  SimConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ScenarioSpec spec = sample_scenario(cfg, seed);
    std::vector<AgentState> humans;
    for (int i = 0; i < cfg.n_humans; ++i)
      humans.push_back({spec.human_starts[i], {0, 0}, cfg.agent_radius});
    for (int t = 0; t < cfg.episode_max_steps; ++t) {
      humans = step_humans(humans, spec.human_goals, cfg);
      EXPECT_GT(min_human_pair_distance(humans), 2 * cfg.agent_radius)
          << "seed " << seed << " step " << t;
    }
  }
}

TEST(RunEpisode, ExpertCollisionSmoke) {
  SimConfig cfg;
  int collisions = 0;
  for (std::uint64_t seed = 100; seed < 130; ++seed)
    if (episode_has_collision(run_episode(cfg, seed))) ++collisions;
  EXPECT_LE(collisions, 1) << "expert collided in " << collisions << "/30 episodes";
}

TEST(RunEpisode, WindowsAreWellFormed) {
  SimConfig cfg;
  const EpisodeRecord ep = run_episode(cfg, 9);
  const std::size_t windows = ep.num_windows(cfg.history, cfg.horizon);
  ASSERT_GT(windows, 0u);
  const ContextWindow w =
      make_window(ep, cfg.history - 1, cfg.history, cfg.horizon, cfg.dt);
  w.context.check();
  EXPECT_EQ(w.human_futures.size(), static_cast<std::size_t>(cfg.n_humans));
  EXPECT_EQ(w.robot_future.size(), static_cast<std::size_t>(cfg.horizon));
}
