// Runs one circle-crossing episode with the privileged expert and prints a
// coarse top-down trace plus summary numbers.

#include <cstdio>

#include "advnav/sim/simulator.hpp"

using namespace advnav;

int main(int argc, char** argv) {
  SimConfig cfg;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
  const EpisodeRecord ep = run_episode(cfg, seed);

  std::printf("seed=%llu frames=%zu agents=%zu\n",
              static_cast<unsigned long long>(seed), ep.num_frames(),
              ep.num_agents());

  double min_clearance = 1e9;
  for (const auto& frame : ep.frames) {
    const auto& robot = frame[0];
    for (std::size_t a = 1; a < frame.size(); ++a) {
      const double c = distance(robot.position, frame[a].position) -
                       robot.radius - frame[a].radius;
      min_clearance = std::min(min_clearance, c);
    }
  }
  std::printf("robot min clearance to any human: %.3f m\n", min_clearance);

  // Sparse trace: robot position every 4 frames.
  for (std::size_t t = 0; t < ep.frames.size(); t += 4) {
    const auto& r = ep.frames[t][0];
    std::printf("t=%5.2fs robot=(%6.2f, %6.2f) |v|=%.2f\n",
                static_cast<double>(t) * cfg.dt, r.position.x, r.position.y,
                r.velocity.norm());
  }
  return 0;
}
