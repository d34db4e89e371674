#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "advnav/core/types.hpp"
#include "advnav/util.hpp"

namespace advnav {

inline constexpr int kEthUcyHistory = 8;        // 3.2 s at 2.5 Hz
inline constexpr int kEthUcyHorizon = 12;       // 4.8 s
inline constexpr double kEthUcyDt = 0.4;        // s
inline constexpr double kPedestrianRadius = 0.2;  // m, config knob

namespace detail {

inline long parse_integral_token(const std::string& tok, std::size_t line_no,
                                 const char* what) {
  double v;
  try {
    v = parse_double(tok);
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) +
                             ": malformed " + what + " '" + tok + "'");
  }
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-6)
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + what +
                             " must be integral, got '" + tok + "'");
  return static_cast<long>(r);
}

// One gap-free run of an agent's samples on the uniform time grid.
struct Track {
  int agent_id = 0;
  long start = 0;  // index on the global grid
  std::vector<Vec2> pos;

  long end() const { return start + static_cast<long>(pos.size()); }  // exclusive
  bool covers(long w, long len) const { return start <= w && w + len <= end(); }
};

}  // namespace detail

/// Parses whitespace-separated `frame_id agent_id x y` text (2.5 Hz pedestrian
/// data convention) into windowed episode records. Each record is one
/// (window, ego) pair: H+T frames of every agent fully present in the window,
/// with each covered agent taking the ego role in turn. Goals are the proxy
/// "information private to an agent": its position at the end of the window.
/// Tracks are resampled to a uniform grid; single missing samples are linearly
/// interpolated, gaps of more than two grid steps split the track.
inline std::vector<EpisodeRecord> parse_trajectory_text(
    const std::string& text, int H = kEthUcyHistory, int T = kEthUcyHorizon,
    double pedestrian_radius = kPedestrianRadius) {
  using detail::Track;

  std::map<int, std::vector<std::pair<long, Vec2>>> by_agent;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 4)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected 'frame_id agent_id x y', got " +
                               std::to_string(toks.size()) + " fields");
    const long frame = detail::parse_integral_token(toks[0], line_no, "frame_id");
    const long agent = detail::parse_integral_token(toks[1], line_no, "agent_id");
    double x, y;
    try {
      x = parse_double(toks[2]);
      y = parse_double(toks[3]);
    } catch (const std::exception&) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": malformed coordinate");
    }
    auto& samples = by_agent[static_cast<int>(agent)];
    if (!samples.empty() && frame <= samples.back().first)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": non-monotone frame for agent " +
                               std::to_string(agent));
    samples.push_back({frame, {x, y}});
  }
  if (by_agent.empty()) return {};

  // The grid step is the gcd of all frame deltas and offsets, so files
  // annotated every k raw frames land on consecutive indices.
  long min_frame = by_agent.begin()->second.front().first;
  for (const auto& [id, samples] : by_agent)
    min_frame = std::min(min_frame, samples.front().first);
  long step = 0;
  for (const auto& [id, samples] : by_agent) {
    for (std::size_t k = 0; k + 1 < samples.size(); ++k)
      step = std::gcd(step, samples[k + 1].first - samples[k].first);
    step = std::gcd(step, samples.front().first - min_frame);
  }
  if (step == 0) step = 1;

  std::vector<Track> tracks;
  for (const auto& [id, samples] : by_agent) {
    Track cur;
    cur.agent_id = id;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const long idx = (samples[k].first - min_frame) / step;
      if (cur.pos.empty()) {
        cur.start = idx;
        cur.pos.push_back(samples[k].second);
        continue;
      }
      const long gap = idx - (cur.end() - 1);
      if (gap <= 2) {
        const Vec2 prev = cur.pos.back();
        for (long g = 1; g < gap; ++g) {
          const double a = static_cast<double>(g) / static_cast<double>(gap);
          cur.pos.push_back(prev + (samples[k].second - prev) * a);
        }
        cur.pos.push_back(samples[k].second);
      } else {
        tracks.push_back(std::move(cur));
        cur = Track{};
        cur.agent_id = id;
        cur.start = idx;
        cur.pos.push_back(samples[k].second);
      }
    }
    if (!cur.pos.empty()) tracks.push_back(std::move(cur));
  }

  const long window_len = H + T;
  long grid_end = 0;
  for (const auto& t : tracks) grid_end = std::max(grid_end, t.end());

  std::vector<EpisodeRecord> records;
  std::uint64_t counter = 0;
  for (long w = 0; w + window_len <= grid_end; ++w) {
    std::vector<const Track*> present;
    for (const auto& t : tracks)
      if (t.covers(w, window_len)) present.push_back(&t);
    if (present.empty()) continue;
    // by_agent is an ordered map and a window holds at most one track per
    // agent, so `present` is already sorted by agent id.

    // Shared frame block for every ego choice of this window.
    std::vector<std::vector<AgentState>> frames(
        static_cast<std::size_t>(window_len));
    for (auto& f : frames) f.resize(present.size());
    for (std::size_t a = 0; a < present.size(); ++a) {
      const Track& t = *present[a];
      for (long s = 0; s < window_len; ++s) {
        const auto k = static_cast<std::size_t>(w - t.start + s);
        AgentState st;
        st.position = t.pos[k];
        st.radius = pedestrian_radius;
        // Forward difference keeps p[t+1] = p[t] + v[t]*dt exact.
        if (k + 1 < t.pos.size())
          st.velocity = (t.pos[k + 1] - t.pos[k]) / kEthUcyDt;
        else if (k > 0)
          st.velocity = (t.pos[k] - t.pos[k - 1]) / kEthUcyDt;
        frames[static_cast<std::size_t>(s)][a] = st;
      }
    }

    for (std::size_t ego = 0; ego < present.size(); ++ego) {
      EpisodeRecord rec;
      rec.seed = counter++;
      rec.robot_index = static_cast<int>(ego);
      for (std::size_t a = 0; a < present.size(); ++a) {
        EpisodeRecord::AgentInfo info;
        info.id = present[a]->agent_id;
        info.radius = pedestrian_radius;
        info.goal = frames.back()[a].position;
        rec.agents.push_back(info);
      }
      rec.frames = frames;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

inline std::vector<EpisodeRecord> parse_trajectory_file(
    const std::filesystem::path& path, int H = kEthUcyHistory,
    int T = kEthUcyHorizon, double pedestrian_radius = kPedestrianRadius) {
  return parse_trajectory_text(read_file(path), H, T, pedestrian_radius);
}

/// Assembles a Dataset from one or more raw trajectory files.
inline Dataset ingest_ethucy(const std::vector<std::filesystem::path>& paths,
                             int H = kEthUcyHistory, int T = kEthUcyHorizon,
                             double pedestrian_radius = kPedestrianRadius) {
  Dataset d;
  d.history = H;
  d.horizon = T;
  d.dt = kEthUcyDt;
  d.split_tag = "train";
  for (const auto& p : paths) {
    auto recs = parse_trajectory_file(p, H, T, pedestrian_radius);
    for (auto& r : recs) {
      r.seed = static_cast<std::uint64_t>(d.records.size());
      d.records.push_back(std::move(r));
    }
  }
  return d;
}

}  // namespace advnav
