#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "advnav/core/types.hpp"
#include "advnav/util.hpp"

namespace advnav {

inline constexpr int kDatasetFormatVersion = 1;

// Dataset files are JSON lines. Line 1 is a header record
//   {"H":..,"T":..,"dt":..,"split_tag":..,"version":1}
// and each following line is one episode:
//   {"agents":[{"goal":[x,y],"id":..,"radius":..},..],
//    "frames":[[[px,py,vx,vy],..per agent],..per step],
//    "robot_index":..,"seed":..}
// nlohmann serializes object keys sorted and floats at round-trip precision,
// which makes the writer byte-deterministic.

inline std::string dataset_to_string(const Dataset& d) {
  using nlohmann::json;
  std::string out;
  json header;
  header["version"] = kDatasetFormatVersion;
  header["dt"] = d.dt;
  header["H"] = d.history;
  header["T"] = d.horizon;
  header["split_tag"] = d.split_tag;
  if (!d.provenance.empty()) header["provenance"] = json::parse(d.provenance);
  out += header.dump();
  out += '\n';

  for (const auto& rec : d.records) {
    json j;
    j["seed"] = rec.seed;
    j["robot_index"] = rec.robot_index;
    json agents = json::array();
    for (const auto& a : rec.agents)
      agents.push_back({{"id", a.id},
                        {"radius", a.radius},
                        {"goal", {a.goal.x, a.goal.y}}});
    j["agents"] = agents;
    json frames = json::array();
    for (const auto& frame : rec.frames) {
      json row = json::array();
      for (const auto& s : frame)
        row.push_back({s.position.x, s.position.y, s.velocity.x, s.velocity.y});
      frames.push_back(std::move(row));
    }
    j["frames"] = std::move(frames);
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline Dataset dataset_from_string(const std::string& text) {
  using nlohmann::json;
  Dataset d;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("dataset: missing header line");

  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("dataset: bad header: ") + e.what());
  }
  const int version = header.value("version", -1);
  if (version != kDatasetFormatVersion)
    throw std::runtime_error("dataset: unsupported schema version " +
                             std::to_string(version) + " (expected " +
                             std::to_string(kDatasetFormatVersion) + ")");
  d.dt = header.at("dt").get<double>();
  d.history = header.at("H").get<int>();
  d.horizon = header.at("T").get<int>();
  d.split_tag = header.at("split_tag").get<std::string>();
  if (header.contains("provenance")) d.provenance = header["provenance"].dump();

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("dataset: corrupt record at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    EpisodeRecord rec;
    try {
      rec.seed = j.at("seed").get<std::uint64_t>();
      rec.robot_index = j.at("robot_index").get<int>();
      for (const auto& a : j.at("agents")) {
        EpisodeRecord::AgentInfo info;
        info.id = a.at("id").get<int>();
        info.radius = a.at("radius").get<double>();
        info.goal = {a.at("goal")[0].get<double>(), a.at("goal")[1].get<double>()};
        rec.agents.push_back(info);
      }
      for (const auto& frame : j.at("frames")) {
        if (frame.size() != rec.agents.size())
          throw std::runtime_error("frame width != agent count");
        std::vector<AgentState> row;
        row.reserve(frame.size());
        for (std::size_t a = 0; a < frame.size(); ++a) {
          const auto& s = frame[a];
          AgentState st;
          st.position = {s[0].get<double>(), s[1].get<double>()};
          st.velocity = {s[2].get<double>(), s[3].get<double>()};
          st.radius = rec.agents[a].radius;
          row.push_back(st);
        }
        rec.frames.push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset: corrupt record at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    d.records.push_back(std::move(rec));
  }
  return d;
}

inline void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  atomic_write_file(path, dataset_to_string(d));
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  return dataset_from_string(read_file(path));
}

}  // namespace advnav
