#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "advnav/core/ethucy.hpp"
#include "advnav/cost/chomp.hpp"
#include "advnav/model/model.hpp"
#include "advnav/sim/simulator.hpp"
#include "advnav/train/train.hpp"
#include "advnav/util.hpp"

namespace advnav {

/// Merged pipeline configuration: INI-style sections, every key validated
/// against the known set before any work starts.
struct RunConfig {
  SimConfig sim;
  CostParams cost;
  ModelConfig model;
  TrainConfig train;
  double ingest_radius = kPedestrianRadius;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["sim"] = {{"n_humans", sim.n_humans},
                {"dt", sim.dt},
                {"arena_radius", sim.arena_radius},
                {"v_max", sim.v_max},
                {"agent_radius", sim.agent_radius},
                {"orca_tau", sim.orca_tau},
                {"episode_max_steps", sim.episode_max_steps},
                {"goal_tolerance", sim.goal_tolerance},
                {"placement_margin", sim.placement_margin},
                {"demo_speeds", sim.demo_speeds},
                {"demo_headings", sim.demo_headings},
                {"demo_margin", sim.demo_margin},
                {"demo_rollout", sim.demo_rollout},
                {"demo_cost_weight", sim.demo_cost_weight},
                {"demo_epsilon", sim.demo_epsilon},
                {"history", sim.history},
                {"horizon", sim.horizon}};
    j["cost"] = {{"epsilon", cost.epsilon},
                 {"aggregate",
                  cost.aggregate == CostParams::Aggregate::kMax ? "max" : "sum"}};
    j["model"] = model.to_json();
    j["train"] = {{"rounds", train.rounds},
                  {"batch_size", train.batch_size},
                  {"lr_forecaster", train.lr_forecaster},
                  {"lr_planner", train.lr_planner},
                  {"lambda", train.lambda},
                  {"beta", train.beta},
                  {"checkpoint_every", train.checkpoint_every},
                  {"mle_lr", train.mle_lr},
                  {"mle_max_epochs", train.mle_max_epochs},
                  {"mle_plateau_tol", train.mle_plateau_tol},
                  {"nom_pretrain_cost", train.nom_pretrain_cost},
                  {"seed", train.seed}};
    j["ingest"] = {{"pedestrian_radius", ingest_radius}};
    return j;
  }

  void validate() const {
    sim.check();
    cost.check();
    model.check();
    train.check();
    if (!(ingest_radius > 0.0))
      throw std::invalid_argument("config: ingest.pedestrian_radius must be > 0");
  }
};

namespace config_detail {

inline bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::runtime_error("config: bad boolean for " + where + ": '" + v + "'");
}

inline int parse_int(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer for " + where + ": '" + v + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer for " + where + ": '" + v + "'");
  }
}

inline double parse_num(const std::string& v, const std::string& where) {
  try {
    return parse_double(v);
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad number for " + where + ": '" + v + "'");
  }
}

}  // namespace config_detail

/// Applies one key=value under a section; unknown keys are rejected.
inline void apply_config_kv(RunConfig& cfg, const std::string& section,
                            const std::string& key, const std::string& value) {
  using namespace config_detail;
  const std::string where = section + "." + key;

  if (section == "sim") {
    if (key == "n_humans") cfg.sim.n_humans = parse_int(value, where);
    else if (key == "dt") cfg.sim.dt = parse_num(value, where);
    else if (key == "arena_radius") cfg.sim.arena_radius = parse_num(value, where);
    else if (key == "v_max") cfg.sim.v_max = parse_num(value, where);
    else if (key == "agent_radius") cfg.sim.agent_radius = parse_num(value, where);
    else if (key == "orca_tau") cfg.sim.orca_tau = parse_num(value, where);
    else if (key == "episode_max_steps") cfg.sim.episode_max_steps = parse_int(value, where);
    else if (key == "goal_tolerance") cfg.sim.goal_tolerance = parse_num(value, where);
    else if (key == "placement_margin") cfg.sim.placement_margin = parse_num(value, where);
    else if (key == "demo_speeds") cfg.sim.demo_speeds = parse_int(value, where);
    else if (key == "demo_headings") cfg.sim.demo_headings = parse_int(value, where);
    else if (key == "demo_margin") cfg.sim.demo_margin = parse_num(value, where);
    else if (key == "demo_rollout") cfg.sim.demo_rollout = parse_int(value, where);
    else if (key == "demo_cost_weight") cfg.sim.demo_cost_weight = parse_num(value, where);
    else if (key == "demo_epsilon") cfg.sim.demo_epsilon = parse_num(value, where);
    else if (key == "history") cfg.sim.history = parse_int(value, where);
    else if (key == "horizon") cfg.sim.horizon = parse_int(value, where);
    else throw std::runtime_error("config: unknown key " + where);
  } else if (section == "cost") {
    if (key == "epsilon") cfg.cost.epsilon = parse_num(value, where);
    else if (key == "aggregate") {
      if (value == "max") cfg.cost.aggregate = CostParams::Aggregate::kMax;
      else if (value == "sum") cfg.cost.aggregate = CostParams::Aggregate::kSum;
      else throw std::runtime_error("config: cost.aggregate must be max|sum");
    } else throw std::runtime_error("config: unknown key " + where);
  } else if (section == "model") {
    if (key == "embed_dim") cfg.model.embed_dim = parse_int(value, where);
    else if (key == "hidden_dim") cfg.model.hidden_dim = parse_int(value, where);
    else if (key == "attention_heads") cfg.model.attention_heads = parse_int(value, where);
    else if (key == "encoder") {
      if (value == "recurrent") cfg.model.encoder = ModelConfig::Encoder::kRecurrent;
      else if (value == "affine") cfg.model.encoder = ModelConfig::Encoder::kAffine;
      else throw std::runtime_error("config: model.encoder must be recurrent|affine");
    } else if (key == "sigma") cfg.model.sigma = parse_num(value, where);
    else if (key == "adjacency_radius") cfg.model.adjacency_radius = parse_num(value, where);
    else throw std::runtime_error("config: unknown key " + where);
  } else if (section == "train") {
    if (key == "rounds") cfg.train.rounds = parse_int(value, where);
    else if (key == "batch_size") cfg.train.batch_size = parse_int(value, where);
    else if (key == "lr_forecaster") cfg.train.lr_forecaster = parse_num(value, where);
    else if (key == "lr_planner") cfg.train.lr_planner = parse_num(value, where);
    else if (key == "lambda") cfg.train.lambda = parse_num(value, where);
    else if (key == "beta") cfg.train.beta = parse_num(value, where);
    else if (key == "checkpoint_every") cfg.train.checkpoint_every = parse_int(value, where);
    else if (key == "mle_lr") cfg.train.mle_lr = parse_num(value, where);
    else if (key == "mle_max_epochs") cfg.train.mle_max_epochs = parse_int(value, where);
    else if (key == "mle_plateau_tol") cfg.train.mle_plateau_tol = parse_num(value, where);
    else if (key == "nom_pretrain_cost") cfg.train.nom_pretrain_cost = parse_bool(value, where);
    else if (key == "seed") cfg.train.seed = parse_u64(value, where);
    else throw std::runtime_error("config: unknown key " + where);
  } else if (section == "ingest") {
    if (key == "pedestrian_radius") cfg.ingest_radius = parse_num(value, where);
    else throw std::runtime_error("config: unknown key " + where);
  } else {
    throw std::runtime_error("config: unknown section [" + section + "]");
  }
}

/// Flat INI: [section] headers, key = value lines, # or ; comments.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#' || line[first] == ';') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string body = line.substr(first, last - first + 1);
    if (body.front() == '[') {
      if (body.back() != ']')
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": unterminated section header");
      section = body.substr(1, body.size() - 2);
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty() || section.empty())
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": key outside a [section]");
    apply_config_kv(cfg, section, key, value);
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  return parse_config_text(read_file(path));
}

}  // namespace advnav
