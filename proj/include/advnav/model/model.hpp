#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "advnav/core/types.hpp"
#include "advnav/diff/param_store.hpp"
#include "advnav/diff/tape.hpp"

namespace advnav {

struct ModelConfig {
  int history = 8;
  int horizon = 8;
  int embed_dim = 32;
  int hidden_dim = 64;
  int attention_heads = 1;
  enum class Encoder { kRecurrent, kAffine } encoder = Encoder::kRecurrent;
  double sigma = 1.0;            // m, fixed Gaussian likelihood scale
  double adjacency_radius = 5.0; // m, neighbor rule for context building
  std::uint64_t seed = 0;

  void check() const {
    if (history < 1 || horizon < 1 || embed_dim < 1 || hidden_dim < 1)
      throw std::invalid_argument("ModelConfig: dims must be positive");
    if (attention_heads < 1 || embed_dim % attention_heads != 0)
      throw std::invalid_argument(
          "ModelConfig: attention_heads must divide embed_dim");
    if (!(sigma > 0.0)) throw std::invalid_argument("ModelConfig: sigma must be > 0");
  }

  nlohmann::json to_json() const {
    return {{"history", history},
            {"horizon", horizon},
            {"embed_dim", embed_dim},
            {"hidden_dim", hidden_dim},
            {"attention_heads", attention_heads},
            {"encoder", encoder == Encoder::kRecurrent ? "recurrent" : "affine"},
            {"sigma", sigma},
            {"adjacency_radius", adjacency_radius},
            {"seed", seed}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.history = j.at("history").get<int>();
    cfg.horizon = j.at("horizon").get<int>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.attention_heads = j.at("attention_heads").get<int>();
    cfg.encoder = j.at("encoder").get<std::string>() == "affine"
                      ? Encoder::kAffine
                      : Encoder::kRecurrent;
    cfg.sigma = j.at("sigma").get<double>();
    cfg.adjacency_radius = j.at("adjacency_radius").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
  }
};

namespace model_detail {

inline constexpr int kFeatureDim = 6;  // rel pos (2), step delta (2), velocity (2)

/// Per-step features for one agent, expressed relative to the ego's last
/// observed position so whole-scene translations cancel out.
inline diff::Mat agent_features(const SceneContext& ctx, std::size_t agent) {
  const auto& hist = ctx.histories[agent];
  const Vec2 origin =
      ctx.histories[static_cast<std::size_t>(ctx.robot_index)].back().position;
  diff::Mat f(static_cast<Eigen::Index>(hist.size()), kFeatureDim);
  for (std::size_t t = 0; t < hist.size(); ++t) {
    const Vec2 rel = hist[t].position - origin;
    const Vec2 delta = t == 0 ? hist[0].velocity * ctx.dt
                              : hist[t].position - hist[t - 1].position;
    const auto r = static_cast<Eigen::Index>(t);
    f(r, 0) = rel.x;
    f(r, 1) = rel.y;
    f(r, 2) = delta.x;
    f(r, 3) = delta.y;
    f(r, 4) = hist[t].velocity.x;
    f(r, 5) = hist[t].velocity.y;
  }
  return f;
}

inline void add_trunk_params(diff::ParamStore& store, const ModelConfig& cfg) {
  const int e = cfg.embed_dim;
  if (cfg.encoder == ModelConfig::Encoder::kRecurrent) {
    for (const char* gate : {"z", "r", "h"}) {
      store.add_xavier(std::string("enc.W") + gate, kFeatureDim, e);
      store.add_xavier(std::string("enc.U") + gate, e, e);
      store.add_zeros(std::string("enc.b") + gate, 1, e);
    }
  } else {
    store.add_xavier("enc.W", cfg.history * kFeatureDim, e);
    store.add_zeros("enc.b", 1, e);
  }
  store.add_xavier("att.Wq", e, e);
  store.add_xavier("att.Wk", e, e);
  store.add_xavier("att.Wv", e, e);
  store.add_xavier("att.Wo", e, e);
}

/// GRU pass over one agent's feature rows; returns the final hidden state.
inline diff::Node gru_encode(diff::Tape& tape, diff::ParamStore& store,
                             const ModelConfig& cfg, diff::Node features) {
  using diff::Node;
  const Node wz = tape.param(store, "enc.Wz"), uz = tape.param(store, "enc.Uz"),
             bz = tape.param(store, "enc.bz");
  const Node wr = tape.param(store, "enc.Wr"), ur = tape.param(store, "enc.Ur"),
             br = tape.param(store, "enc.br");
  const Node wh = tape.param(store, "enc.Wh"), uh = tape.param(store, "enc.Uh"),
             bh = tape.param(store, "enc.bh");

  Node h = tape.constant(diff::Mat::Zero(1, cfg.embed_dim));
  const Eigen::Index steps = tape.value(features).rows();
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Node x = tape.row(features, t);
    const Node z = tape.sigmoid(tape.add(tape.affine(x, wz, bz), tape.matmul(h, uz)));
    const Node r = tape.sigmoid(tape.add(tape.affine(x, wr, br), tape.matmul(h, ur)));
    const Node cand =
        tape.tanh_(tape.add(tape.affine(x, wh, bh), tape.matmul(tape.mul(r, h), uh)));
    // h' = (1 - z) * h + z * cand
    h = tape.add(tape.sub(h, tape.mul(z, h)), tape.mul(z, cand));
  }
  return h;
}

}  // namespace model_detail

/// Recurrent (or flattened-affine) pass over each agent's history; one
/// embedding row per agent.
inline diff::Node encode_history(diff::Tape& tape, diff::ParamStore& store,
                                 const ModelConfig& cfg, const SceneContext& ctx) {
  if (ctx.history_len() != static_cast<std::size_t>(cfg.history))
    throw std::invalid_argument(
        "encode_history: context history length " +
        std::to_string(ctx.history_len()) + " != configured " +
        std::to_string(cfg.history));
  std::vector<diff::Node> rows;
  rows.reserve(ctx.num_agents());
  for (std::size_t a = 0; a < ctx.num_agents(); ++a) {
    const diff::Node features =
        tape.constant(model_detail::agent_features(ctx, a));
    if (cfg.encoder == ModelConfig::Encoder::kRecurrent) {
      rows.push_back(model_detail::gru_encode(tape, store, cfg, features));
    } else {
      const diff::Node flat = tape.reshape_rowmajor(
          features, 1, cfg.history * model_detail::kFeatureDim);
      rows.push_back(tape.tanh_(tape.affine(flat, tape.param(store, "enc.W"),
                                            tape.param(store, "enc.b"))));
    }
  }
  return tape.vstack(rows);
}

/// Scaled dot-product self-attention restricted to the adjacency (self-edges
/// always on) with a residual connection.
inline diff::Node attend(diff::Tape& tape, diff::ParamStore& store,
                         const ModelConfig& cfg, diff::Node embeddings,
                         const SceneContext& ctx) {
  const auto n = static_cast<Eigen::Index>(ctx.num_agents());
  diff::Mat mask(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      mask(i, j) = (i == j || ctx.adjacent(static_cast<std::size_t>(i),
                                           static_cast<std::size_t>(j)))
                       ? 1.0
                       : 0.0;

  const diff::Node q = tape.matmul(embeddings, tape.param(store, "att.Wq"));
  const diff::Node k = tape.matmul(embeddings, tape.param(store, "att.Wk"));
  const diff::Node v = tape.matmul(embeddings, tape.param(store, "att.Wv"));

  const Eigen::Index head_dim = cfg.embed_dim / cfg.attention_heads;
  std::vector<diff::Node> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(cfg.attention_heads));
  for (int head = 0; head < cfg.attention_heads; ++head) {
    const Eigen::Index c0 = head * head_dim;
    const diff::Node qh = tape.slice_cols(q, c0, head_dim);
    const diff::Node kh = tape.slice_cols(k, c0, head_dim);
    const diff::Node vh = tape.slice_cols(v, c0, head_dim);
    const diff::Node scores = tape.scale(
        tape.matmul(qh, tape.transpose(kh)), 1.0 / std::sqrt(double(head_dim)));
    const diff::Node weights = tape.softmax_rows(scores, &mask);
    head_outputs.push_back(tape.matmul(weights, vh));
  }
  const diff::Node mixed = cfg.attention_heads == 1
                               ? head_outputs[0]
                               : tape.concat_cols(head_outputs);
  return tape.add(embeddings, tape.matmul(mixed, tape.param(store, "att.Wo")));
}

namespace model_detail {

/// Decodes a 1 x 2T delta row into absolute T x 2 positions integrated from
/// `start`. Continuity holds by construction: position 0 = start + delta 0.
inline diff::Node integrate_deltas(diff::Tape& tape, diff::Node deltas_flat,
                                   const Vec2& start, int horizon) {
  const diff::Node deltas = tape.reshape_rowmajor(deltas_flat, horizon, 2);
  diff::Mat base(horizon, 2);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    base(t, 0) = start.x;
    base(t, 1) = start.y;
  }
  return tape.add(tape.cumsum_rows(deltas), tape.constant(base));
}

/// Converts a T x 2 position matrix into a Trajectory continuing `last`.
inline Trajectory positions_to_trajectory(const diff::Mat& pos, double dt,
                                          double radius) {
  Trajectory traj;
  traj.dt = dt;
  const Eigen::Index T = pos.rows();
  traj.states.resize(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    auto& s = traj.states[static_cast<std::size_t>(t)];
    s.position = {pos(t, 0), pos(t, 1)};
    s.radius = radius;
    if (t + 1 < T)
      s.velocity = Vec2{pos(t + 1, 0) - pos(t, 0), pos(t + 1, 1) - pos(t, 1)} / dt;
  }
  if (T >= 2)
    traj.states.back().velocity = traj.states[static_cast<std::size_t>(T - 2)].velocity;
  return traj;
}

}  // namespace model_detail

/// Forecaster player P_theta: trunk plus a per-human decoder head. Goals
/// never reach any part of this model.
class ForecasterModel {
 public:
  ModelConfig cfg;
  diff::ParamStore params;

  explicit ForecasterModel(const ModelConfig& config)
      : cfg(config), params(mix_seed(config.seed, 0xF0CA)) {
    cfg.check();
    model_detail::add_trunk_params(params, cfg);
    params.add_xavier("fc.W1", cfg.embed_dim, cfg.hidden_dim);
    params.add_zeros("fc.b1", 1, cfg.hidden_dim);
    params.add_xavier("fc.W2", cfg.hidden_dim, 2 * cfg.horizon);
    params.add_zeros("fc.b2", 1, 2 * cfg.horizon);
  }

  ForecasterModel(const ModelConfig& config, diff::ParamStore store)
      : cfg(config), params(std::move(store)) {
    cfg.check();
  }

  struct Output {
    std::vector<diff::Node> positions;  // per human, T x 2
    std::vector<int> agent_indices;     // within the context
  };

  /// Tape forward: per-human predicted positions as live nodes.
  Output forward(diff::Tape& tape, const SceneContext& ctx) {
    const diff::Node trunk = attend(
        tape, params, cfg, encode_history(tape, params, cfg, ctx), ctx);
    Output out;
    for (std::size_t a = 0; a < ctx.num_agents(); ++a) {
      if (static_cast<int>(a) == ctx.robot_index) continue;
      const diff::Node emb = tape.row(trunk, static_cast<Eigen::Index>(a));
      const diff::Node hidden = tape.tanh_(tape.affine(
          emb, tape.param(params, "fc.W1"), tape.param(params, "fc.b1")));
      const diff::Node deltas = tape.affine(
          hidden, tape.param(params, "fc.W2"), tape.param(params, "fc.b2"));
      out.positions.push_back(model_detail::integrate_deltas(
          tape, deltas, ctx.histories[a].back().position, cfg.horizon));
      out.agent_indices.push_back(static_cast<int>(a));
    }
    return out;
  }

  /// Value-only application: one predicted Trajectory per human.
  std::vector<Trajectory> forecast(const SceneContext& ctx) {
    diff::Tape tape;
    const Output out = forward(tape, ctx);
    std::vector<Trajectory> result;
    result.reserve(out.positions.size());
    for (std::size_t i = 0; i < out.positions.size(); ++i) {
      const auto a = static_cast<std::size_t>(out.agent_indices[i]);
      result.push_back(model_detail::positions_to_trajectory(
          tape.value(out.positions[i]), ctx.dt, ctx.histories[a].back().radius));
    }
    return result;
  }
};

/// Planner player P_psi: its own trunk (players share no parameters), a
/// forecast encoder, and an ego decoder that may read the ego goal.
class PlannerModel {
 public:
  ModelConfig cfg;
  diff::ParamStore params;

  explicit PlannerModel(const ModelConfig& config)
      : cfg(config), params(mix_seed(config.seed, 0x97A1)) {
    cfg.check();
    model_detail::add_trunk_params(params, cfg);
    params.add_xavier("plan.Fe", 2 * cfg.horizon, cfg.embed_dim);
    params.add_zeros("plan.fe_b", 1, cfg.embed_dim);
    params.add_xavier("plan.W1", 2 * cfg.embed_dim + 2, cfg.hidden_dim);
    params.add_zeros("plan.b1", 1, cfg.hidden_dim);
    params.add_xavier("plan.W2", cfg.hidden_dim, 2 * cfg.horizon);
    params.add_zeros("plan.b2", 1, 2 * cfg.horizon);
  }

  PlannerModel(const ModelConfig& config, diff::ParamStore store)
      : cfg(config), params(std::move(store)) {
    cfg.check();
  }

  /// Tape forward. Forecast positions enter as plain values: the planner
  /// conditions on them but its loss never differentiates through the
  /// forecaster.
  diff::Node forward(diff::Tape& tape, const SceneContext& ctx,
                     const std::vector<diff::Mat>& human_forecast_positions) {
    const auto ego = static_cast<std::size_t>(ctx.robot_index);
    const Vec2 origin = ctx.histories[ego].back().position;

    const diff::Node trunk = attend(
        tape, params, cfg, encode_history(tape, params, cfg, ctx), ctx);
    const diff::Node ego_emb = tape.row(trunk, static_cast<Eigen::Index>(ego));

    diff::Node summary;
    if (human_forecast_positions.empty()) {
      summary = tape.constant(diff::Mat::Zero(1, cfg.embed_dim));
    } else {
      std::vector<diff::Node> encoded;
      encoded.reserve(human_forecast_positions.size());
      for (const auto& pos : human_forecast_positions) {
        if (pos.rows() != cfg.horizon || pos.cols() != 2)
          throw std::invalid_argument("plan: forecast positions must be T x 2");
        diff::Mat rel(1, 2 * cfg.horizon);
        for (Eigen::Index t = 0; t < cfg.horizon; ++t) {
          rel(0, 2 * t) = pos(t, 0) - origin.x;
          rel(0, 2 * t + 1) = pos(t, 1) - origin.y;
        }
        encoded.push_back(tape.tanh_(tape.affine(tape.constant(rel),
                                                 tape.param(params, "plan.Fe"),
                                                 tape.param(params, "plan.fe_b"))));
      }
      if (encoded.size() == 1) {
        summary = encoded[0];
      } else {
        // Mean over humans keeps the summary permutation invariant.
        const diff::Node stacked = tape.vstack(encoded);
        const diff::Mat averager = diff::Mat::Constant(
            1, static_cast<Eigen::Index>(encoded.size()),
            1.0 / static_cast<double>(encoded.size()));
        summary = tape.matmul(tape.constant(averager), stacked);
      }
    }

    // The goal is the planner's private input; it is only read when marked
    // visible for the ego.
    diff::Mat goal_rel = diff::Mat::Zero(1, 2);
    if (ctx.goal_visible[ego]) {
      goal_rel(0, 0) = ctx.goals[ego].x - origin.x;
      goal_rel(0, 1) = ctx.goals[ego].y - origin.y;
    }

    const diff::Node joint =
        tape.concat_cols({ego_emb, summary, tape.constant(goal_rel)});
    const diff::Node hidden = tape.tanh_(tape.affine(
        joint, tape.param(params, "plan.W1"), tape.param(params, "plan.b1")));
    const diff::Node deltas = tape.affine(
        hidden, tape.param(params, "plan.W2"), tape.param(params, "plan.b2"));
    return model_detail::integrate_deltas(tape, deltas, origin, cfg.horizon);
  }

  /// Value-only application.
  Trajectory plan(const SceneContext& ctx,
                  const std::vector<diff::Mat>& human_forecast_positions) {
    diff::Tape tape;
    const diff::Node out = forward(tape, ctx, human_forecast_positions);
    const auto ego = static_cast<std::size_t>(ctx.robot_index);
    return model_detail::positions_to_trajectory(
        tape.value(out), ctx.dt, ctx.histories[ego].back().radius);
  }
};

/// T x 2 position matrix of a trajectory, the constant-side currency of the
/// training losses.
inline diff::Mat trajectory_positions(const Trajectory& traj) {
  diff::Mat pos(static_cast<Eigen::Index>(traj.size()), 2);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    pos(static_cast<Eigen::Index>(t), 0) = traj[t].position.x;
    pos(static_cast<Eigen::Index>(t), 1) = traj[t].position.y;
  }
  return pos;
}

}  // namespace advnav
