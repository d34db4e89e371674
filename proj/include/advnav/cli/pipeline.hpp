#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advnav/cli/config.hpp"
#include "advnav/core/dataset_io.hpp"
#include "advnav/diff/checkpoint.hpp"
#include "advnav/eval/evalkit.hpp"
#include "advnav/eval/evalkit.hpp"
#include "advnav/sim/simulator.hpp"
#include "advnav/train/train.hpp"

namespace advnav {

inline constexpr const char* kTagMleForecaster = "mle-forecaster";
inline constexpr const char* kTagNomPlanner = "nom-planner";
inline constexpr const char* kTagAdvForecaster = "adv-forecaster";
inline constexpr const char* kTagSafePlanner = "safe-planner";

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir,
                                             const char* tag) {
  return dir / (std::string(tag) + ".ckpt");
}

// ---- data generation --------------------------------------------------------

struct GenSummary {
  std::size_t episodes = 0;
  std::size_t contexts = 0;
  double expert_collision_rate = 0.0;
};

/// Runs run_episode over seeds [base_seed, base_seed + episodes). Episodes are
/// independent, so workers fan out freely; results merge in seed order.
inline Dataset generate_dataset(const SimConfig& sim, std::uint64_t base_seed,
                                int episodes, const std::string& split_tag,
                                int jobs = 1, GenSummary* summary = nullptr) {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  Dataset d;
  d.split_tag = split_tag;
  d.history = sim.history;
  d.horizon = sim.horizon;
  d.dt = sim.dt;
  d.records.resize(static_cast<std::size_t>(episodes));
  eval_detail::parallel_for(
      static_cast<std::size_t>(episodes), jobs, [&](std::size_t i) {
        d.records[i] = run_episode(sim, base_seed + i);
      });
  if (summary) {
    summary->episodes = d.records.size();
    summary->contexts = d.num_contexts();
    std::size_t hits = 0;
    for (const auto& r : d.records)
      if (episode_has_collision(r)) ++hits;
    summary->expert_collision_rate =
        static_cast<double>(hits) / static_cast<double>(d.records.size());
  }
  return d;
}

// ---- checkpoint plumbing ----------------------------------------------------

inline nlohmann::json player_meta(const ModelConfig& model_cfg,
                                  const RunConfig& cfg) {
  nlohmann::json meta;
  meta["model"] = model_cfg.to_json();
  meta["config_echo"] = cfg.to_json();
  return meta;
}

inline void save_player(const diff::ParamStore& store, const char* tag,
                        const nlohmann::json& meta,
                        const std::filesystem::path& dir) {
  diff::Checkpoint ckpt;
  ckpt.store = store;
  ckpt.tag = tag;
  ckpt.meta = meta;
  save_checkpoint(ckpt, checkpoint_path(dir, tag));
}

// ---- training phases --------------------------------------------------------

/// MLE pretraining: emits mle-forecaster + nom-planner checkpoints.
inline MleResult run_train_mle(const Dataset& data, RunConfig cfg,
                               const std::filesystem::path& out_dir) {
  cfg.model.history = data.history;
  cfg.model.horizon = data.horizon;
  cfg.model.seed = cfg.train.seed;
  cfg.validate();

  MleResult result = train_mle(data, cfg.model, cfg.train, cfg.cost);
  nlohmann::json meta = player_meta(cfg.model, cfg);
  meta["mle"] = {{"epochs_run", result.epochs_run},
                 {"final_loss", result.final_loss}};
  save_player(result.forecaster.params, kTagMleForecaster, meta, out_dir);
  save_player(result.planner.params, kTagNomPlanner, meta, out_dir);
  return result;
}

inline std::string round_log_csv_header() {
  return "round,planner_cost_diff,planner_nll,planner_loss,"
         "forecaster_cost_diff,forecaster_nll,forecaster_loss,"
         "mean_plan_cost,grad_norm_planner,grad_norm_forecaster\n";
}

inline std::string round_log_csv_row(const RoundLog& log) {
  return std::to_string(log.round) + "," + fmt_double(log.planner_cost_diff) +
         "," + fmt_double(log.planner_nll) + "," + fmt_double(log.planner_loss) +
         "," + fmt_double(log.forecaster_cost_diff) + "," +
         fmt_double(log.forecaster_nll) + "," + fmt_double(log.forecaster_loss) +
         "," + fmt_double(log.mean_plan_cost) + "," +
         fmt_double(log.grad_norm_planner) + "," +
         fmt_double(log.grad_norm_forecaster) + "\n";
}

struct TrainAdvOutcome {
  std::uint64_t start_round = 0;
  std::uint64_t end_round = 0;
  bool resumed = false;
};

/// Adversarial phase. Fresh runs initialize from the MLE checkpoints in
/// init_dir; when init_dir already holds adv-forecaster/safe-planner
/// checkpoints training resumes from their round counter, and a split
/// N1 + N2 run reproduces a single N1+N2 run byte for byte.
inline TrainAdvOutcome run_train_adv(const Dataset& data, RunConfig cfg,
                                     const std::filesystem::path& init_dir,
                                     const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const fs::path adv_f = checkpoint_path(init_dir, kTagAdvForecaster);
  const fs::path adv_p = checkpoint_path(init_dir, kTagSafePlanner);
  const fs::path mle_f = checkpoint_path(init_dir, kTagMleForecaster);
  const fs::path mle_p = checkpoint_path(init_dir, kTagNomPlanner);

  TrainAdvOutcome outcome;
  std::optional<ForecasterModel> forecaster;
  std::optional<PlannerModel> planner;

  if (fs::exists(adv_f) && fs::exists(adv_p)) {
    outcome.resumed = true;
    diff::Checkpoint cf = load_checkpoint(adv_f);
    diff::Checkpoint cp = load_checkpoint(adv_p);
    const ModelConfig model_cfg = ModelConfig::from_json(cf.meta.at("model"));
    cfg.model = model_cfg;
    forecaster.emplace(model_cfg, std::move(cf.store));
    planner.emplace(model_cfg, std::move(cp.store));
  } else if (fs::exists(mle_f) && fs::exists(mle_p)) {
    diff::Checkpoint cf = load_checkpoint(mle_f);
    diff::Checkpoint cp = load_checkpoint(mle_p);
    const ModelConfig model_cfg = ModelConfig::from_json(cf.meta.at("model"));
    cfg.model = model_cfg;
    cf.store.step = 0;
    cp.store.step = 0;
    forecaster.emplace(model_cfg, std::move(cf.store));
    planner.emplace(model_cfg, std::move(cp.store));
  } else {
    throw std::runtime_error(
        "train-adv: no checkpoints in '" + init_dir.string() +
        "'; run train-mle first to produce " + std::string(kTagMleForecaster) +
        ".ckpt and " + std::string(kTagNomPlanner) + ".ckpt");
  }
  cfg.validate();

  // Seed for the minibatch schedule comes from the config; the model seed is
  // pinned by the loaded checkpoints.
  outcome.start_round = forecaster->params.step;

  nlohmann::json meta = player_meta(cfg.model, cfg);
  meta["adversarial"] = {{"lambda", cfg.train.lambda},
                         {"beta", cfg.train.effective_beta()},
                         {"lr_forecaster", cfg.train.lr_forecaster},
                         {"lr_planner", cfg.train.lr_planner},
                         {"batch_size", cfg.train.batch_size},
                         {"seed", cfg.train.seed}};

  std::string csv;
  const fs::path csv_path = out_dir / "rounds.csv";
  if (outcome.resumed && fs::exists(csv_path))
    csv = read_file(csv_path);
  else
    csv = round_log_csv_header();

  const auto save_all = [&](const ForecasterModel& f, const PlannerModel& p) {
    save_player(f.params, kTagAdvForecaster, meta, out_dir);
    save_player(p.params, kTagSafePlanner, meta, out_dir);
  };

  AdversarialResult result = adversarial_train(
      data, std::move(*forecaster), std::move(*planner), cfg.train, cfg.cost,
      [&](std::uint64_t round, ForecasterModel& f, PlannerModel& p,
          const RoundLog& log) {
        csv += round_log_csv_row(log);
        if (cfg.train.checkpoint_every > 0 &&
            (round + 1) % static_cast<std::uint64_t>(cfg.train.checkpoint_every) == 0)
          save_all(f, p);
      });

  save_all(result.forecaster, result.planner);
  atomic_write_file(csv_path, csv);
  outcome.end_round = result.forecaster.params.step;
  return outcome;
}

// ---- evaluation -------------------------------------------------------------

struct LoadedModels {
  std::optional<ForecasterModel> mle, adv;
  std::optional<PlannerModel> nom, safe;
  nlohmann::json adv_meta;  // provenance of the adversarial run, if present

  EvalModels view() {
    EvalModels v;
    if (mle) v.mle = &*mle;
    if (adv) v.adv = &*adv;
    if (nom) v.nom = &*nom;
    if (safe) v.safe = &*safe;
    return v;
  }

  std::vector<std::string> missing() const {
    std::vector<std::string> out;
    if (!mle) out.push_back(kTagMleForecaster);
    if (!nom) out.push_back(kTagNomPlanner);
    if (!adv) out.push_back(kTagAdvForecaster);
    if (!safe) out.push_back(kTagSafePlanner);
    return out;
  }
};

inline LoadedModels load_models(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  LoadedModels out;
  const auto try_load = [&](const char* tag) -> std::optional<diff::Checkpoint> {
    const fs::path p = checkpoint_path(dir, tag);
    if (!fs::exists(p)) return std::nullopt;
    return load_checkpoint(p);
  };
  if (auto c = try_load(kTagMleForecaster))
    out.mle.emplace(ModelConfig::from_json(c->meta.at("model")), std::move(c->store));
  if (auto c = try_load(kTagNomPlanner))
    out.nom.emplace(ModelConfig::from_json(c->meta.at("model")), std::move(c->store));
  if (auto c = try_load(kTagAdvForecaster)) {
    out.adv_meta = c->meta.value("adversarial", nlohmann::json());
    out.adv.emplace(ModelConfig::from_json(c->meta.at("model")), std::move(c->store));
  }
  if (auto c = try_load(kTagSafePlanner))
    out.safe.emplace(ModelConfig::from_json(c->meta.at("model")), std::move(c->store));
  return out;
}

/// Hash of a checkpoint file's bytes, for report provenance.
inline std::string file_hash_hex(const std::filesystem::path& p) {
  const std::string bytes = read_file(p);
  return hex64(fnv1a(bytes.data(), bytes.size()));
}

inline void run_eval(const Dataset& test, const std::filesystem::path& ckpt_dir,
                     const std::filesystem::path& out_dir,
                     const CostParams& cost_params, int jobs = 1,
                     std::ostream* notes = nullptr) {
  LoadedModels models = load_models(ckpt_dir);
  const auto missing = models.missing();
  if (notes)
    for (const auto& tag : missing)
      *notes << "note: checkpoint '" << tag
             << "' not found; matrix restricted accordingly\n";
  if (!models.mle && !models.adv && !models.nom && !models.safe)
    throw std::runtime_error("eval: no checkpoints found in '" +
                             ckpt_dir.string() + "'");

  const EvalModels view = models.view();
  const EvalMatrix matrix = evaluate(test, view, cost_params, jobs);
  const DisplacementTable table = displacement_table(test, view, jobs);

  nlohmann::json provenance;
  provenance["cost"] = {{"epsilon", cost_params.epsilon},
                        {"aggregate", cost_params.aggregate ==
                                              CostParams::Aggregate::kMax
                                          ? "max"
                                          : "sum"}};
  provenance["lambda"] = models.adv_meta.is_null()
                             ? nlohmann::json()
                             : models.adv_meta.value("lambda", nlohmann::json());
  nlohmann::json ckpts = nlohmann::json::object();
  for (const char* tag : {kTagMleForecaster, kTagNomPlanner, kTagAdvForecaster,
                          kTagSafePlanner}) {
    const auto p = checkpoint_path(ckpt_dir, tag);
    if (std::filesystem::exists(p)) ckpts[tag] = file_hash_hex(p);
  }
  provenance["checkpoints"] = ckpts;
  provenance["dataset"] = {{"split_tag", test.split_tag},
                           {"records", test.records.size()},
                           {"contexts", test.num_contexts()},
                           {"H", test.history},
                           {"T", test.horizon},
                           {"dt", test.dt}};
  emit_report(matrix, table, out_dir, provenance);
}

}  // namespace advnav
