#pragma once

#include <atomic>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "advnav/core/metrics.hpp"
#include "advnav/core/types.hpp"
#include "advnav/cost/chomp.hpp"
#include "advnav/model/model.hpp"
#include "advnav/util.hpp"

namespace advnav {

inline constexpr const char* kRowDemo = "demonstrations";
inline constexpr const char* kRowNom = "nom-planner";
inline constexpr const char* kRowSafe = "safe-planner";
inline constexpr const char* kColGroundTruth = "ground-truth";
inline constexpr const char* kColMle = "mle-forecaster";
inline constexpr const char* kColAdv = "adv-forecaster";

struct EvalCell {
  double mean_cost = 0.0;
  double collision_rate = 0.0;
  std::size_t count = 0;
};

/// The planner x forecaster grid: rows are plan sources, columns are the
/// futures the plans are scored against.
struct EvalMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<EvalCell> cells;  // row-major

  const EvalCell& cell(const std::string& row, const std::string& col) const {
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        if (rows[r] == row && cols[c] == col) return cells[r * cols.size() + c];
    throw std::out_of_range("EvalMatrix: no cell (" + row + ", " + col + ")");
  }
};

struct DisplacementEntry {
  double ade = 0.0;
  double fde = 0.0;
};

struct DisplacementTable {
  std::map<std::string, DisplacementEntry> by_model;
};

/// Non-owning bundle of whichever checkpointed players are available.
struct EvalModels {
  ForecasterModel* mle = nullptr;
  ForecasterModel* adv = nullptr;
  PlannerModel* nom = nullptr;
  PlannerModel* safe = nullptr;
};

namespace eval_detail {

struct KahanSum {
  double sum = 0.0, carry = 0.0;
  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const int k = std::min<int>(jobs, static_cast<int>(n));
  workers.reserve(static_cast<std::size_t>(k));
  for (int w = 0; w < k; ++w)
    workers.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : workers) t.join();
}

inline void check_model_matches(const ModelConfig& cfg, const Dataset& data,
                                const std::string& name) {
  if (cfg.horizon != data.horizon || cfg.history != data.history)
    throw std::runtime_error(
        "evaluate: checkpoint '" + name + "' has H=" + std::to_string(cfg.history) +
        " T=" + std::to_string(cfg.horizon) + " but the dataset has H=" +
        std::to_string(data.history) + " T=" + std::to_string(data.horizon));
}

}  // namespace eval_detail

/// Fills every (plan source, future source) cell over the held-out contexts.
/// Planners consume their training-time partner forecasts (Nom <- MLE,
/// Safe <- Adv); the columns only change which futures the plan is scored
/// against. Aggregation order is fixed by context order regardless of `jobs`.
inline EvalMatrix evaluate(const Dataset& test, const EvalModels& models,
                           const CostParams& cost_params, int jobs = 1) {
  EvalMatrix m;
  m.rows.push_back(kRowDemo);
  if (models.nom && models.mle) m.rows.push_back(kRowNom);
  if (models.safe && models.adv) m.rows.push_back(kRowSafe);
  m.cols.push_back(kColGroundTruth);
  if (models.mle) m.cols.push_back(kColMle);
  if (models.adv) m.cols.push_back(kColAdv);

  if (models.mle) eval_detail::check_model_matches(models.mle->cfg, test, kColMle);
  if (models.adv) eval_detail::check_model_matches(models.adv->cfg, test, kColAdv);
  if (models.nom) eval_detail::check_model_matches(models.nom->cfg, test, kRowNom);
  if (models.safe) eval_detail::check_model_matches(models.safe->cfg, test, kRowSafe);

  const auto refs = enumerate_contexts(test);
  const std::size_t n_cells = m.rows.size() * m.cols.size();
  // Per-context cell samples, reduced in context order afterwards.
  std::vector<std::vector<std::pair<double, bool>>> samples(refs.size());

  const double adj = models.mle   ? models.mle->cfg.adjacency_radius
                     : models.nom ? models.nom->cfg.adjacency_radius
                                  : kDefaultAdjacencyRadius;

  eval_detail::parallel_for(refs.size(), jobs, [&](std::size_t i) {
    const ContextWindow w = window_at(test, refs[i], adj);

    std::map<std::string, std::vector<Trajectory>> futures;
    futures[kColGroundTruth] = w.human_futures;
    std::vector<Trajectory> mle_fc, adv_fc;
    if (models.mle) {
      mle_fc = models.mle->forecast(w.context);
      futures[kColMle] = mle_fc;
    }
    if (models.adv) {
      adv_fc = models.adv->forecast(w.context);
      futures[kColAdv] = adv_fc;
    }

    const auto positions_of = [](const std::vector<Trajectory>& ts) {
      std::vector<diff::Mat> out;
      out.reserve(ts.size());
      for (const auto& t : ts) out.push_back(trajectory_positions(t));
      return out;
    };

    std::map<std::string, Trajectory> plans;
    plans[kRowDemo] = w.robot_future;
    if (models.nom && models.mle)
      plans[kRowNom] = models.nom->plan(w.context, positions_of(mle_fc));
    if (models.safe && models.adv)
      plans[kRowSafe] = models.safe->plan(w.context, positions_of(adv_fc));

    auto& out = samples[i];
    out.reserve(n_cells);
    for (const auto& row : m.rows)
      for (const auto& col : m.cols) {
        const auto& plan = plans.at(row);
        const auto& fut = futures.at(col);
        out.emplace_back(scene_cost(plan, fut, cost_params).value,
                         in_collision(plan, fut));
      }
  });

  std::vector<eval_detail::KahanSum> cost_sums(n_cells);
  std::vector<std::size_t> hits(n_cells, 0);
  for (const auto& ctx_cells : samples)
    for (std::size_t c = 0; c < n_cells; ++c) {
      cost_sums[c].add(ctx_cells[c].first);
      if (ctx_cells[c].second) ++hits[c];
    }

  m.cells.resize(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    m.cells[c].count = refs.size();
    if (!refs.empty()) {
      m.cells[c].mean_cost = cost_sums[c].sum / static_cast<double>(refs.size());
      m.cells[c].collision_rate =
          static_cast<double>(hits[c]) / static_cast<double>(refs.size());
    }
  }
  return m;
}

/// ADE/FDE per model: forecasters against observed human futures (over all
/// humans and contexts), planners against the demonstrated robot future.
inline DisplacementTable displacement_table(const Dataset& test,
                                            const EvalModels& models,
                                            int jobs = 1) {
  const auto refs = enumerate_contexts(test);
  struct Row {
    double mle_ade = 0, mle_fde = 0, adv_ade = 0, adv_fde = 0;
    double nom_ade = 0, nom_fde = 0, safe_ade = 0, safe_fde = 0;
    std::size_t humans = 0;
    bool has_plan = false;
  };
  std::vector<Row> rows(refs.size());

  const double adj = models.mle   ? models.mle->cfg.adjacency_radius
                     : models.nom ? models.nom->cfg.adjacency_radius
                                  : kDefaultAdjacencyRadius;

  eval_detail::parallel_for(refs.size(), jobs, [&](std::size_t i) {
    const ContextWindow w = window_at(test, refs[i], adj);
    Row& r = rows[i];
    r.humans = w.human_futures.size();

    const auto positions_of = [](const std::vector<Trajectory>& ts) {
      std::vector<diff::Mat> out;
      out.reserve(ts.size());
      for (const auto& t : ts) out.push_back(trajectory_positions(t));
      return out;
    };

    std::vector<Trajectory> mle_fc, adv_fc;
    if (models.mle) {
      mle_fc = models.mle->forecast(w.context);
      for (std::size_t h = 0; h < mle_fc.size(); ++h) {
        r.mle_ade += ade(mle_fc[h], w.human_futures[h]);
        r.mle_fde += fde(mle_fc[h], w.human_futures[h]);
      }
    }
    if (models.adv) {
      adv_fc = models.adv->forecast(w.context);
      for (std::size_t h = 0; h < adv_fc.size(); ++h) {
        r.adv_ade += ade(adv_fc[h], w.human_futures[h]);
        r.adv_fde += fde(adv_fc[h], w.human_futures[h]);
      }
    }
    if (models.nom && models.mle) {
      const Trajectory plan = models.nom->plan(w.context, positions_of(mle_fc));
      r.nom_ade = ade(plan, w.robot_future);
      r.nom_fde = fde(plan, w.robot_future);
      r.has_plan = true;
    }
    if (models.safe && models.adv) {
      const Trajectory plan = models.safe->plan(w.context, positions_of(adv_fc));
      r.safe_ade = ade(plan, w.robot_future);
      r.safe_fde = fde(plan, w.robot_future);
    }
  });

  eval_detail::KahanSum mle_a, mle_f, adv_a, adv_f, nom_a, nom_f, safe_a, safe_f;
  std::size_t human_count = 0, plan_count = 0;
  for (const auto& r : rows) {
    human_count += r.humans;
    if (r.has_plan) ++plan_count;
    mle_a.add(r.mle_ade);
    mle_f.add(r.mle_fde);
    adv_a.add(r.adv_ade);
    adv_f.add(r.adv_fde);
    nom_a.add(r.nom_ade);
    nom_f.add(r.nom_fde);
    safe_a.add(r.safe_ade);
    safe_f.add(r.safe_fde);
  }

  DisplacementTable table;
  if (models.mle && human_count > 0)
    table.by_model[kColMle] = {mle_a.sum / human_count, mle_f.sum / human_count};
  if (models.adv && human_count > 0)
    table.by_model[kColAdv] = {adv_a.sum / human_count, adv_f.sum / human_count};
  if (models.nom && models.mle && plan_count > 0)
    table.by_model[kRowNom] = {nom_a.sum / plan_count, nom_f.sum / plan_count};
  if (models.safe && models.adv && plan_count > 0)
    table.by_model[kRowSafe] = {safe_a.sum / plan_count, safe_f.sum / plan_count};
  return table;
}

// ---- report emission -------------------------------------------------------

inline std::string matrix_to_csv(const EvalMatrix& m) {
  std::string out = "plan_source,future_source,mean_cost,collision_rate,count\n";
  for (std::size_t r = 0; r < m.rows.size(); ++r)
    for (std::size_t c = 0; c < m.cols.size(); ++c) {
      const auto& cell = m.cells[r * m.cols.size() + c];
      out += m.rows[r] + "," + m.cols[c] + "," + fmt_double(cell.mean_cost) +
             "," + fmt_double(cell.collision_rate) + "," +
             std::to_string(cell.count) + "\n";
    }
  return out;
}

inline EvalMatrix matrix_from_csv(const std::string& text) {
  EvalMatrix m;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "plan_source,future_source,mean_cost,collision_rate,count")
    throw std::runtime_error("matrix csv: bad header");
  std::vector<std::tuple<std::string, std::string, EvalCell>> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t at = 0;
    while (true) {
      const auto comma = line.find(',', at);
      f.push_back(line.substr(at, comma == std::string::npos ? comma : comma - at));
      if (comma == std::string::npos) break;
      at = comma + 1;
    }
    if (f.size() != 5) throw std::runtime_error("matrix csv: bad row: " + line);
    EvalCell cell;
    cell.mean_cost = parse_double(f[2]);
    cell.collision_rate = parse_double(f[3]);
    cell.count = static_cast<std::size_t>(std::stoull(f[4]));
    entries.emplace_back(f[0], f[1], cell);
    if (std::find(m.rows.begin(), m.rows.end(), f[0]) == m.rows.end())
      m.rows.push_back(f[0]);
    if (std::find(m.cols.begin(), m.cols.end(), f[1]) == m.cols.end())
      m.cols.push_back(f[1]);
  }
  m.cells.resize(m.rows.size() * m.cols.size());
  for (const auto& [row, col, cell] : entries)
    for (std::size_t r = 0; r < m.rows.size(); ++r)
      for (std::size_t c = 0; c < m.cols.size(); ++c)
        if (m.rows[r] == row && m.cols[c] == col)
          m.cells[r * m.cols.size() + c] = cell;
  return m;
}

inline std::string table_to_csv(const DisplacementTable& t) {
  std::string out = "model,ade,fde\n";
  for (const auto& [model, e] : t.by_model)
    out += model + "," + fmt_double(e.ade) + "," + fmt_double(e.fde) + "\n";
  return out;
}

inline nlohmann::json matrix_to_json(const EvalMatrix& m) {
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows.size(); ++r)
    for (std::size_t c = 0; c < m.cols.size(); ++c) {
      const auto& cell = m.cells[r * m.cols.size() + c];
      cells.push_back({{"plan_source", m.rows[r]},
                       {"future_source", m.cols[c]},
                       {"mean_cost", cell.mean_cost},
                       {"collision_rate", cell.collision_rate},
                       {"count", cell.count}});
    }
  return cells;
}

inline nlohmann::json table_to_json(const DisplacementTable& t) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [model, e] : t.by_model)
    j[model] = {{"ade", e.ade}, {"fde", e.fde}};
  return j;
}

/// Writes eval_matrix.csv, displacement.csv and report.json (version 1, with
/// config provenance) under `dir`. Byte-deterministic for identical inputs.
inline void emit_report(const EvalMatrix& m, const DisplacementTable& t,
                        const std::filesystem::path& dir,
                        const nlohmann::json& provenance) {
  std::filesystem::create_directories(dir);
  atomic_write_file(dir / "eval_matrix.csv", matrix_to_csv(m));
  atomic_write_file(dir / "displacement.csv", table_to_csv(t));
  nlohmann::json report;
  report["version"] = 1;
  report["matrix"] = matrix_to_json(m);
  report["displacement"] = table_to_json(t);
  report["provenance"] = provenance;
  atomic_write_file(dir / "report.json", report.dump(2) + "\n");
}

}  // namespace advnav
