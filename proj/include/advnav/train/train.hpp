#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "advnav/cost/cost_ops.hpp"
#include "advnav/diff/optim.hpp"
#include "advnav/model/model.hpp"
#include "advnav/train/losses.hpp"

namespace advnav {

struct TrainConfig {
  // Adversarial phase (online gradient descent per Alg. 1).
  int rounds = 2000;
  int batch_size = 32;
  double lr_forecaster = 1e-4;
  double lr_planner = 1e-4;
  double lambda = 1.0;  // forecaster likelihood multiplier
  double beta = -1.0;   // planner imitation multiplier; negative -> use lambda
  int checkpoint_every = 500;

  // MLE pretraining phase.
  double mle_lr = 1e-3;
  int mle_max_epochs = 30;
  double mle_plateau_tol = 1e-4;
  bool nom_pretrain_cost = false;  // literal cost-minimization pretraining

  std::uint64_t seed = 0;

  double effective_beta() const { return beta < 0.0 ? lambda : beta; }

  void check() const {
    if (rounds < 0) throw std::invalid_argument("TrainConfig: rounds must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(lr_forecaster > 0.0) || !(lr_planner > 0.0) || !(mle_lr > 0.0))
      throw std::invalid_argument("TrainConfig: learning rates must be > 0");
    if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
    if (mle_max_epochs < 1)
      throw std::invalid_argument("TrainConfig: mle_max_epochs must be >= 1");
  }
};

/// Deterministic without-replacement minibatch order: the permutation for
/// epoch e depends only on (seed, e), so any round's batch can be
/// reconstructed after a resume.
class MinibatchSchedule {
 public:
  MinibatchSchedule(std::size_t n, int batch_size, std::uint64_t seed)
      : n_(n), batch_(static_cast<std::size_t>(batch_size)), seed_(seed) {
    if (n_ == 0) throw std::invalid_argument("MinibatchSchedule: empty index set");
  }

  std::vector<std::size_t> batch_for_step(std::uint64_t step) const {
    std::vector<std::size_t> out;
    out.reserve(batch_);
    for (std::size_t k = 0; k < batch_; ++k) {
      const std::uint64_t pos = step * batch_ + k;
      const std::uint64_t epoch = pos / n_;
      out.push_back(permutation(epoch)[pos % n_]);
    }
    return out;
  }

 private:
  const std::vector<std::size_t>& permutation(std::uint64_t epoch) const {
    auto it = perms_.find(epoch);
    if (it == perms_.end()) {
      std::vector<std::size_t> p(n_);
      std::iota(p.begin(), p.end(), std::size_t{0});
      Rng rng(mix_seed(seed_, epoch));
      rng.shuffle(p);
      it = perms_.emplace(epoch, std::move(p)).first;
    }
    return it->second;
  }

  std::size_t n_;
  std::size_t batch_;
  std::uint64_t seed_;
  mutable std::map<std::uint64_t, std::vector<std::size_t>> perms_;
};

struct MleResult {
  ForecasterModel forecaster;
  PlannerModel planner;
  diff::AdamOptimizer forecaster_opt;
  diff::AdamOptimizer planner_opt;
  int epochs_run = 0;
  double final_loss = 0.0;
};

/// Likelihood-only pretraining: the forecaster maximizes the likelihood of
/// observed human futures, the planner imitates the demonstrated robot future
/// conditioned on (detached) current forecasts. Runs until the epoch loss
/// plateaus or the epoch budget is spent.
inline MleResult train_mle(const Dataset& data, const ModelConfig& model_cfg,
                           const TrainConfig& cfg,
                           const CostParams& cost_params = {}) {
  cfg.check();
  model_cfg.check();
  if (data.records.empty()) throw std::invalid_argument("train_mle: empty dataset");
  const auto refs = enumerate_contexts(data);
  if (refs.empty())
    throw std::invalid_argument("train_mle: dataset has no context windows");

  MleResult result{ForecasterModel(model_cfg), PlannerModel(model_cfg), {}, {}, 0, 0.0};
  result.forecaster_opt.lr = cfg.mle_lr;
  result.planner_opt.lr = cfg.mle_lr;

  double prev_epoch_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < cfg.mle_max_epochs; ++epoch) {
    std::vector<std::size_t> order(refs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(mix_seed(cfg.seed, 0x31e), static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), at + cfg.batch_size);

      // Forecaster step on sum-over-humans NLL.
      std::vector<std::vector<diff::Mat>> detached_forecasts(end - at);
      double f_loss_value = 0.0;
      {
        diff::Tape tape;
        std::vector<diff::Node> terms;
        for (std::size_t k = at; k < end; ++k) {
          const ContextWindow w =
              window_at(data, refs[order[k]], model_cfg.adjacency_radius);
          const auto out = result.forecaster.forward(tape, w.context);
          diff::Node nll_sum = tape.scalar_constant(0.0);
          for (std::size_t h = 0; h < out.positions.size(); ++h) {
            nll_sum = tape.add(
                nll_sum, nll_node(tape, out.positions[h],
                                  trajectory_positions(w.human_futures[h]),
                                  model_cfg.sigma));
            detached_forecasts[k - at].push_back(tape.value(out.positions[h]));
          }
          terms.push_back(nll_sum);
        }
        const diff::Node loss = tape.mean(tape.vstack(terms));
        f_loss_value = tape.scalar(loss);
        result.forecaster.params.zero_grads();
        tape.backward(loss);
        result.forecaster_opt.step(result.forecaster.params);
      }

      // Planner step: imitation by default, literal cost minimization as the
      // configured alternative.
      double p_loss_value = 0.0;
      {
        diff::Tape tape;
        std::vector<diff::Node> terms;
        for (std::size_t k = at; k < end; ++k) {
          const ContextWindow w =
              window_at(data, refs[order[k]], model_cfg.adjacency_radius);
          const diff::Node plan =
              result.planner.forward(tape, w.context, detached_forecasts[k - at]);
          if (cfg.nom_pretrain_cost) {
            std::vector<diff::Node> forecast_nodes;
            for (const auto& m : detached_forecasts[k - at])
              forecast_nodes.push_back(tape.constant(m));
            std::vector<double> radii;
            const auto& ctx = w.context;
            for (std::size_t a = 0; a < ctx.num_agents(); ++a)
              if (static_cast<int>(a) != ctx.robot_index)
                radii.push_back(ctx.histories[a].back().radius);
            terms.push_back(scene_cost_node(
                tape, plan, forecast_nodes,
                ctx.histories[static_cast<std::size_t>(ctx.robot_index)].back().radius,
                radii, cost_params));
          } else {
            terms.push_back(nll_node(tape, plan,
                                     trajectory_positions(w.robot_future),
                                     model_cfg.sigma));
          }
        }
        const diff::Node loss = tape.mean(tape.vstack(terms));
        p_loss_value = tape.scalar(loss);
        result.planner.params.zero_grads();
        tape.backward(loss);
        result.planner_opt.step(result.planner.params);
      }

      epoch_loss += f_loss_value + p_loss_value;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    result.epochs_run = epoch + 1;
    result.final_loss = epoch_loss;
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("train_mle: non-finite loss at epoch " +
                               std::to_string(epoch));
    if (std::abs(prev_epoch_loss - epoch_loss) <=
        cfg.mle_plateau_tol * std::max(1.0, std::abs(prev_epoch_loss)))
      break;
    prev_epoch_loss = epoch_loss;
  }
  // step counts adversarial rounds; the pretrained players start at zero.
  result.forecaster.params.step = 0;
  result.planner.params.step = 0;
  return result;
}

struct RoundLog {
  std::uint64_t round = 0;
  double forecaster_cost_diff = 0.0;
  double forecaster_nll = 0.0;
  double forecaster_loss = 0.0;
  double planner_cost_diff = 0.0;
  double planner_nll = 0.0;
  double planner_loss = 0.0;
  double mean_plan_cost = 0.0;
  double grad_norm_forecaster = 0.0;
  double grad_norm_planner = 0.0;
};

struct AdversarialResult {
  ForecasterModel forecaster;
  PlannerModel planner;
  std::vector<RoundLog> logs;
};

/// The alternating no-regret loop: each round rolls the current players on a
/// minibatch, then takes one planner gradient step followed by one forecaster
/// gradient step, each against the other's frozen round-start output.
///
/// The per-player step length is scaled by 1/(1 + multiplier) so the update
/// stays bounded as the likelihood multiplier grows; this only reparametrizes
/// the learning rate and leaves each round's loss definition untouched.
/// `on_round` (optional) observes the players after every round, e.g. for
/// checkpointing or parameter audits.
inline AdversarialResult adversarial_train(
    const Dataset& data, ForecasterModel forecaster, PlannerModel planner,
    const TrainConfig& cfg, const CostParams& cost_params = {},
    const std::function<void(std::uint64_t, ForecasterModel&, PlannerModel&,
                             const RoundLog&)>& on_round = nullptr) {
  cfg.check();
  AdversarialResult result{std::move(forecaster), std::move(planner), {}};
  if (cfg.rounds == 0) return result;
  if (data.records.empty())
    throw std::invalid_argument("adversarial_train: empty dataset");
  const auto refs = enumerate_contexts(data);
  if (refs.empty())
    throw std::invalid_argument("adversarial_train: dataset has no context windows");

  const double beta = cfg.effective_beta();
  diff::SgdOptimizer planner_opt{cfg.lr_planner / (1.0 + beta)};
  diff::SgdOptimizer forecaster_opt{cfg.lr_forecaster / (1.0 + cfg.lambda)};
  const MinibatchSchedule schedule(refs.size(), cfg.batch_size,
                                   mix_seed(cfg.seed, 0xadf));

  if (result.forecaster.params.step != result.planner.params.step)
    throw std::invalid_argument(
        "adversarial_train: players disagree on the round counter");

  const std::uint64_t start = result.forecaster.params.step;
  for (std::uint64_t round = start; round < start + static_cast<std::uint64_t>(cfg.rounds);
       ++round) {
    const auto batch_refs = schedule.batch_for_step(round);
    std::vector<GameSample> batch;
    batch.reserve(batch_refs.size());
    for (const std::size_t idx : batch_refs)
      batch.push_back(make_game_sample(
          window_at(data, refs[idx],
                    result.forecaster.cfg.adjacency_radius),
          result.forecaster, result.planner));

    RoundLog log;
    log.round = round;

    {
      diff::Tape tape;
      const LossBreakdown loss =
          planner_round_loss(tape, result.planner, batch, beta, cost_params);
      log.planner_loss = tape.scalar(loss.total);
      log.planner_cost_diff = loss.cost_diff;
      log.planner_nll = loss.nll;
      log.mean_plan_cost = loss.mean_plan_cost;
      if (!std::isfinite(log.planner_loss))
        throw std::runtime_error(
            "adversarial_train: non-finite planner loss at round " +
            std::to_string(round) + " (batch starts at record " +
            std::to_string(refs[batch_refs.front()].record) + ", step " +
            std::to_string(refs[batch_refs.front()].t) + ")");
      result.planner.params.zero_grads();
      tape.backward(loss.total);
      log.grad_norm_planner = result.planner.params.grad_norm();
      planner_opt.step(result.planner.params);
    }

    {
      diff::Tape tape;
      const LossBreakdown loss = forecaster_round_loss(
          tape, result.forecaster, batch, cfg.lambda, cost_params);
      log.forecaster_loss = tape.scalar(loss.total);
      log.forecaster_cost_diff = loss.cost_diff;
      log.forecaster_nll = loss.nll;
      if (!std::isfinite(log.forecaster_loss))
        throw std::runtime_error(
            "adversarial_train: non-finite forecaster loss at round " +
            std::to_string(round) + " (batch starts at record " +
            std::to_string(refs[batch_refs.front()].record) + ", step " +
            std::to_string(refs[batch_refs.front()].t) + ")");
      result.forecaster.params.zero_grads();
      tape.backward(loss.total);
      log.grad_norm_forecaster = result.forecaster.params.grad_norm();
      forecaster_opt.step(result.forecaster.params);
    }

    result.logs.push_back(log);
    if (on_round) on_round(round, result.forecaster, result.planner, log);
  }
  return result;
}

}  // namespace advnav
