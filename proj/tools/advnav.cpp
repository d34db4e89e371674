// advnav: data generation, ingestion, training and evaluation for
// game-theoretic joint forecasting and planning in crowd navigation.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advnav/cli/config.hpp"
#include "advnav/cli/pipeline.hpp"
#include "advnav/core/dataset_io.hpp"
#include "advnav/core/ethucy.hpp"

namespace fs = std::filesystem;
using namespace advnav;

namespace {

std::uint64_t env_default_seed(std::uint64_t fallback) {
  if (const char* env = std::getenv("ADVNAV_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::runtime_error("ADVNAV_SEED is not an integer: '" +
                               std::string(env) + "'");
    }
  }
  return fallback;
}

RunConfig load_run_config(const std::string& config_path) {
  RunConfig cfg;
  cfg.train.seed = env_default_seed(0);
  if (!config_path.empty()) {
    RunConfig from_file = load_config(config_path);
    // File values win over the env fallback; the env seed only applies when
    // the file does not set train.seed.
    const std::uint64_t env_seed = cfg.train.seed;
    cfg = from_file;
    RunConfig defaults;
    if (cfg.train.seed == defaults.train.seed) cfg.train.seed = env_seed;
  }
  return cfg;
}

int cmd_gen_data(const std::string& config_path, int episodes,
                 std::uint64_t seed, const std::string& out,
                 const std::string& split_tag, int jobs) {
  if (episodes < 1) throw std::runtime_error("episodes must be >= 1");
  RunConfig cfg = load_run_config(config_path);
  cfg.sim.check();

  GenSummary summary;
  Dataset d = generate_dataset(cfg.sim, seed, episodes, split_tag, jobs, &summary);
  nlohmann::json provenance;
  provenance["config"] = cfg.to_json();
  provenance["base_seed"] = seed;
  provenance["episodes"] = episodes;
  d.provenance = provenance.dump();
  write_dataset(d, out);

  std::cout << "episodes=" << summary.episodes
            << " contexts=" << summary.contexts << " expert_collision_rate="
            << fmt_double(summary.expert_collision_rate) << "\n";
  return 0;
}

int cmd_ingest(const std::string& input, const std::string& format,
               const std::string& out, const std::string& config_path) {
  if (format != "ethucy")
    throw std::runtime_error("ingest: unsupported --format '" + format +
                             "' (expected ethucy)");
  RunConfig cfg = load_run_config(config_path);

  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  } else if (fs::exists(input)) {
    files.push_back(input);
  } else {
    throw std::runtime_error("ingest: input not found: " + input);
  }

  Dataset d = ingest_ethucy(files, kEthUcyHistory, kEthUcyHorizon,
                            cfg.ingest_radius);
  nlohmann::json provenance;
  provenance["config"] = cfg.to_json();
  provenance["inputs"] = nlohmann::json::array();
  for (const auto& f : files) provenance["inputs"].push_back(f.filename().string());
  d.provenance = provenance.dump();
  write_dataset(d, out);

  if (d.records.empty())
    std::cerr << "warning: no ingestible trajectories; wrote an empty dataset\n";
  std::cout << "records=" << d.records.size()
            << " contexts=" << d.num_contexts() << "\n";
  return 0;
}

int cmd_train_mle(const std::string& data_path, const std::string& config_path,
                  const std::string& out_dir, std::uint64_t* seed_override) {
  RunConfig cfg = load_run_config(config_path);
  if (seed_override) cfg.train.seed = *seed_override;
  const Dataset data = read_dataset(data_path);
  const MleResult result = run_train_mle(data, cfg, out_dir);
  std::cout << "epochs=" << result.epochs_run
            << " final_loss=" << fmt_double(result.final_loss) << "\nwrote "
            << checkpoint_path(out_dir, kTagMleForecaster).string() << "\nwrote "
            << checkpoint_path(out_dir, kTagNomPlanner).string() << "\n";
  return 0;
}

int cmd_train_adv(const std::string& data_path, const std::string& init_dir,
                  const std::string& config_path, const std::string& out_dir,
                  int* rounds_override, double* lambda_override,
                  std::uint64_t* seed_override) {
  RunConfig cfg = load_run_config(config_path);
  if (rounds_override) cfg.train.rounds = *rounds_override;
  if (lambda_override) cfg.train.lambda = *lambda_override;
  if (seed_override) cfg.train.seed = *seed_override;
  const Dataset data = read_dataset(data_path);
  const TrainAdvOutcome outcome = run_train_adv(data, cfg, init_dir, out_dir);
  std::cout << (outcome.resumed ? "resumed" : "initialized from mle")
            << " rounds=[" << outcome.start_round << "," << outcome.end_round
            << ")\nwrote "
            << checkpoint_path(out_dir, kTagAdvForecaster).string() << "\nwrote "
            << checkpoint_path(out_dir, kTagSafePlanner).string() << "\n";
  return 0;
}

int cmd_eval(const std::string& data_path, const std::string& ckpt_dir,
             const std::string& out_dir, const std::string& config_path,
             int jobs) {
  RunConfig cfg = load_run_config(config_path);
  const Dataset data = read_dataset(data_path);
  run_eval(data, ckpt_dir, out_dir, cfg.cost, jobs, &std::cout);
  std::cout << "wrote " << (fs::path(out_dir) / "eval_matrix.csv").string()
            << "\nwrote " << (fs::path(out_dir) / "displacement.csv").string()
            << "\nwrote " << (fs::path(out_dir) / "report.json").string() << "\n";
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& format) {
  if (format == "json") {
    std::cout << read_file(fs::path(in_dir) / "report.json");
    return 0;
  }
  if (format != "csv")
    throw std::runtime_error("report: --format must be csv or json");

  const EvalMatrix m = matrix_from_csv(read_file(fs::path(in_dir) / "eval_matrix.csv"));
  std::cout << "cost matrix (mean scene cost | collision rate), " << std::endl;
  std::cout << std::left << std::setw(18) << "plan \\ futures";
  for (const auto& col : m.cols) std::cout << std::setw(28) << col;
  std::cout << "\n";
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    std::cout << std::left << std::setw(18) << m.rows[r];
    for (std::size_t c = 0; c < m.cols.size(); ++c) {
      const auto& cell = m.cells[r * m.cols.size() + c];
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4f | %.4f", cell.mean_cost,
                    cell.collision_rate);
      std::cout << std::setw(28) << buf;
    }
    std::cout << "\n";
  }

  std::cout << "\ndisplacement errors (m)\n";
  std::cout << std::left << std::setw(18) << "model" << std::setw(12) << "ade"
            << std::setw(12) << "fde" << "\n";
  const std::string text = read_file(fs::path(in_dir) / "displacement.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const double a = parse_double(line.substr(c1 + 1, c2 - c1 - 1));
    const double f = parse_double(line.substr(c2 + 1));
    char abuf[32], fbuf[32];
    std::snprintf(abuf, sizeof(abuf), "%.4f", a);
    std::snprintf(fbuf, sizeof(fbuf), "%.4f", f);
    std::cout << std::left << std::setw(18) << line.substr(0, c1)
              << std::setw(12) << abuf << std::setw(12) << fbuf << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint forecasting/planning for crowd navigation"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate expert demonstrations");
  std::string gen_config, gen_out, gen_split = "train";
  int gen_episodes = 5000, gen_jobs = 1;
  std::uint64_t gen_seed = 0;
  bool gen_seed_given = false;
  gen->add_option("--config", gen_config, "INI config file");
  gen->add_option("--episodes", gen_episodes, "Number of episodes");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Base episode seed");
  gen->add_option("--out", gen_out, "Output dataset file")->required();
  gen->add_option("--split-tag", gen_split, "train or test");
  gen->add_option("--jobs", gen_jobs, "Worker threads");

  // ingest
  auto* ing = app.add_subcommand("ingest", "Ingest raw trajectory files");
  std::string ing_input, ing_format = "ethucy", ing_out, ing_config;
  ing->add_option("--input", ing_input, "File or directory")->required();
  ing->add_option("--format", ing_format, "Input format (ethucy)");
  ing->add_option("--out", ing_out, "Output dataset file")->required();
  ing->add_option("--config", ing_config, "INI config file");

  // train-mle
  auto* tm = app.add_subcommand("train-mle", "MLE pretraining");
  std::string tm_data, tm_config, tm_out;
  std::uint64_t tm_seed = 0;
  tm->add_option("--data", tm_data, "Training dataset")->required();
  tm->add_option("--config", tm_config, "INI config file");
  tm->add_option("--out-dir", tm_out, "Checkpoint directory")->required();
  auto* tm_seed_opt = tm->add_option("--seed", tm_seed, "Training seed");

  // train-adv
  auto* ta = app.add_subcommand("train-adv", "Adversarial game training");
  std::string ta_data, ta_init, ta_config, ta_out;
  int ta_rounds = 0;
  double ta_lambda = 0.0;
  std::uint64_t ta_seed = 0;
  ta->add_option("--data", ta_data, "Training dataset")->required();
  ta->add_option("--init-dir", ta_init, "Directory with initial checkpoints")->required();
  ta->add_option("--config", ta_config, "INI config file");
  ta->add_option("--out-dir", ta_out, "Checkpoint directory")->required();
  auto* ta_rounds_opt = ta->add_option("--rounds", ta_rounds, "Rounds this run");
  auto* ta_lambda_opt = ta->add_option("--lambda", ta_lambda, "Likelihood multiplier");
  auto* ta_seed_opt = ta->add_option("--seed", ta_seed, "Training seed");

  // eval
  auto* ev = app.add_subcommand("eval", "Held-out evaluation");
  std::string ev_data, ev_ckpt, ev_out, ev_config;
  int ev_jobs = 1;
  ev->add_option("--data", ev_data, "Test dataset")->required();
  ev->add_option("--ckpt-dir", ev_ckpt, "Checkpoint directory")->required();
  ev->add_option("--out", ev_out, "Report directory")->required();
  ev->add_option("--config", ev_config, "INI config file");
  ev->add_option("--jobs", ev_jobs, "Worker threads");

  // report
  auto* rp = app.add_subcommand("report", "Pretty-print an evaluation report");
  std::string rp_in, rp_format = "csv";
  rp->add_option("--in", rp_in, "Directory written by eval")->required();
  rp->add_option("--format", rp_format, "csv or json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      gen_seed_given = gen_seed_opt->count() > 0;
      const std::uint64_t seed =
          gen_seed_given ? gen_seed : env_default_seed(1);
      return cmd_gen_data(gen_config, gen_episodes, seed, gen_out, gen_split,
                          gen_jobs);
    }
    if (ing->parsed()) return cmd_ingest(ing_input, ing_format, ing_out, ing_config);
    if (tm->parsed()) {
      std::uint64_t s = tm_seed;
      return cmd_train_mle(tm_data, tm_config, tm_out,
                           tm_seed_opt->count() ? &s : nullptr);
    }
    if (ta->parsed()) {
      int r = ta_rounds;
      double l = ta_lambda;
      std::uint64_t s = ta_seed;
      return cmd_train_adv(ta_data, ta_init, ta_config, ta_out,
                           ta_rounds_opt->count() ? &r : nullptr,
                           ta_lambda_opt->count() ? &l : nullptr,
                           ta_seed_opt->count() ? &s : nullptr);
    }
    if (ev->parsed()) return cmd_eval(ev_data, ev_ckpt, ev_out, ev_config, ev_jobs);
    if (rp->parsed()) return cmd_report(rp_in, rp_format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
