// Command-line entry point: train models, draw samples, run diagnostics,
// and reproduce the full experiment grid.
//
// Exit codes: 0 success, 1 configuration error, 2 numeric failure,
// 3 partial grid failure.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scoreflow/config.hpp"

namespace fs = std::filesystem;
using namespace scoreflow;

namespace {

struct CommonArgs {
  std::string preset = "desk";
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--preset", args.preset, "scale preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--config", args.config_path, "flat key=value config file");
  cmd->add_option("--set", args.sets, "override, e.g. --set train.w_R=1")->take_all();
  cmd->add_option("--out", args.out_dir, "output directory");
}

ExperimentConfig build_config(const CommonArgs& args) {
  ExperimentConfig cfg = make_config(args.preset, args.config_path, args.sets);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

int cmd_train(const CommonArgs& args, const std::string& dataset, double w_R, uint64_t seed) {
  ExperimentConfig cfg = build_config(args);
  if (dataset.empty())
    throw ConfigError("config: missing required key 'train.dataset' (or --data)");
  CellKey key{dataset, w_R, seed};
  fs::create_directories(cfg.out_dir);
  const RunReport report = run_cell(cfg, key);
  if (report.failed) {
    std::fprintf(stderr, "training failed: %s\n", report.error.c_str());
    return 2;
  }
  std::printf("dataset=%s w_R=%g seed=%llu\n", report.dataset.c_str(), report.w_R,
              static_cast<unsigned long long>(report.seed));
  std::printf("final_dsm=%.6g heldout_residual=%.6g\n", report.final_dsm,
              report.heldout_residual);
  std::printf("w2sq_ode_sde=%.6g w2sq_ode_data=%.6g w2sq_sde_data=%.6g\n", report.w2sq_ode_sde,
              report.w2sq_ode_data, report.w2sq_sde_data);
  std::printf("checkpoint=%s\n", report.checkpoint_path.c_str());
  return 0;
}

int cmd_reproduce(const CommonArgs& args) {
  ExperimentConfig cfg = build_config(args);
  const ReproduceResult result = run_reproduction(cfg);
  std::printf("grid complete: %zu runs, %d failures\n", result.runs.size(), result.failures);
  std::printf("tables and scatter data written to %s\n", cfg.out_dir.c_str());
  return result.failures == 0 ? 0 : 3;
}

int cmd_sample(const CommonArgs& args, const std::string& ckpt_path, const std::string& kind,
               long n, int steps, uint64_t seed) {
  ExperimentConfig cfg = build_config(args);
  const Checkpoint ck = load_checkpoint(ckpt_path);
  SamplerConfig sc = cfg.sampler;
  if (n > 0) sc.n = n;
  if (steps > 0) sc.steps = steps;
  sc.seed = seed;
  sc.validate();

  SampleBatch batch;
  if (ck.model_kind == "potential") {
    const PotentialModel model = load_potential_model(ck);
    const PotentialScore score(model);
    batch = kind == "ode" ? sample_ode(score, cfg.sde, sc)
                          : sample_reverse_sde(score, cfg.sde, sc);
  } else {
    const DirectScoreModel model = load_direct_model(ck);
    const DirectScoreField score(model);
    batch = kind == "ode" ? sample_ode(score, cfg.sde, sc)
                          : sample_reverse_sde(score, cfg.sde, sc);
  }

  const fs::path out(cfg.out_dir.empty() ? "." : cfg.out_dir);
  fs::create_directories(out);
  write_samples_csv((out / (kind + "_samples.csv")).string(), batch);
  const GridDistribution grid = grid_histogram(batch.points, cfg.grid_resolution, cfg.omega_lo,
                                               cfg.omega_hi, cfg.grid_clip_allowance);
  write_grid_csv((out / (kind + "_grid.csv")).string(), grid);
  write_grid_pgm((out / (kind + "_grid.pgm")).string(), grid);
  std::printf("wrote %ld samples and a %dx%d grid under %s\n", batch.size(),
              cfg.grid_resolution, cfg.grid_resolution, out.string().c_str());
  return 0;
}

int cmd_diagnose(const CommonArgs& args, const std::string& ckpt_path,
                 const std::string& builtin, const std::string& which, long points,
                 uint64_t seed) {
  ExperimentConfig cfg = build_config(args);
  const fs::path out(cfg.out_dir.empty() ? "." : cfg.out_dir);
  fs::create_directories(out);

  // assemble the model under diagnosis
  std::unique_ptr<PotentialModel> potential;
  std::unique_ptr<DirectScoreModel> direct;
  std::unique_ptr<AnalyticGaussianPotential> analytic;
  if (!ckpt_path.empty()) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    if (ck.model_kind == "potential")
      potential = std::make_unique<PotentialModel>(load_potential_model(ck));
    else
      direct = std::make_unique<DirectScoreModel>(load_direct_model(ck));
  } else if (builtin == "stationary") {
    analytic = std::make_unique<AnalyticGaussianPotential>(cfg.sde, stationary_state(cfg.sde));
  } else if (builtin == "evolved") {
    GaussianState p0;
    p0.mean = VectorXd::Zero(2);
    p0.cov = 0.25 * MatrixXd::Identity(2, 2);
    p0.time = 0.0;
    analytic = std::make_unique<AnalyticGaussianPotential>(cfg.sde, p0);
  } else {
    throw ConfigError("config: diagnose needs --checkpoint or --builtin {stationary,evolved}");
  }

  RngStream rng(seed);
  const CollocationBatch batch =
      make_collocation_batch(cfg.sde, cfg.omega_lo, cfg.omega_hi, points, rng, 0.0);

  std::FILE* report = std::fopen((out / "diagnose.csv").string().c_str(), "w");
  if (!report) throw std::runtime_error("diagnose: cannot open report file");
  std::fprintf(report, "which,value\n");
  double value = 0.0;

  if (which == "lfp") {
    if (potential)
      value = lfp_residual(*potential, batch, cfg.sde);
    else if (analytic)
      value = lfp_residual(*analytic, batch, cfg.sde);
    else
      throw ConfigError("config: lfp diagnostic requires a potential model");
    std::printf("lfp_residual=%.12g\n", value);
  } else if (which == "fp") {
    if (potential) {
      const ExpPotentialDensity density(*potential);
      value = fp_residual(density, batch, cfg.sde);
    } else if (analytic) {
      const ExpPotentialDensity density(*analytic);
      value = fp_residual(density, batch, cfg.sde);
    } else {
      throw ConfigError("config: fp diagnostic requires a potential model");
    }
    std::printf("fp_residual=%.12g\n", value);
  } else if (which == "sfp") {
    if (potential) {
      const PotentialScoreJet jets(*potential);
      value = sfp_residual(jets, batch, cfg.sde);
    } else if (direct) {
      const DirectScoreJetField jets(*direct);
      value = sfp_residual(jets, batch, cfg.sde);
    } else if (analytic) {
      const AnalyticGaussianScoreJet jets(cfg.sde, analytic->state_at(0.0));
      value = sfp_residual(jets, batch, cfg.sde);
    }
    std::printf("sfp_residual=%.12g\n", value);
  } else if (which == "curl") {
    CurlField field;
    if (potential) {
      const PotentialScoreJet jets(*potential);
      field = curl_field(jets, 0.0, cfg.grid_resolution, cfg.omega_lo, cfg.omega_hi);
    } else if (direct) {
      const DirectScoreJetField jets(*direct);
      field = curl_field(jets, 0.0, cfg.grid_resolution, cfg.omega_lo, cfg.omega_hi);
    } else {
      throw ConfigError("config: curl diagnostic requires a network model");
    }
    write_curl_csv((out / "curl.csv").string(), field);
    value = field.max_abs();
    std::printf("max_abs_curl=%.12g median_abs_curl=%.12g\n", field.max_abs(),
                field.median_abs());
  } else if (which == "loglik") {
    VectorXd x = VectorXd::Zero(2);
    if (potential) {
      const PotentialScore score(*potential);
      value = ode_loglik(score, cfg.sde, x, cfg.sampler.steps);
    } else if (analytic) {
      GaussianState p0 = analytic->state_at(0.0);
      p0.time = 0.0;
      const ExactGaussianScore score(cfg.sde, p0);
      value = ode_loglik(score, cfg.sde, x, cfg.sampler.steps);
    } else {
      throw ConfigError("config: loglik diagnostic requires a potential model");
    }
    std::printf("ode_loglik_at_origin=%.12g\n", value);
  } else {
    std::fclose(report);
    throw ConfigError("config: unknown diagnostic '" + which + "'");
  }
  std::fprintf(report, "%s,%.17g\n", which.c_str(), value);
  std::fclose(report);
  return 0;
}

int cmd_metrics(const CommonArgs& args, const std::string& grid_a, const std::string& grid_b) {
  ExperimentConfig cfg = build_config(args);
  const GridDistribution a = read_grid_csv(grid_a);
  const GridDistribution b = read_grid_csv(grid_b);
  const double w2sq = metric_w2sq(cfg, a, b);
  std::printf("w2=%.12g\nw2sq=%.12g\n", std::sqrt(std::max(0.0, w2sq)), w2sq);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"score-based diffusion laboratory: potential models with a "
               "Fokker-Planck residual regularizer"};
  app.require_subcommand(1);

  CommonArgs train_args, repro_args, sample_args, diag_args, metric_args;
  std::string dataset, ckpt, kind = "ode", builtin, which = "lfp";
  std::string grid_a, grid_b;
  double w_R = 0.0;
  uint64_t seed = 1;
  long n_samples = 0, diag_points = 1000;
  int steps = 0;

  auto* train_cmd = app.add_subcommand("train", "train one potential model");
  add_common(train_cmd, train_args);
  train_cmd->add_option("--data", dataset, "dataset: mixture|circles|checkerboard|gaussian");
  train_cmd->add_option("--w_R", w_R, "residual weight");
  train_cmd->add_option("--seed", seed, "training seed");

  auto* repro_cmd = app.add_subcommand("reproduce", "run the datasets x weights x seeds grid");
  add_common(repro_cmd, repro_args);

  auto* sample_cmd = app.add_subcommand("sample", "sample a trained model");
  add_common(sample_cmd, sample_args);
  sample_cmd->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  sample_cmd->add_option("--kind", kind, "sampler: ode|sde")
      ->check(CLI::IsMember({"ode", "sde"}));
  sample_cmd->add_option("-n", n_samples, "number of samples");
  sample_cmd->add_option("--steps", steps, "integration steps");
  sample_cmd->add_option("--seed", seed, "sampler seed");

  auto* diag_cmd = app.add_subcommand("diagnose", "residual / curl / likelihood diagnostics");
  add_common(diag_cmd, diag_args);
  diag_cmd->add_option("--checkpoint", ckpt, "model checkpoint");
  diag_cmd->add_option("--builtin", builtin, "builtin oracle: stationary|evolved");
  diag_cmd->add_option("--which", which, "diagnostic: lfp|fp|sfp|curl|loglik")
      ->check(CLI::IsMember({"lfp", "fp", "sfp", "curl", "loglik"}));
  diag_cmd->add_option("--points", diag_points, "collocation points");
  diag_cmd->add_option("--seed", seed, "collocation seed");

  auto* metrics_cmd = app.add_subcommand("metrics", "Wasserstein-2 between two grid files");
  add_common(metrics_cmd, metric_args);
  metrics_cmd->add_option("--grid-a", grid_a, "first grid csv")->required();
  metrics_cmd->add_option("--grid-b", grid_b, "second grid csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_args, dataset, w_R, seed);
    if (repro_cmd->parsed()) return cmd_reproduce(repro_args);
    if (sample_cmd->parsed())
      return cmd_sample(sample_args, ckpt, kind, n_samples, steps, seed);
    if (diag_cmd->parsed())
      return cmd_diagnose(diag_args, ckpt, builtin, which, diag_points, seed);
    if (metrics_cmd->parsed()) return cmd_metrics(metric_args, grid_a, grid_b);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }
  return 0;
}
