#include "scoreflow/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace fs = std::filesystem;

namespace scoreflow {

void ExperimentConfig::validate() const {
  sde.validate();
  mlp.validate();
  train.validate();
  sampler.validate();
  if (datasets.empty() || weights.empty() || seeds.empty())
    throw std::invalid_argument("experiment: datasets, weights and seeds must be nonempty");
  if (grid_resolution < 2) throw std::invalid_argument("experiment: grid resolution too small");
  if (metric_downsample < 1 || grid_resolution % metric_downsample != 0)
    throw std::invalid_argument("experiment: metric downsample must divide the resolution");
  if (grid_clip_allowance < 0.0 || grid_clip_allowance >= 1.0)
    throw std::invalid_argument("experiment: clip allowance must lie in [0, 1)");
  if (workers < 1) throw std::invalid_argument("experiment: workers must be >= 1");
  for (double w : weights)
    if (w < 0.0) throw std::invalid_argument("experiment: weights must be nonnegative");
}

ExperimentConfig desk_preset() {
  ExperimentConfig cfg;
  cfg.mlp.hidden = {64, 64};
  cfg.train.iterations = 6000;
  cfg.train.dsm_batch = 256;
  cfg.train.colloc_batch = 256;
  cfg.sampler.n = 30000;
  cfg.sampler.steps = 400;
  return cfg;
}

ExperimentConfig paper_preset() {
  ExperimentConfig cfg;
  cfg.mlp.hidden = {80, 80};
  cfg.train.iterations = 100000;
  cfg.train.dsm_batch = 512;
  cfg.train.colloc_batch = 512;
  cfg.sampler.n = 3000000;
  cfg.sampler.steps = 1000;
  return cfg;
}

std::string cell_dir_name(const CellKey& key) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s_w%g_s%llu", key.dataset.c_str(), key.w_R,
                static_cast<unsigned long long>(key.seed));
  return buf;
}

void write_report_json(const std::string& path, const RunReport& r) {
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["w_R"] = r.w_R;
  j["seed"] = r.seed;
  j["final_dsm"] = r.final_dsm;
  j["final_residual"] = r.final_residual;
  j["heldout_residual"] = r.heldout_residual;
  j["heldout_dsm"] = r.heldout_dsm;
  j["w2sq_ode_sde"] = r.w2sq_ode_sde;
  j["w2sq_ode_data"] = r.w2sq_ode_data;
  j["w2sq_sde_data"] = r.w2sq_sde_data;
  j["ode_clip_fraction"] = r.ode_clip_fraction;
  j["sde_clip_fraction"] = r.sde_clip_fraction;
  j["checkpoint"] = r.checkpoint_path;
  j["wall_seconds"] = r.wall_seconds;
  j["failed"] = r.failed;
  j["error"] = r.error;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("report: cannot open '" + tmp + "'");
    os << j.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

RunReport read_report_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("report: cannot open '" + path + "'");
  nlohmann::json j;
  is >> j;
  RunReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.w_R = j.at("w_R").get<double>();
  r.seed = j.at("seed").get<uint64_t>();
  r.final_dsm = j.at("final_dsm").get<double>();
  r.final_residual = j.at("final_residual").get<double>();
  r.heldout_residual = j.at("heldout_residual").get<double>();
  r.heldout_dsm = j.at("heldout_dsm").get<double>();
  r.w2sq_ode_sde = j.at("w2sq_ode_sde").get<double>();
  r.w2sq_ode_data = j.at("w2sq_ode_data").get<double>();
  r.w2sq_sde_data = j.at("w2sq_sde_data").get<double>();
  r.ode_clip_fraction = j.value("ode_clip_fraction", 0.0);
  r.sde_clip_fraction = j.value("sde_clip_fraction", 0.0);
  r.checkpoint_path = j.at("checkpoint").get<std::string>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.failed = j.at("failed").get<bool>();
  r.error = j.at("error").get<std::string>();
  return r;
}

GridDistribution data_reference_grid(const ExperimentConfig& cfg, const Dataset& data) {
  return grid_from_density(
      [&](double x, double y) {
        VectorXd p(2);
        p << x, y;
        return data.density(p);
      },
      cfg.grid_resolution, cfg.omega_lo, cfg.omega_hi, cfg.density_grid_sub);
}

double metric_w2sq(const ExperimentConfig& cfg, const GridDistribution& a,
                   const GridDistribution& b) {
  if (cfg.metric_downsample > 1) {
    return w2sq_exact(measure_from_grid(downsample(a, cfg.metric_downsample)),
                      measure_from_grid(downsample(b, cfg.metric_downsample)));
  }
  return w2sq_grid(a, b, cfg.w2);
}

PotentialModel load_potential_model(const Checkpoint& ck) {
  if (ck.model_kind != "potential")
    throw std::invalid_argument("checkpoint: expected a potential model, found '" +
                                ck.model_kind + "'");
  PotentialModel model(ck.config);
  model.net().set_params(ck.params);
  return model;
}

DirectScoreModel load_direct_model(const Checkpoint& ck) {
  if (ck.model_kind != "score")
    throw std::invalid_argument("checkpoint: expected a score model, found '" + ck.model_kind +
                                "'");
  DirectScoreModel model(ck.config);
  model.net().set_params(ck.params);
  return model;
}

RunReport run_cell(const ExperimentConfig& cfg, const CellKey& key) {
  const fs::path dir = fs::path(cfg.out_dir) / "cells" / cell_dir_name(key);
  const fs::path report_path = dir / "report.json";
  if (fs::exists(report_path)) {
    RunReport cached = read_report_json(report_path.string());
    if (!cached.failed) return cached;
  }
  fs::create_directories(dir);

  RunReport report;
  report.dataset = key.dataset;
  report.w_R = key.w_R;
  report.seed = key.seed;
  const auto t0 = std::chrono::steady_clock::now();

  try {
    const Dataset data(DatasetSpec::by_name(key.dataset));
    TrainConfig tc = cfg.train;
    tc.w_R = key.w_R;
    tc.seed = mix_seed(key.seed, std::hash<std::string>{}(key.dataset));
    tc.omega_lo = cfg.omega_lo;
    tc.omega_hi = cfg.omega_hi;

    PotentialModel model(cfg.mlp);
    model.net().init(mix_seed(tc.seed, 0xA11CEuLL));
    AdamState adam = AdamState::zeros(model.net().params().size());

    TrainResult tr;
    try {
      tr = train(model, adam, tc, data, cfg.sde);
    } catch (const TrainingDiverged& e) {
      save_checkpoint((dir / "last_good.ckpt").string(), e.last_good);
      throw;
    }
    if (!tr.trace.empty()) {
      report.final_dsm = tr.trace.back().dsm;
      report.final_residual = tr.trace.back().lfp_residual;
    }
    write_trace_csv((dir / "trace.csv").string(), tr.trace);

    Checkpoint ck;
    ck.model_kind = "potential";
    ck.config = cfg.mlp;
    ck.seed = tc.seed;
    ck.iteration = tr.iterations_done;
    ck.params = model.net().params();
    report.checkpoint_path = (dir / "model.ckpt").string();
    save_checkpoint(report.checkpoint_path, ck);

    // held-out diagnostics, common random numbers across all cells
    {
      RngStream eval_rng(cfg.eval_seed);
      const CollocationBatch colloc = make_collocation_batch(
          cfg.sde, cfg.omega_lo, cfg.omega_hi, cfg.heldout_colloc, eval_rng, 0.0);
      report.heldout_residual = lfp_residual(model, colloc, cfg.sde);
      RngStream dsm_rng(mix_seed(cfg.eval_seed, std::hash<std::string>{}(key.dataset)));
      const DsmBatch dsm =
          make_dsm_batch(data, cfg.sde, cfg.heldout_dsm, dsm_rng, cfg.train.t_eps);
      const PotentialScore score(model);
      report.heldout_dsm = dsm_loss(score, dsm, cfg.sde);
    }

    // samples and grids
    const PotentialScore score(model);
    SamplerConfig sc = cfg.sampler;
    sc.seed = mix_seed(tc.seed, 0x5DE5uLL);
    const SampleBatch ode = sample_ode(score, cfg.sde, sc);
    const SampleBatch sde = sample_reverse_sde(score, cfg.sde, sc);
    const GridDistribution grid_ode = grid_histogram(
        ode.points, cfg.grid_resolution, cfg.omega_lo, cfg.omega_hi, cfg.grid_clip_allowance);
    const GridDistribution grid_sde = grid_histogram(
        sde.points, cfg.grid_resolution, cfg.omega_lo, cfg.omega_hi, cfg.grid_clip_allowance);
    report.ode_clip_fraction =
        static_cast<double>(grid_ode.out_of_domain) / std::max<long>(1, grid_ode.total_samples);
    report.sde_clip_fraction =
        static_cast<double>(grid_sde.out_of_domain) / std::max<long>(1, grid_sde.total_samples);
    write_grid_csv((dir / "grid_ode.csv").string(), grid_ode);
    write_grid_csv((dir / "grid_sde.csv").string(), grid_sde);
    write_grid_pgm((dir / "grid_ode.pgm").string(), grid_ode);
    write_grid_pgm((dir / "grid_sde.pgm").string(), grid_sde);

    const GridDistribution grid_data = data_reference_grid(cfg, data);
    report.w2sq_ode_sde = metric_w2sq(cfg, grid_ode, grid_sde);
    report.w2sq_ode_data = metric_w2sq(cfg, grid_ode, grid_data);
    report.w2sq_sde_data = metric_w2sq(cfg, grid_sde, grid_data);
  } catch (const std::exception& e) {
    report.failed = true;
    report.error = e.what();
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_report_json(report_path.string(), report);
  return report;
}

ReproduceResult run_reproduction(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(fs::path(cfg.out_dir) / "cells");

  std::vector<CellKey> keys;
  for (const auto& ds : cfg.datasets)
    for (double w : cfg.weights)
      for (uint64_t s : cfg.seeds) keys.push_back({ds, w, s});

  std::vector<RunReport> runs(keys.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= keys.size()) return;
      runs[i] = run_cell(cfg, keys[i]);
    }
  };
  std::vector<std::thread> pool;
  const int nw = std::min<int>(cfg.workers, static_cast<int>(keys.size()));
  for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  ReproduceResult result;
  result.runs = std::move(runs);
  for (const auto& r : result.runs)
    if (r.failed) ++result.failures;
  write_aggregates(cfg, result.runs);
  return result;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::map<std::pair<std::string, double>, TableCell> aggregate_medians(
    const ExperimentConfig& cfg, const std::vector<RunReport>& runs) {
  std::map<std::pair<std::string, double>, TableCell> table;
  for (const auto& ds : cfg.datasets) {
    for (double w : cfg.weights) {
      std::vector<double> ode_sde, ode_data, sde_data, resid, dsm;
      for (const auto& r : runs) {
        if (r.failed || r.dataset != ds || r.w_R != w) continue;
        ode_sde.push_back(r.w2sq_ode_sde);
        ode_data.push_back(r.w2sq_ode_data);
        sde_data.push_back(r.w2sq_sde_data);
        resid.push_back(r.heldout_residual);
        dsm.push_back(r.heldout_dsm);
      }
      TableCell cell;
      cell.runs = static_cast<int>(ode_sde.size());
      cell.w2sq_ode_sde = median(ode_sde);
      cell.w2sq_ode_data = median(ode_data);
      cell.w2sq_sde_data = median(sde_data);
      cell.residual = median(resid);
      cell.dsm = median(dsm);
      table[{ds, w}] = cell;
    }
  }
  for (const auto& ds : cfg.datasets) {
    const double base = table.count({ds, 0.0}) ? table[{ds, 0.0}].dsm
                                               : std::numeric_limits<double>::quiet_NaN();
    for (double w : cfg.weights) table[{ds, w}].dsm_normalized = table[{ds, w}].dsm / base;
  }
  return table;
}

void write_aggregates(const ExperimentConfig& cfg, const std::vector<RunReport>& runs) {
  const auto table = aggregate_medians(cfg, runs);
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);

  auto write_table = [&](const std::string& name, auto member) {
    std::ofstream os(out / name, std::ios::trunc);
    os << "w_R";
    for (const auto& ds : cfg.datasets) os << "," << ds;
    os << "\n";
    char buf[64];
    for (double w : cfg.weights) {
      std::snprintf(buf, sizeof(buf), "%g", w);
      os << buf;
      for (const auto& ds : cfg.datasets) {
        std::snprintf(buf, sizeof(buf), "%.6g", table.at({ds, w}).*member);
        os << "," << buf;
      }
      os << "\n";
    }
  };
  write_table("table1_w2sq_ode_sde.csv", &TableCell::w2sq_ode_sde);
  write_table("table2_w2sq_ode_data.csv", &TableCell::w2sq_ode_data);
  write_table("table3_w2sq_sde_data.csv", &TableCell::w2sq_sde_data);

  {
    std::ofstream os(out / "scatter_residual_vs_w2.csv", std::ios::trunc);
    os << "dataset,w_R,residual,w2_ode_sde\n";
    char buf[160];
    for (const auto& ds : cfg.datasets)
      for (double w : cfg.weights) {
        const auto& c = table.at({ds, w});
        std::snprintf(buf, sizeof(buf), "%s,%g,%.6g,%.6g\n", ds.c_str(), w, c.residual,
                      std::sqrt(std::max(0.0, c.w2sq_ode_sde)));
        os << buf;
      }
  }
  {
    std::ofstream os(out / "scatter_residual_vs_dsm.csv", std::ios::trunc);
    os << "dataset,w_R,residual,dsm_normalized\n";
    char buf[160];
    for (const auto& ds : cfg.datasets)
      for (double w : cfg.weights) {
        const auto& c = table.at({ds, w});
        std::snprintf(buf, sizeof(buf), "%s,%g,%.6g,%.6g\n", ds.c_str(), w, c.residual,
                      c.dsm_normalized);
        os << buf;
      }
  }
}

}  // namespace scoreflow
