#pragma once

#include <map>
#include <string>
#include <vector>

#include "scoreflow/samplers.hpp"
#include "scoreflow/train.hpp"
#include "scoreflow/wasserstein.hpp"

namespace scoreflow {

struct ExperimentConfig {
  SdeSpec sde;
  MlpConfig mlp;
  TrainConfig train;
  SamplerConfig sampler;

  double omega_lo = -2.0, omega_hi = 2.0;
  int grid_resolution = 64;
  // Table metrics use the exact solver on grids coarsened by this factor;
  // 1 switches the pipeline to Sinkhorn on the native grid.
  int metric_downsample = 2;
  int density_grid_sub = 16;
  // Desk-scale w_R = 0 models push part of the ODE mass outside Omega; the
  // harness clips it to boundary cells and records the fraction per run.
  double grid_clip_allowance = 0.25;
  SinkhornOptions w2;

  std::vector<std::string> datasets = {"mixture", "circles", "checkerboard"};
  std::vector<double> weights = {0.0, 0.1, 1.0, 10.0};
  std::vector<uint64_t> seeds = {1, 2, 3};
  int workers = 2;
  std::string out_dir = "out";
  long heldout_colloc = 4096;
  long heldout_dsm = 8192;
  uint64_t eval_seed = 9001;

  void validate() const;
};

ExperimentConfig desk_preset();
ExperimentConfig paper_preset();

struct RunReport {
  std::string dataset;
  double w_R = 0.0;
  uint64_t seed = 0;
  double final_dsm = 0.0;
  double final_residual = 0.0;
  double heldout_residual = 0.0;
  double heldout_dsm = 0.0;
  double w2sq_ode_sde = 0.0;
  double w2sq_ode_data = 0.0;
  double w2sq_sde_data = 0.0;
  double ode_clip_fraction = 0.0;
  double sde_clip_fraction = 0.0;
  std::string checkpoint_path;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct CellKey {
  std::string dataset;
  double w_R = 0.0;
  uint64_t seed = 0;
};

std::string cell_dir_name(const CellKey& key);
void write_report_json(const std::string& path, const RunReport& report);
RunReport read_report_json(const std::string& path);

// Reference discretisation of the data distribution.
GridDistribution data_reference_grid(const ExperimentConfig& cfg, const Dataset& data);

// Squared W2 between grids under the experiment's metric settings.
double metric_w2sq(const ExperimentConfig& cfg, const GridDistribution& a,
                   const GridDistribution& b);

// Train + sample + measure one grid cell; reuses a completed cell on disk.
RunReport run_cell(const ExperimentConfig& cfg, const CellKey& key);

struct ReproduceResult {
  std::vector<RunReport> runs;
  int failures = 0;
};

// Full datasets x weights x seeds grid with a small worker pool. Failed cells
// are recorded and the rest of the grid still completes.
ReproduceResult run_reproduction(const ExperimentConfig& cfg);

struct TableCell {
  double w2sq_ode_sde = 0.0;
  double w2sq_ode_data = 0.0;
  double w2sq_sde_data = 0.0;
  double ode_clip_fraction = 0.0;
  double sde_clip_fraction = 0.0;
  double residual = 0.0;
  double dsm = 0.0;
  double dsm_normalized = 0.0;
  int runs = 0;
};

// Median over seeds per (dataset, w_R); DSM normalized by the dataset's
// w_R = 0 median.
std::map<std::pair<std::string, double>, TableCell> aggregate_medians(
    const ExperimentConfig& cfg, const std::vector<RunReport>& runs);

void write_aggregates(const ExperimentConfig& cfg, const std::vector<RunReport>& runs);

// Checkpoint adapters.
PotentialModel load_potential_model(const Checkpoint& ck);
DirectScoreModel load_direct_model(const Checkpoint& ck);

}  // namespace scoreflow
