#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scoreflow/checkpoint.hpp"
#include "scoreflow/losses.hpp"

namespace scoreflow {

struct TrainConfig {
  long iterations = 20000;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  long dsm_batch = 512;
  long colloc_batch = 512;
  double w_R = 0.0;
  uint64_t seed = 1;
  double t_eps = 1e-3;       // DSM time cutoff; collocation uses t_low = 0
  double omega_lo = -2.0, omega_hi = 2.0;
  long record_every = 100;
  double divergence_threshold = 1e6;

  void validate() const;
};

struct AdamState {
  VectorXd m, v;
  long step = 0;

  static AdamState zeros(long n) { return {VectorXd::Zero(n), VectorXd::Zero(n), 0}; }
};

// Log-linear decay from lr_start at iter 0 to lr_end at the last iteration.
double lr_at(const TrainConfig& cfg, long iter);

void adam_step(VectorXd& theta, const VectorXd& grad, AdamState& state, double lr,
               const TrainConfig& cfg);

struct TraceRow {
  long iteration = 0;
  double lr = 0.0, dsm = 0.0, lfp_residual = 0.0, combined = 0.0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  long iterations_done = 0;
  bool diverged = false;
  std::string error;
};

// Raised when the loss blows up; carries the last finite parameters.
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(const std::string& msg, Checkpoint last)
      : std::runtime_error(msg), last_good(std::move(last)) {}
  Checkpoint last_good;
};

// Minimizes L_DSM + w_R * residual with Adam. Deterministic for fixed
// (seed, config, dataset): per-iteration batches come from a seed-derived
// stream so a resumed run replays the identical trajectory.
TrainResult train(PotentialModel& model, AdamState& adam, const TrainConfig& cfg,
                  const Dataset& data, const SdeSpec& spec, long start_iteration = 0,
                  long stop_iteration = -1);

// DSM-only training for the direct score parameterisation.
TrainResult train_direct(DirectScoreModel& model, AdamState& adam, const TrainConfig& cfg,
                         const Dataset& data, const SdeSpec& spec, long start_iteration = 0,
                         long stop_iteration = -1);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

}  // namespace scoreflow
