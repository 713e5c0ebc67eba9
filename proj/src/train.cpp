#include "scoreflow/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace scoreflow {

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
  if (!(lr_start > 0.0) || !(lr_end > 0.0))
    throw std::invalid_argument("train: learning rates must be positive");
  if (lr_end > lr_start) throw std::invalid_argument("train: lr_end must not exceed lr_start");
  if (dsm_batch < 1 || colloc_batch < 1)
    throw std::invalid_argument("train: batch sizes must be >= 1");
  if (w_R < 0.0) throw std::invalid_argument("train: w_R must be nonnegative");
  if (!(omega_hi > omega_lo)) throw std::invalid_argument("train: empty domain");
}

double lr_at(const TrainConfig& cfg, long iter) {
  if (iter < 0 || iter >= cfg.iterations) throw std::domain_error("lr_at: iteration out of range");
  if (cfg.iterations == 1) return cfg.lr_start;
  const double frac = static_cast<double>(iter) / static_cast<double>(cfg.iterations - 1);
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
}

void adam_step(VectorXd& theta, const VectorXd& grad, AdamState& state, double lr,
               const TrainConfig& cfg) {
  if (grad.size() != theta.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size())
    throw std::invalid_argument("adam: shape mismatch");
  if (!grad.allFinite()) throw std::runtime_error("adam: non-finite gradient");
  state.step += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  theta.array() -= lr * (state.m.array() / bc1) /
                   ((state.v.array() / bc2).sqrt() + cfg.eps_adam);
}

namespace {

template <class StepFn, class SnapshotFn>
TrainResult train_loop(const TrainConfig& cfg, long start_iteration, long stop_iteration,
                       StepFn&& do_step, SnapshotFn&& snapshot) {
  TrainResult result;
  const long stop = stop_iteration < 0 ? cfg.iterations : stop_iteration;
  for (long iter = start_iteration; iter < stop; ++iter) {
    const double lr = lr_at(cfg, iter);
    RngStream rng(mix_seed(cfg.seed, static_cast<uint64_t>(iter)));
    TraceRow row;
    try {
      row = do_step(iter, lr, rng);
    } catch (const std::runtime_error& e) {
      throw TrainingDiverged(
          std::string("training aborted at iteration ") + std::to_string(iter) + ": " + e.what(),
          snapshot(iter));
    }
    if (!std::isfinite(row.combined) || row.combined > cfg.divergence_threshold)
      throw TrainingDiverged("training diverged at iteration " + std::to_string(iter) +
                                 " (loss " + std::to_string(row.combined) + ")",
                             snapshot(iter));
    if (iter % cfg.record_every == 0 || iter == stop - 1) result.trace.push_back(row);
    result.iterations_done = iter + 1;
  }
  return result;
}

}  // namespace

TrainResult train(PotentialModel& model, AdamState& adam, const TrainConfig& cfg,
                  const Dataset& data, const SdeSpec& spec, long start_iteration,
                  long stop_iteration) {
  cfg.validate();
  spec.validate();
  VectorXd grad;
  auto step = [&](long iter, double lr, RngStream& rng) {
    const DsmBatch dsm = make_dsm_batch(data, spec, cfg.dsm_batch, rng, cfg.t_eps);
    const CollocationBatch colloc =
        make_collocation_batch(spec, cfg.omega_lo, cfg.omega_hi, cfg.colloc_batch, rng, 0.0);
    const CombinedLossValue loss =
        combined_loss_grad(model, cfg.w_R, dsm, colloc, spec, grad);
    adam_step(model.net().params(), grad, adam, lr, cfg);
    return TraceRow{iter, lr, loss.dsm, loss.residual, loss.combined};
  };
  auto snapshot = [&](long iter) {
    Checkpoint ck;
    ck.model_kind = "potential";
    ck.config = model.net().config();
    ck.seed = cfg.seed;
    ck.iteration = iter;
    ck.params = model.net().params();
    ck.has_adam = true;
    ck.adam_m = adam.m;
    ck.adam_v = adam.v;
    ck.adam_step = adam.step;
    return ck;
  };
  return train_loop(cfg, start_iteration, stop_iteration, step, snapshot);
}

TrainResult train_direct(DirectScoreModel& model, AdamState& adam, const TrainConfig& cfg,
                         const Dataset& data, const SdeSpec& spec, long start_iteration,
                         long stop_iteration) {
  cfg.validate();
  spec.validate();
  VectorXd grad;
  auto step = [&](long iter, double lr, RngStream& rng) {
    const DsmBatch dsm = make_dsm_batch(data, spec, cfg.dsm_batch, rng, cfg.t_eps);
    const double loss = dsm_loss_grad_direct(model, dsm, spec, grad);
    adam_step(model.net().params(), grad, adam, lr, cfg);
    return TraceRow{iter, lr, loss, 0.0, loss};
  };
  auto snapshot = [&](long iter) {
    Checkpoint ck;
    ck.model_kind = "score";
    ck.config = model.net().config();
    ck.seed = cfg.seed;
    ck.iteration = iter;
    ck.params = model.net().params();
    ck.has_adam = true;
    ck.adam_m = adam.m;
    ck.adam_v = adam.v;
    ck.adam_step = adam.step;
    return ck;
  };
  return train_loop(cfg, start_iteration, stop_iteration, step, snapshot);
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("trace: cannot open '" + path + "'");
  os << "iteration,lr,dsm_loss,lfp_residual,combined_loss\n";
  char buf[256];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.lr, r.dsm,
                  r.lfp_residual, r.combined);
    os << buf;
  }
}

}  // namespace scoreflow
