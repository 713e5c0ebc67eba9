#pragma once

#include "scoreflow/datasets.hpp"
#include "scoreflow/potential_model.hpp"
#include "scoreflow/sde.hpp"

namespace scoreflow {

// Triples (t, x0, x_t) with x_t drawn from the perturbation kernel, plus the
// per-sample weight lambda(t) (likelihood weighting: g^2).
struct DsmBatch {
  VectorXd times;
  MatrixXd x0;
  MatrixXd xt;
  VectorXd lambda;

  long size() const { return times.size(); }
};

struct SmBatch {
  VectorXd times;
  MatrixXd x;
  VectorXd lambda;

  long size() const { return times.size(); }
};

// Uniform space-time collocation points on Omega x [t_low, T].
struct CollocationBatch {
  VectorXd times;
  MatrixXd x;
  double omega_lo = -2.0, omega_hi = 2.0;

  long size() const { return times.size(); }
};

DsmBatch make_dsm_batch(const Dataset& data, const SdeSpec& spec, long n, RngStream& rng,
                        double t_eps = 1e-3);
SmBatch make_sm_batch(const SdeSpec& spec, const GaussianState& p0, long n, RngStream& rng,
                      double t_eps = 1e-3);
CollocationBatch make_collocation_batch(const SdeSpec& spec, double omega_lo, double omega_hi,
                                        long n, RngStream& rng, double t_low = 0.0);

double dsm_loss(const ScoreField& score, const DsmBatch& batch, const SdeSpec& spec);
double sm_loss(const ScoreField& score, const ScoreField& truth, const SmBatch& batch);

// Signed integrand r(x,t) of the log-density Fokker-Planck equation, in the
// forward form and in the algebraically equivalent reverse-drift form.
double lfp_integrand(const PointDerivatives& u, const VectorXd& x, double t,
                     const SdeSpec& spec);
double lfp_integrand_approx_form(const PointDerivatives& u, const VectorXd& x, double t,
                                 const SdeSpec& spec);

double lfp_residual(const PotentialField& u, const CollocationBatch& batch,
                    const SdeSpec& spec);
double fp_residual(const DensityField& p, const CollocationBatch& batch, const SdeSpec& spec);
VectorXd sfp_integrand(const ScoreJet& sj, const VectorXd& x, double t, const SdeSpec& spec);
double sfp_residual(const ScoreJetField& s, const CollocationBatch& batch, const SdeSpec& spec);

double combined_loss(const PotentialModel& model, double w_R, const DsmBatch& dsm,
                     const CollocationBatch& colloc, const SdeSpec& spec);

struct CombinedLossValue {
  double dsm = 0.0;
  double residual = 0.0;
  double combined = 0.0;
};

// Loss and exact parameter gradient in one pass; grad is overwritten.
CombinedLossValue combined_loss_grad(PotentialModel& model, double w_R, const DsmBatch& dsm,
                                     const CollocationBatch& colloc, const SdeSpec& spec,
                                     VectorXd& grad);

// DSM loss and gradient for the direct score parameterisation.
double dsm_loss_grad_direct(DirectScoreModel& model, const DsmBatch& batch,
                            const SdeSpec& spec, VectorXd& grad);

// Generic parameter gradient of a scalar functional of the batch derivatives.
// The functional returns the loss value and fills per-sample cotangents.
template <class LossFn>
std::pair<double, VectorXd> loss_gradient(PotentialModel& model, const MatrixXd& x,
                                          const VectorXd& ts, LossFn&& fn) {
  PotentialModel::Cache cache;
  const BatchDerivs derivs = model.forward_full(x, ts, cache);
  BatchCotangent cot;
  const double loss = fn(derivs, cot);
  VectorXd grad = VectorXd::Zero(model.net().params().size());
  model.backward(cache, cot, grad);
  return {loss, std::move(grad)};
}

}  // namespace scoreflow
