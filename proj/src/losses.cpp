#include "scoreflow/losses.hpp"

#include <cmath>

namespace scoreflow {

DsmBatch make_dsm_batch(const Dataset& data, const SdeSpec& spec, long n, RngStream& rng,
                        double t_eps) {
  if (n < 1) throw std::invalid_argument("dsm batch: empty");
  DsmBatch b;
  b.times.resize(n);
  for (long i = 0; i < n; ++i) b.times(i) = rng.uniform(t_eps, spec.horizon);
  b.x0 = data.sample(n, rng);
  b.xt.resize(spec.dimension, n);
  b.lambda.resize(n);
  for (long i = 0; i < n; ++i) {
    const double t = b.times(i);
    const double sd = std::sqrt(ou_kernel_variance(spec, t));
    for (int k = 0; k < spec.dimension; ++k)
      b.xt(k, i) = b.x0(k, i) * ou_mean_decay(t) + sd * rng.normal();
    b.lambda(i) = spec.g2(t);
  }
  return b;
}

SmBatch make_sm_batch(const SdeSpec& spec, const GaussianState& p0, long n, RngStream& rng,
                      double t_eps) {
  SmBatch b;
  b.times.resize(n);
  b.x.resize(spec.dimension, n);
  b.lambda.resize(n);
  for (long i = 0; i < n; ++i) {
    const double t = rng.uniform(t_eps, spec.horizon);
    const GaussianState gs = gaussian_evolution(spec, p0, t);
    const MatrixXd L = gs.cov.llt().matrixL();
    VectorXd z(spec.dimension);
    for (int k = 0; k < spec.dimension; ++k) z(k) = rng.normal();
    b.times(i) = t;
    b.x.col(i) = gs.mean + L * z;
    b.lambda(i) = spec.g2(t);
  }
  return b;
}

CollocationBatch make_collocation_batch(const SdeSpec& spec, double omega_lo, double omega_hi,
                                        long n, RngStream& rng, double t_low) {
  if (n < 1) throw std::invalid_argument("collocation batch: empty");
  CollocationBatch b;
  b.omega_lo = omega_lo;
  b.omega_hi = omega_hi;
  b.times.resize(n);
  b.x.resize(spec.dimension, n);
  for (long i = 0; i < n; ++i) {
    b.times(i) = rng.uniform(t_low, spec.horizon);
    for (int k = 0; k < spec.dimension; ++k) b.x(k, i) = rng.uniform(omega_lo, omega_hi);
  }
  return b;
}

double dsm_loss(const ScoreField& score, const DsmBatch& batch, const SdeSpec& spec) {
  if (batch.size() == 0) throw std::invalid_argument("dsm loss: empty batch");
  double total = 0.0;
  for (long i = 0; i < batch.size(); ++i) {
    const VectorXd target = kernel_score(spec, batch.xt.col(i), batch.x0.col(i), batch.times(i));
    const VectorXd s = score.eval_one(batch.xt.col(i), batch.times(i));
    total += batch.lambda(i) * (target - s).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

double sm_loss(const ScoreField& score, const ScoreField& truth, const SmBatch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("sm loss: empty batch");
  double total = 0.0;
  for (long i = 0; i < batch.size(); ++i) {
    const VectorXd target = truth.eval_one(batch.x.col(i), batch.times(i));
    const VectorXd s = score.eval_one(batch.x.col(i), batch.times(i));
    total += batch.lambda(i) * (target - s).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

double lfp_integrand(const PointDerivatives& u, const VectorXd& x, double t,
                     const SdeSpec& spec) {
  const VectorXd f = -x;
  const double div_f = -static_cast<double>(x.size());
  const double g2 = spec.g2(t);
  return u.time_deriv + div_f + u.grad.dot(f) - 0.5 * g2 * u.grad.squaredNorm() -
         0.5 * g2 * u.laplacian;
}

double lfp_integrand_approx_form(const PointDerivatives& u, const VectorXd& x, double t,
                                 const SdeSpec& spec) {
  const double g2 = spec.g2(t);
  const VectorXd f_sde = -x - g2 * u.grad;
  const double div_f_sde = -static_cast<double>(x.size()) - g2 * u.laplacian;
  return u.time_deriv + div_f_sde + u.grad.dot(f_sde) + 0.5 * g2 * u.grad.squaredNorm() +
         0.5 * g2 * u.laplacian;
}

double lfp_residual(const PotentialField& u, const CollocationBatch& batch,
                    const SdeSpec& spec) {
  if (batch.size() == 0) throw std::invalid_argument("lfp residual: empty batch");
  double total = 0.0;
  for (long i = 0; i < batch.size(); ++i) {
    const PointDerivatives pd = u.derivs(batch.x.col(i), batch.times(i));
    if (!pd.all_finite()) throw std::runtime_error("lfp residual: non-finite derivatives");
    const double r = lfp_integrand(pd, batch.x.col(i), batch.times(i), spec);
    total += r * r;
  }
  return total / static_cast<double>(batch.size());
}

double fp_residual(const DensityField& p, const CollocationBatch& batch, const SdeSpec& spec) {
  if (batch.size() == 0) throw std::invalid_argument("fp residual: empty batch");
  double total = 0.0;
  for (long i = 0; i < batch.size(); ++i) {
    const VectorXd x = batch.x.col(i);
    const double t = batch.times(i);
    const DensityDerivs dd = p.density_derivs(x, t);
    // d/dt p + div(f p) - (g^2/2) lap p, with div(f p) = p div f + grad p . f
    const double div_fp = dd.value * (-static_cast<double>(x.size())) + dd.grad.dot(-x);
    const double r = dd.time_deriv + div_fp - 0.5 * spec.g2(t) * dd.laplacian;
    total += r * r;
  }
  return total / static_cast<double>(batch.size());
}

VectorXd sfp_integrand(const ScoreJet& sj, const VectorXd& x, double t, const SdeSpec& spec) {
  const double g2 = spec.g2(t);
  const VectorXd f = -x;
  // For OU: grad(div f) = 0 and (grad f) s = -s.
  return sj.time_deriv + sj.jac * f + (-sj.s) - g2 * (sj.jac * sj.s) - 0.5 * g2 * sj.grad_div;
}

double sfp_residual(const ScoreJetField& s, const CollocationBatch& batch,
                    const SdeSpec& spec) {
  if (batch.size() == 0) throw std::invalid_argument("sfp residual: empty batch");
  double total = 0.0;
  for (long i = 0; i < batch.size(); ++i) {
    const ScoreJet sj = s.jet(batch.x.col(i), batch.times(i));
    total += sfp_integrand(sj, batch.x.col(i), batch.times(i), spec).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

double combined_loss(const PotentialModel& model, double w_R, const DsmBatch& dsm,
                     const CollocationBatch& colloc, const SdeSpec& spec) {
  if (w_R < 0.0) throw std::invalid_argument("combined loss: w_R must be nonnegative");
  const PotentialScore score(model);
  const double l_dsm = dsm_loss(score, dsm, spec);
  const double r = lfp_residual(model, colloc, spec);
  return l_dsm + w_R * r;
}

CombinedLossValue combined_loss_grad(PotentialModel& model, double w_R, const DsmBatch& dsm,
                                     const CollocationBatch& colloc, const SdeSpec& spec,
                                     VectorXd& grad) {
  if (w_R < 0.0) throw std::invalid_argument("combined loss: w_R must be nonnegative");
  grad.setZero(model.net().params().size());
  CombinedLossValue out;

  // DSM term: mean lambda ||kernel score - grad phi||^2.
  {
    const long B = dsm.size();
    PotentialModel::Cache cache;
    const MatrixXd g = model.forward_grad(dsm.xt, dsm.times, cache);
    MatrixXd target(g.rows(), B);
    for (long i = 0; i < B; ++i)
      target.col(i) = kernel_score(spec, dsm.xt.col(i), dsm.x0.col(i), dsm.times(i));
    const MatrixXd diff = g - target;
    double total = 0.0;
    for (long i = 0; i < B; ++i) total += dsm.lambda(i) * diff.col(i).squaredNorm();
    out.dsm = total / static_cast<double>(B);

    BatchCotangent cot;
    cot.grad = diff * (2.0 / static_cast<double>(B));
    for (long i = 0; i < B; ++i) cot.grad.col(i) *= dsm.lambda(i);
    model.backward(cache, cot, grad);
  }

  // Residual term: mean r^2 over collocation points. The value is computed
  // even at w_R = 0 so traces always carry it.
  {
    const long B = colloc.size();
    PotentialModel::Cache cache;
    const BatchDerivs bd = model.forward_full(colloc.x, colloc.times, cache);
    VectorXd r(B);
    for (long i = 0; i < B; ++i) {
      PointDerivatives pd;
      pd.value = bd.value(i);
      pd.grad = bd.grad.col(i);
      pd.laplacian = bd.laplacian(i);
      pd.time_deriv = bd.time_deriv(i);
      r(i) = lfp_integrand(pd, colloc.x.col(i), colloc.times(i), spec);
    }
    out.residual = r.squaredNorm() / static_cast<double>(B);

    if (w_R > 0.0) {
      const double scale = 2.0 * w_R / static_cast<double>(B);
      BatchCotangent cot;
      cot.time_deriv = scale * r;
      cot.laplacian.resize(B);
      cot.grad.resize(bd.grad.rows(), B);
      for (long i = 0; i < B; ++i) {
        const double g2 = spec.g2(colloc.times(i));
        cot.laplacian(i) = -0.5 * g2 * scale * r(i);
        cot.grad.col(i) = scale * r(i) * (-colloc.x.col(i) - g2 * bd.grad.col(i));
      }
      model.backward(cache, cot, grad);
    }
  }

  out.combined = out.dsm + w_R * out.residual;
  return out;
}

double dsm_loss_grad_direct(DirectScoreModel& model, const DsmBatch& batch,
                            const SdeSpec& spec, VectorXd& grad) {
  const long B = batch.size();
  grad.setZero(model.net().params().size());
  DirectScoreModel::Cache cache;
  const MatrixXd s = model.forward(batch.xt, batch.times, cache);
  MatrixXd diff(s.rows(), B);
  double total = 0.0;
  for (long i = 0; i < B; ++i) {
    diff.col(i) =
        s.col(i) - kernel_score(spec, batch.xt.col(i), batch.x0.col(i), batch.times(i));
    total += batch.lambda(i) * diff.col(i).squaredNorm();
    diff.col(i) *= 2.0 * batch.lambda(i) / static_cast<double>(B);
  }
  model.backward(cache, diff, grad);
  return total / static_cast<double>(B);
}

}  // namespace scoreflow
