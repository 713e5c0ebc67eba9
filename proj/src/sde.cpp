#include "scoreflow/sde.hpp"

#include <cmath>

namespace scoreflow {

void SdeSpec::validate() const {
  if (kind != SdeKind::OrnsteinUhlenbeck)
    throw std::invalid_argument("sde: unsupported kind");
  if (dimension < 1) throw std::invalid_argument("sde: dimension must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("sde: horizon must be positive");
  if (!(diffusion > 0.0)) throw std::invalid_argument("sde: diffusion must be positive");
}

void GaussianState::validate() const {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    throw std::invalid_argument("gaussian state: shape mismatch");
  const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) throw std::invalid_argument("gaussian state: covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw std::invalid_argument("gaussian state: covariance not positive semi-definite");
}

double GaussianState::logpdf(const VectorXd& x) const {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("gaussian state: singular covariance");
  const VectorXd q = llt.matrixL().solve(x - mean);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double d = static_cast<double>(mean.size());
  return -0.5 * q.squaredNorm() - 0.5 * (d * std::log(2.0 * M_PI) + logdet);
}

VectorXd drift(const SdeSpec& spec, const VectorXd& x, double t) {
  if (t < 0.0 || t > spec.horizon) throw std::domain_error("drift: t outside [0, horizon]");
  spec.validate();
  return -x;
}

void drift_batch(const SdeSpec& spec, const MatrixXd& x, double /*t*/, MatrixXd& out) {
  (void)spec;
  out = -x;
}

double drift_divergence(const SdeSpec& spec, const VectorXd& x, double t) {
  if (t < 0.0 || t > spec.horizon) throw std::domain_error("drift: t outside [0, horizon]");
  (void)x;
  return -static_cast<double>(spec.dimension);
}

double ou_mean_decay(double t) { return std::exp(-t); }

double ou_kernel_variance(const SdeSpec& spec, double t) {
  // Solves dS/dt = -2 S + g^2 from S(0) = 0.
  return spec.g2(0.0) * 0.5 * (1.0 - std::exp(-2.0 * t));
}

double ou_stationary_variance(const SdeSpec& spec) { return spec.g2(0.0) * 0.5; }

GaussianState perturbation_kernel(const SdeSpec& spec, const VectorXd& x0, double t) {
  if (t < 0.0 || t > spec.horizon)
    throw std::domain_error("perturbation_kernel: t outside [0, horizon]");
  GaussianState gs;
  gs.mean = x0 * ou_mean_decay(t);
  gs.cov = ou_kernel_variance(spec, t) * MatrixXd::Identity(spec.dimension, spec.dimension);
  gs.time = t;
  return gs;
}

VectorXd kernel_score(const SdeSpec& spec, const VectorXd& x_t, const VectorXd& x0, double t) {
  if (!(t > 0.0)) throw std::domain_error("kernel_score: degenerate kernel at t <= 0");
  const double var = ou_kernel_variance(spec, t);
  return (x0 * ou_mean_decay(t) - x_t) / var;
}

GaussianState gaussian_evolution(const SdeSpec& spec, const GaussianState& p0, double t) {
  if (p0.time != 0.0)
    throw std::invalid_argument("gaussian_evolution: initial state must be at time 0");
  if (t < 0.0 || t > spec.horizon)
    throw std::domain_error("gaussian_evolution: t outside [0, horizon]");
  GaussianState gs;
  const double decay = ou_mean_decay(t);
  gs.mean = p0.mean * decay;
  gs.cov = p0.cov * (decay * decay) +
           ou_kernel_variance(spec, t) * MatrixXd::Identity(spec.dimension, spec.dimension);
  gs.time = t;
  return gs;
}

GaussianState stationary_state(const SdeSpec& spec, double t) {
  GaussianState gs;
  gs.mean = VectorXd::Zero(spec.dimension);
  gs.cov = ou_stationary_variance(spec) * MatrixXd::Identity(spec.dimension, spec.dimension);
  gs.time = t;
  return gs;
}

VectorXd ScoreField::eval_one(const VectorXd& x, double t) const {
  MatrixXd out;
  eval(x, t, out);
  return out.col(0);
}

void ScoreField::divergence(const MatrixXd&, double, VectorXd&) const {
  throw std::runtime_error("score field: divergence not available");
}

void ZeroScore::eval(const MatrixXd& x, double /*t*/, MatrixXd& out) const {
  out = MatrixXd::Zero(x.rows(), x.cols());
}

void ZeroScore::divergence(const MatrixXd& x, double /*t*/, VectorXd& out) const {
  out = VectorXd::Zero(x.cols());
}

void FunctionScore::eval(const MatrixXd& x, double t, MatrixXd& out) const {
  out.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) out.col(i) = fn_(x.col(i), t);
}

bool PointDerivatives::all_finite() const {
  return std::isfinite(value) && std::isfinite(laplacian) && std::isfinite(time_deriv) &&
         grad.allFinite();
}

AnalyticGaussianPotential::AnalyticGaussianPotential(SdeSpec spec, GaussianState p0)
    : spec_(std::move(spec)), p0_(std::move(p0)) {
  spec_.validate();
  p0_.validate();
}

GaussianState AnalyticGaussianPotential::state_at(double t) const {
  return gaussian_evolution(spec_, p0_, t);
}

PointDerivatives AnalyticGaussianPotential::derivs(const VectorXd& x, double t) const {
  const GaussianState gs = state_at(t);
  Eigen::LLT<MatrixXd> llt(gs.cov);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("analytic potential: singular covariance");
  const VectorXd q = x - gs.mean;
  const VectorXd sq = llt.solve(q);  // Sigma^-1 (x - mu)
  const MatrixXd sinv = llt.solve(MatrixXd::Identity(x.size(), x.size()));

  PointDerivatives pd;
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  pd.value = -0.5 * q.dot(sq) -
             0.5 * (static_cast<double>(x.size()) * std::log(2.0 * M_PI) + logdet);
  pd.grad = -sq;
  pd.laplacian = -sinv.trace();

  // d/dt of the evolved moments: mu' = -mu, Sigma' = -2 Sigma + g^2 I.
  const VectorXd mu_dot = -gs.mean;
  const MatrixXd sigma_dot =
      -2.0 * gs.cov + spec_.g2(t) * MatrixXd::Identity(x.size(), x.size());
  pd.time_deriv = -0.5 * (sinv * sigma_dot).trace() + sq.dot(mu_dot) +
                  0.5 * sq.dot(sigma_dot * sq);
  return pd;
}

VectorXd AnalyticGaussianPotential::score(const VectorXd& x, double t) const {
  const GaussianState gs = state_at(t);
  return gs.cov.llt().solve(gs.mean - x);
}

void ExactGaussianScore::eval(const MatrixXd& x, double t, MatrixXd& out) const {
  const GaussianState gs = potential_.state_at(t);
  Eigen::LLT<MatrixXd> llt(gs.cov);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("exact gaussian score: singular covariance");
  out = llt.solve((-x).colwise() + gs.mean);
}

void ExactGaussianScore::divergence(const MatrixXd& x, double t, VectorXd& out) const {
  const GaussianState gs = potential_.state_at(t);
  const MatrixXd sinv = gs.cov.llt().solve(MatrixXd::Identity(x.rows(), x.rows()));
  out = VectorXd::Constant(x.cols(), -sinv.trace());
}

VectorXd reverse_drift(const SdeSpec& spec, const ScoreField& score, const VectorXd& x,
                       double t) {
  return drift(spec, x, t) - spec.g2(t) * score.eval_one(x, t);
}

VectorXd ode_drift(const SdeSpec& spec, const ScoreField& score, const VectorXd& x, double t) {
  return drift(spec, x, t) - 0.5 * spec.g2(t) * score.eval_one(x, t);
}

void reverse_drift_batch(const SdeSpec& spec, const ScoreField& score, const MatrixXd& x,
                         double t, MatrixXd& out) {
  score.eval(x, t, out);
  out = -x - spec.g2(t) * out;
}

void ode_drift_batch(const SdeSpec& spec, const ScoreField& score, const MatrixXd& x, double t,
                     MatrixXd& out) {
  score.eval(x, t, out);
  out = -x - 0.5 * spec.g2(t) * out;
}

DensityDerivs ExpPotentialDensity::density_derivs(const VectorXd& x, double t) const {
  const PointDerivatives pd = u_.derivs(x, t);
  DensityDerivs dd;
  dd.value = std::exp(pd.value + log_scale_);
  dd.grad = dd.value * pd.grad;
  dd.laplacian = dd.value * (pd.grad.squaredNorm() + pd.laplacian);
  dd.time_deriv = dd.value * pd.time_deriv;
  return dd;
}

ScoreJet AnalyticGaussianScoreJet::jet(const VectorXd& x, double t) const {
  const GaussianState gs = potential_.state_at(t);
  Eigen::LLT<MatrixXd> llt(gs.cov);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("analytic score jet: singular covariance");
  const int d = static_cast<int>(x.size());
  const MatrixXd sinv = llt.solve(MatrixXd::Identity(d, d));
  const VectorXd q = x - gs.mean;

  ScoreJet sj;
  sj.s = -sinv * q;
  sj.jac = -sinv;
  const VectorXd mu_dot = -gs.mean;
  const MatrixXd sigma_dot = -2.0 * gs.cov + potential_.sde().g2(t) * MatrixXd::Identity(d, d);
  // d/dt [-Sigma^-1 (x - mu)] = Sigma^-1 Sigma' Sigma^-1 (x - mu) + Sigma^-1 mu'.
  sj.time_deriv = sinv * sigma_dot * sinv * q + sinv * mu_dot;
  sj.grad_div = VectorXd::Zero(d);
  return sj;
}

}  // namespace scoreflow
