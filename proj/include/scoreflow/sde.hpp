#pragma once

#include <functional>
#include <memory>

#include "scoreflow/common.hpp"

namespace scoreflow {

enum class SdeKind { OrnsteinUhlenbeck };

// Forward diffusion dx = f(x,t) dt + g(t) dW on [0, horizon].
// For the Ornstein-Uhlenbeck kind: f(x,t) = -x, g constant.
struct SdeSpec {
  SdeKind kind = SdeKind::OrnsteinUhlenbeck;
  int dimension = 2;
  double horizon = 10.0;
  double diffusion = 1.0;  // constant g(t)

  double g(double /*t*/) const { return diffusion; }
  double g2(double t) const { return g(t) * g(t); }
  void validate() const;
};

// Gaussian law with its time stamp; covariance kept symmetric.
struct GaussianState {
  VectorXd mean;
  MatrixXd cov;
  double time = 0.0;

  void validate() const;
  double logpdf(const VectorXd& x) const;
};

VectorXd drift(const SdeSpec& spec, const VectorXd& x, double t);
void drift_batch(const SdeSpec& spec, const MatrixXd& x, double t, MatrixXd& out);
double drift_divergence(const SdeSpec& spec, const VectorXd& x, double t);

// Kernel moments for OU: mean decays by e^{-t}, variance relaxes to g^2/2.
double ou_mean_decay(double t);
double ou_kernel_variance(const SdeSpec& spec, double t);
double ou_stationary_variance(const SdeSpec& spec);

GaussianState perturbation_kernel(const SdeSpec& spec, const VectorXd& x0, double t);
VectorXd kernel_score(const SdeSpec& spec, const VectorXd& x_t, const VectorXd& x0, double t);
GaussianState gaussian_evolution(const SdeSpec& spec, const GaussianState& p0, double t);
GaussianState stationary_state(const SdeSpec& spec, double t = 0.0);

// Time-dependent score field s(x,t); batched over columns of x.
class ScoreField {
 public:
  virtual ~ScoreField() = default;
  virtual int dimension() const = 0;
  virtual void eval(const MatrixXd& x, double t, MatrixXd& out) const = 0;
  VectorXd eval_one(const VectorXd& x, double t) const;

  virtual bool has_divergence() const { return false; }
  virtual void divergence(const MatrixXd& x, double t, VectorXd& out) const;
};

class ZeroScore final : public ScoreField {
 public:
  explicit ZeroScore(int dim) : dim_(dim) {}
  int dimension() const override { return dim_; }
  void eval(const MatrixXd& x, double t, MatrixXd& out) const override;
  bool has_divergence() const override { return true; }
  void divergence(const MatrixXd& x, double t, VectorXd& out) const override;

 private:
  int dim_;
};

// Arbitrary callable score, mainly for tests and hand-built fields.
class FunctionScore final : public ScoreField {
 public:
  using Fn = std::function<VectorXd(const VectorXd&, double)>;
  FunctionScore(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  int dimension() const override { return dim_; }
  void eval(const MatrixXd& x, double t, MatrixXd& out) const override;

 private:
  int dim_;
  Fn fn_;
};

// Value/gradient/laplacian/time-derivative of a scalar potential u(x,t).
struct PointDerivatives {
  double value = 0.0;
  VectorXd grad;
  double laplacian = 0.0;
  double time_deriv = 0.0;

  bool all_finite() const;
};

class PotentialField {
 public:
  virtual ~PotentialField() = default;
  virtual int dimension() const = 0;
  virtual PointDerivatives derivs(const VectorXd& x, double t) const = 0;
};

// Log-density of an OU-evolved Gaussian, with exact derivatives in x and t.
class AnalyticGaussianPotential final : public PotentialField {
 public:
  AnalyticGaussianPotential(SdeSpec spec, GaussianState p0);

  int dimension() const override { return spec_.dimension; }
  GaussianState state_at(double t) const;
  PointDerivatives derivs(const VectorXd& x, double t) const override;
  VectorXd score(const VectorXd& x, double t) const;

  const SdeSpec& sde() const { return spec_; }

 private:
  SdeSpec spec_;
  GaussianState p0_;
};

// Exact marginal score of an OU-evolved Gaussian; divergence available.
class ExactGaussianScore final : public ScoreField {
 public:
  ExactGaussianScore(SdeSpec spec, GaussianState p0)
      : potential_(std::move(spec), std::move(p0)) {}

  int dimension() const override { return potential_.dimension(); }
  void eval(const MatrixXd& x, double t, MatrixXd& out) const override;
  bool has_divergence() const override { return true; }
  void divergence(const MatrixXd& x, double t, VectorXd& out) const override;

  const AnalyticGaussianPotential& potential() const { return potential_; }

 private:
  AnalyticGaussianPotential potential_;
};

VectorXd reverse_drift(const SdeSpec& spec, const ScoreField& score, const VectorXd& x, double t);
VectorXd ode_drift(const SdeSpec& spec, const ScoreField& score, const VectorXd& x, double t);
void reverse_drift_batch(const SdeSpec& spec, const ScoreField& score, const MatrixXd& x,
                         double t, MatrixXd& out);
void ode_drift_batch(const SdeSpec& spec, const ScoreField& score, const MatrixXd& x, double t,
                     MatrixXd& out);

// Density with derivatives, for Fokker-Planck residuals on p rather than log p.
struct DensityDerivs {
  double value = 0.0;
  VectorXd grad;
  double laplacian = 0.0;
  double time_deriv = 0.0;
};

class DensityField {
 public:
  virtual ~DensityField() = default;
  virtual int dimension() const = 0;
  virtual DensityDerivs density_derivs(const VectorXd& x, double t) const = 0;
};

// p = c * exp(u) for a potential u; c fixed (unnormalized by default).
class ExpPotentialDensity final : public DensityField {
 public:
  explicit ExpPotentialDensity(const PotentialField& u, double log_scale = 0.0)
      : u_(u), log_scale_(log_scale) {}
  int dimension() const override { return u_.dimension(); }
  DensityDerivs density_derivs(const VectorXd& x, double t) const override;

 private:
  const PotentialField& u_;
  double log_scale_;
};

// Score value with first/second input derivatives, for the score-form residual.
struct ScoreJet {
  VectorXd s;         // d
  MatrixXd jac;       // d x d, jac(i,j) = ds_i/dx_j
  VectorXd time_deriv;  // d
  VectorXd grad_div;  // d, gradient of div s
};

class ScoreJetField {
 public:
  virtual ~ScoreJetField() = default;
  virtual int dimension() const = 0;
  virtual ScoreJet jet(const VectorXd& x, double t) const = 0;
};

class AnalyticGaussianScoreJet final : public ScoreJetField {
 public:
  AnalyticGaussianScoreJet(SdeSpec spec, GaussianState p0)
      : potential_(std::move(spec), std::move(p0)) {}
  int dimension() const override { return potential_.dimension(); }
  ScoreJet jet(const VectorXd& x, double t) const override;

 private:
  AnalyticGaussianPotential potential_;
};

// Hand-specified jets for tests.
class FunctionScoreJet final : public ScoreJetField {
 public:
  using Fn = std::function<ScoreJet(const VectorXd&, double)>;
  FunctionScoreJet(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  int dimension() const override { return dim_; }
  ScoreJet jet(const VectorXd& x, double t) const override { return fn_(x, t); }

 private:
  int dim_;
  Fn fn_;
};

}  // namespace scoreflow
