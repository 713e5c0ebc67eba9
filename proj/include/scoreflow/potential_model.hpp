#pragma once

#include "scoreflow/jet.hpp"
#include "scoreflow/sde.hpp"

namespace scoreflow {

struct BatchDerivs {
  VectorXd value;      // B
  MatrixXd grad;       // d x B
  VectorXd laplacian;  // B
  VectorXd time_deriv; // B
};

// Per-sample cotangents of a batch loss with respect to the four outputs.
// Empty members are treated as zero.
struct BatchCotangent {
  VectorXd value;
  MatrixXd grad;
  VectorXd laplacian;
  VectorXd time_deriv;
};

// Scalar potential phi(x, t) with exact derivatives from layer-wise jet
// propagation, and reverse-mode parameter gradients of losses built from
// {phi, grad phi, laplacian phi, dt phi}.
class PotentialModel final : public PotentialField {
 public:
  explicit PotentialModel(MlpConfig cfg);

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  int dimension() const override { return net_.config().input_dim - 1; }

  double value(const VectorXd& x, double t) const;
  VectorXd value_batch(const MatrixXd& x, const VectorXd& ts) const;
  MatrixXd score_batch(const MatrixXd& x, const VectorXd& ts) const;  // grad phi
  PointDerivatives derivs(const VectorXd& x, double t) const override;
  BatchDerivs derivs_batch(const MatrixXd& x, const VectorXd& ts) const;

  struct Cache {
    JetWorkspace ws;
    MatrixXd input;
    bool full = false;
  };
  // full mode propagates time and pure-second-order streams; grad mode only
  // spatial first-order.
  BatchDerivs forward_full(const MatrixXd& x, const VectorXd& ts, Cache& cache) const;
  MatrixXd forward_grad(const MatrixXd& x, const VectorXd& ts, Cache& cache) const;
  void backward(const Cache& cache, const BatchCotangent& cot, VectorXd& grad) const;

  struct Jet3 {
    double value = 0.0;
    VectorXd grad;
    MatrixXd hess;      // d x d
    double laplacian = 0.0;
    double time_deriv = 0.0;
    VectorXd grad_time; // d: d/dx of dt phi
    VectorXd grad_lap;  // d: d/dx of laplacian
  };
  Jet3 jet3(const VectorXd& x, double t) const;
  ScoreJet score_jet(const VectorXd& x, double t) const;  // jets of s = grad phi

 private:
  JetRequest full_request() const;
  JetRequest grad_request() const;
  MatrixXd stack_input(const MatrixXd& x, const VectorXd& ts) const;

  Mlp net_;
};

// Exposes grad phi as a score field; divergence is the exact laplacian.
class PotentialScore final : public ScoreField {
 public:
  explicit PotentialScore(const PotentialModel& m) : m_(m) {}
  int dimension() const override { return m_.dimension(); }
  void eval(const MatrixXd& x, double t, MatrixXd& out) const override;
  bool has_divergence() const override { return true; }
  void divergence(const MatrixXd& x, double t, VectorXd& out) const override;

 private:
  const PotentialModel& m_;
};

class PotentialScoreJet final : public ScoreJetField {
 public:
  explicit PotentialScoreJet(const PotentialModel& m) : m_(m) {}
  int dimension() const override { return m_.dimension(); }
  ScoreJet jet(const VectorXd& x, double t) const override { return m_.score_jet(x, t); }

 private:
  const PotentialModel& m_;
};

// Vector-valued score network s(x, t), the conventional parameterisation.
class DirectScoreModel {
 public:
  explicit DirectScoreModel(MlpConfig cfg);

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  int dimension() const { return net_.config().input_dim - 1; }

  VectorXd value(const VectorXd& x, double t) const;
  MatrixXd value_batch(const MatrixXd& x, const VectorXd& ts) const;
  MatrixXd jacobian(const VectorXd& x, double t) const;  // d x d
  ScoreJet jet(const VectorXd& x, double t) const;
  void divergence_batch(const MatrixXd& x, const VectorXd& ts, VectorXd& out) const;

  struct Cache {
    JetWorkspace ws;
    MatrixXd input;
  };
  MatrixXd forward(const MatrixXd& x, const VectorXd& ts, Cache& cache) const;
  void backward(const Cache& cache, const MatrixXd& cot, VectorXd& grad) const;

 private:
  MatrixXd stack_input(const MatrixXd& x, const VectorXd& ts) const;

  Mlp net_;
};

class DirectScoreField final : public ScoreField {
 public:
  explicit DirectScoreField(const DirectScoreModel& m) : m_(m) {}
  int dimension() const override { return m_.dimension(); }
  void eval(const MatrixXd& x, double t, MatrixXd& out) const override;
  bool has_divergence() const override { return true; }
  void divergence(const MatrixXd& x, double t, VectorXd& out) const override;

 private:
  const DirectScoreModel& m_;
};

class DirectScoreJetField final : public ScoreJetField {
 public:
  explicit DirectScoreJetField(const DirectScoreModel& m) : m_(m) {}
  int dimension() const override { return m_.dimension(); }
  ScoreJet jet(const VectorXd& x, double t) const override { return m_.jet(x, t); }

 private:
  const DirectScoreModel& m_;
};

}  // namespace scoreflow
