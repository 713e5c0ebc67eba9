#include <doctest.h>

#include "scoreflow/losses.hpp"

using namespace scoreflow;

namespace {

SdeSpec ou2() {
  SdeSpec spec;
  spec.dimension = 2;
  spec.horizon = 10.0;
  return spec;
}

MlpConfig tiny_cfg() {
  MlpConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = {12, 10};
  cfg.output_dim = 1;
  return cfg;
}

// Score that cheats by closing over x0 and reproducing the kernel score.
class CheatingScore final : public ScoreField {
 public:
  CheatingScore(const SdeSpec& spec, const DsmBatch& batch, VectorXd offset)
      : spec_(spec), batch_(batch), offset_(std::move(offset)) {}
  int dimension() const override { return 2; }
  void eval(const MatrixXd& x, double t, MatrixXd& out) const override {
    out.resize(x.rows(), x.cols());
    for (long i = 0; i < x.cols(); ++i) {
      long hit = -1;
      for (long k = 0; k < batch_.size(); ++k)
        if (batch_.times(k) == t && (batch_.xt.col(k) - x.col(i)).norm() == 0.0) {
          hit = k;
          break;
        }
      REQUIRE(hit >= 0);
      out.col(i) = kernel_score(spec_, batch_.xt.col(hit), batch_.x0.col(hit), t) + offset_;
    }
  }

 private:
  SdeSpec spec_;
  const DsmBatch& batch_;
  VectorXd offset_;
};

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("dsm loss: cheating evaluator, constant offset, one-sample recompute") {
  const SdeSpec spec = ou2();
  const Dataset data(DatasetSpec::gaussian_oracle(VectorXd::Zero(2),
                                                  0.25 * MatrixXd::Identity(2, 2)));
  RngStream rng(8);
  const DsmBatch batch = make_dsm_batch(data, spec, 64, rng);

  const CheatingScore perfect(spec, batch, VectorXd::Zero(2));
  CHECK(dsm_loss(perfect, batch, spec) < 1e-24);

  VectorXd c(2);
  c << 0.3, -1.1;
  const CheatingScore offset(spec, batch, c);
  CHECK(dsm_loss(offset, batch, spec) == doctest::Approx(c.squaredNorm()).epsilon(1e-12));

  RngStream rng1(9);
  const DsmBatch one = make_dsm_batch(data, spec, 1, rng1);
  const ZeroScore zero(2);
  const double expect =
      one.lambda(0) * kernel_score(spec, one.xt.col(0), one.x0.col(0), one.times(0)).squaredNorm();
  CHECK(dsm_loss(zero, one, spec) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sm loss basics") {
  const SdeSpec spec = ou2();
  GaussianState p0;
  p0.mean = VectorXd::Zero(2);
  p0.cov = 0.25 * MatrixXd::Identity(2, 2);
  p0.time = 0.0;
  const ExactGaussianScore truth(spec, p0);
  RngStream rng(21);
  const SmBatch batch = make_sm_batch(spec, p0, 128, rng);
  CHECK(sm_loss(truth, truth, batch) == 0.0);

  VectorXd c(2);
  c << -0.2, 0.5;
  const FunctionScore shifted(
      2, [&](const VectorXd& x, double t) { return truth.eval_one(x, t) + c; });
  CHECK(sm_loss(shifted, truth, batch) == doctest::Approx(c.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("dsm - sm gap is model independent under common random numbers") {
  // Vincent's identity: DSM equals SM up to a theta-independent constant.
  // Estimate the gap for two different networks on the same draws and check
  // the difference against its Monte Carlo error.
  const SdeSpec spec = ou2();
  GaussianState p0;
  p0.mean = (VectorXd(2) << 0.2, -0.1).finished();
  p0.cov = 0.16 * MatrixXd::Identity(2, 2);
  p0.time = 0.0;
  const Dataset data(DatasetSpec::gaussian_oracle(p0.mean, p0.cov));
  const ExactGaussianScore truth(spec, p0);

  PotentialModel net_a(tiny_cfg()), net_b(tiny_cfg());
  net_a.net().init(1);
  net_b.net().init(2);
  const PotentialScore score_a(net_a), score_b(net_b);

  RngStream rng(33);
  const long n = 20000;
  const DsmBatch batch = make_dsm_batch(data, spec, n, rng);

  VectorXd delta(n);
  for (long i = 0; i < n; ++i) {
    const VectorXd x = batch.xt.col(i);
    const double t = batch.times(i);
    const VectorXd ks = kernel_score(spec, x, batch.x0.col(i), t);
    const VectorXd ms = truth.eval_one(x, t);
    const VectorXd sa = score_a.eval_one(x, t);
    const VectorXd sb = score_b.eval_one(x, t);
    const double gap_a = (ks - sa).squaredNorm() - (ms - sa).squaredNorm();
    const double gap_b = (ks - sb).squaredNorm() - (ms - sb).squaredNorm();
    delta(i) = batch.lambda(i) * (gap_a - gap_b);
  }
  const double mean = delta.mean();
  const double se = std::sqrt((delta.array() - mean).square().sum() / (n - 1.0) / n);
  CHECK(std::abs(mean) < 3.0 * se + 1e-12);
}

TEST_CASE("lfp residual on analytic potentials") {
  const SdeSpec spec = ou2();
  RngStream rng(3);
  const CollocationBatch batch = make_collocation_batch(spec, -2, 2, 1000, rng);

  // constant potential: only div f survives, r = -2 pointwise
  PotentialModel constant(tiny_cfg());
  constant.net().params().setZero();
  constant.net().bias(2)(0) = 3.3;
  CHECK(lfp_residual(constant, batch, spec) == doctest::Approx(4.0).epsilon(1e-12));

  const AnalyticGaussianPotential stat(spec, stationary_state(spec));
  CHECK(lfp_residual(stat, batch, spec) < 1e-24);

  GaussianState p0;
  p0.mean = VectorXd::Zero(2);
  p0.cov = 0.25 * MatrixXd::Identity(2, 2);
  p0.time = 0.0;
  const AnalyticGaussianPotential evolved(spec, p0);
  CHECK(lfp_residual(evolved, batch, spec) < 1e-10);
}

TEST_CASE("fp residual on analytic densities") {
  const SdeSpec spec = ou2();
  RngStream rng(4);
  const CollocationBatch batch = make_collocation_batch(spec, -2, 2, 500, rng);

  GaussianState p0;
  p0.mean = (VectorXd(2) << 0.1, -0.3).finished();
  p0.cov = 0.25 * MatrixXd::Identity(2, 2);
  p0.time = 0.0;
  const AnalyticGaussianPotential evolved(spec, p0);
  const ExpPotentialDensity density(evolved);
  CHECK(fp_residual(density, batch, spec) < 1e-10);

  // homogeneity: scaling the density by c scales the residual by c^2
  const ExpPotentialDensity scaled(evolved, std::log(3.0));
  PotentialModel net(tiny_cfg());
  net.net().init(6);
  const ExpPotentialDensity p1(net), p3(net, std::log(3.0));
  const double r1 = fp_residual(p1, batch, spec);
  const double r3 = fp_residual(p3, batch, spec);
  CHECK(r3 == doctest::Approx(9.0 * r1).epsilon(1e-10));

  const AnalyticGaussianPotential stat(spec, stationary_state(spec));
  const ExpPotentialDensity stat_density(stat);
  CHECK(fp_residual(stat_density, batch, spec) < 1e-24);
}

TEST_CASE("sfp residual: stationary and zero scores") {
  const SdeSpec spec = ou2();
  RngStream rng(5);
  const CollocationBatch batch = make_collocation_batch(spec, -2, 2, 200, rng);

  const AnalyticGaussianScoreJet stat(spec, stationary_state(spec));
  CHECK(sfp_residual(stat, batch, spec) < 1e-24);

  const FunctionScoreJet zero(2, [](const VectorXd&, double) {
    ScoreJet sj;
    sj.s = VectorXd::Zero(2);
    sj.jac = MatrixXd::Zero(2, 2);
    sj.time_deriv = VectorXd::Zero(2);
    sj.grad_div = VectorXd::Zero(2);
    return sj;
  });
  CHECK(sfp_residual(zero, batch, spec) == 0.0);
}

TEST_CASE("sfp integrand of grad-phi equals the gradient of the lfp integrand") {
  const SdeSpec spec = ou2();
  PotentialModel model(tiny_cfg());
  model.net().init(71);
  const PotentialScoreJet sjf(model);
  RngStream rng(6);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd x(2);
    x << rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5);
    const double t = rng.uniform(0.2, 9.8);
    const VectorXd exact = sfp_integrand(sjf.jet(x, t), x, t, spec);
    for (int dim = 0; dim < 2; ++dim) {
      VectorXd xp = x, xm = x;
      xp(dim) += h;
      xm(dim) -= h;
      const double rp = lfp_integrand(model.derivs(xp, t), xp, t, spec);
      const double rm = lfp_integrand(model.derivs(xm, t), xm, t, spec);
      const double fd = (rp - rm) / (2.0 * h);
      CHECK(std::abs(exact(dim) - fd) / std::max({std::abs(fd), std::abs(exact(dim)), 1e-4}) <
            1e-4);
    }
  }
}

TEST_CASE("residual-form equivalence on random networks") {
  const SdeSpec spec = ou2();
  RngStream rng(7);
  for (int net_id = 0; net_id < 10; ++net_id) {
    PotentialModel model(tiny_cfg());
    model.net().init(500 + net_id);
    for (int pt = 0; pt < 100; ++pt) {
      VectorXd x(2);
      x << rng.uniform(-2, 2), rng.uniform(-2, 2);
      const double t = rng.uniform(0, 10);
      const PointDerivatives pd = model.derivs(x, t);
      const double a = lfp_integrand(pd, x, t, spec);
      const double b = lfp_integrand_approx_form(pd, x, t, spec);
      CHECK(std::abs(a - b) < 1e-10);
    }
  }
}

TEST_CASE("lfp residual is invariant under constant potential shifts") {
  const SdeSpec spec = ou2();
  PotentialModel model(tiny_cfg());
  model.net().init(88);
  RngStream rng(9);
  const CollocationBatch batch = make_collocation_batch(spec, -2, 2, 256, rng);
  const double before = lfp_residual(model, batch, spec);
  model.net().bias(2)(0) += 17.5;
  const double after = lfp_residual(model, batch, spec);
  CHECK(std::abs(after - before) < 1e-12);
}

TEST_CASE("combined loss composition and linearity in w_R") {
  const SdeSpec spec = ou2();
  const Dataset data(DatasetSpec::mixture_default());
  RngStream rng(10);
  const DsmBatch dsm = make_dsm_batch(data, spec, 64, rng);
  const CollocationBatch colloc = make_collocation_batch(spec, -2, 2, 64, rng);

  PotentialModel model(tiny_cfg());
  model.net().init(12);
  const double l0 = combined_loss(model, 0.0, dsm, colloc, spec);
  const PotentialScore score(model);
  CHECK(l0 == doctest::Approx(dsm_loss(score, dsm, spec)).epsilon(1e-12));

  // constant potential: combined = dsm + w_R * 4
  PotentialModel constant(tiny_cfg());
  constant.net().params().setZero();
  const double base = combined_loss(constant, 0.0, dsm, colloc, spec);
  CHECK(combined_loss(constant, 1.0, dsm, colloc, spec) ==
        doctest::Approx(base + 4.0).epsilon(1e-12));

  const double r = lfp_residual(model, colloc, spec);
  const double l1 = combined_loss(model, 1.0, dsm, colloc, spec);
  const double l2 = combined_loss(model, 2.0, dsm, colloc, spec);
  CHECK(l2 - l1 == doctest::Approx(r).epsilon(1e-9));
}

TEST_CASE("combined loss gradient agrees with value path and finite differences") {
  const SdeSpec spec = ou2();
  const Dataset data(DatasetSpec::circles_default());
  RngStream rng(14);
  const DsmBatch dsm = make_dsm_batch(data, spec, 32, rng);
  const CollocationBatch colloc = make_collocation_batch(spec, -2, 2, 32, rng);

  PotentialModel model(tiny_cfg());
  model.net().init(100);
  VectorXd grad;
  const double w_R = 0.7;
  const CombinedLossValue v = combined_loss_grad(model, w_R, dsm, colloc, spec, grad);
  CHECK(v.combined ==
        doctest::Approx(combined_loss(model, w_R, dsm, colloc, spec)).epsilon(1e-10));

  RngStream pick(15);
  const double h = 1e-6;
  for (int k = 0; k < 15; ++k) {
    const long idx = pick.index(static_cast<int>(model.net().params().size()));
    VectorXd theta = model.net().params();
    const double save = theta(idx);
    theta(idx) = save + h;
    model.net().set_params(theta);
    const double up = combined_loss(model, w_R, dsm, colloc, spec);
    theta(idx) = save - h;
    model.net().set_params(theta);
    const double dn = combined_loss(model, w_R, dsm, colloc, spec);
    theta(idx) = save;
    model.net().set_params(theta);
    const double fd = (up - dn) / (2.0 * h);
    CHECK(std::abs(grad(idx) - fd) / std::max({std::abs(fd), std::abs(grad(idx)), 1e-6}) <
          1e-3);
  }
}

TEST_CASE("estimators are nonnegative and batch-consistent") {
  const SdeSpec spec = ou2();
  PotentialModel model(tiny_cfg());
  model.net().init(200);

  RngStream ra(16), rb(17);
  const CollocationBatch b1 = make_collocation_batch(spec, -2, 2, 4000, ra);
  const CollocationBatch b2 = make_collocation_batch(spec, -2, 2, 4000, rb);
  const double r1 = lfp_residual(model, b1, spec);
  const double r2 = lfp_residual(model, b2, spec);
  CHECK(r1 >= 0.0);
  CHECK(r2 >= 0.0);

  // two disjoint batches agree within 4 standard errors
  VectorXd sq(b1.size());
  for (long i = 0; i < b1.size(); ++i) {
    const double r = lfp_integrand(model.derivs(b1.x.col(i), b1.times(i)), b1.x.col(i),
                                   b1.times(i), spec);
    sq(i) = r * r;
  }
  const double se = std::sqrt((sq.array() - sq.mean()).square().sum() /
                              (sq.size() - 1.0) / sq.size());
  CHECK(std::abs(r1 - r2) < 4.0 * se * std::sqrt(2.0));
}

}  // TEST_SUITE
