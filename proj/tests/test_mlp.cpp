#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "scoreflow/checkpoint.hpp"
#include "scoreflow/losses.hpp"
#include "scoreflow/potential_model.hpp"

using namespace scoreflow;

namespace {

MlpConfig small_potential_cfg() {
  MlpConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = {12, 10};
  cfg.output_dim = 1;
  return cfg;
}

double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("parameter count matches the architecture") {
  MlpConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = {80, 80};
  cfg.output_dim = 1;
  CHECK(cfg.parameter_count() == 80 * 3 + 80 + 80 * 80 + 80 + 80 + 1);
  Mlp net(cfg);
  CHECK(net.params().size() == cfg.parameter_count());
}

TEST_CASE("zero-weight nets evaluate by hand") {
  PotentialModel model(small_potential_cfg());
  VectorXd x(2);
  x << 0.4, -1.0;
  // all parameters zero: phi = 0
  CHECK(model.value(x, 1.0) == 0.0);

  // final bias b only: phi = b
  model.net().params().setZero();
  model.net().bias(2)(0) = 1.75;
  CHECK(model.value(x, 0.5) == doctest::Approx(1.75));

  // zero weights, zero hidden biases, unit output weights:
  // phi = b + sum_j softplus(softplus(0) * 0 + 0) ... second layer sees
  // softplus(0)=log 2 through zero weights, so its units are softplus(0)=log2
  // only if its weights are zero. With unit output weights over layer-2
  // activations softplus(0) = log 2:
  auto w_out = model.net().weight(2);
  w_out.setOnes();
  const double expect = 1.75 + 10.0 * softplus(0.0);
  CHECK(model.value(x, 0.5) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("determinism and hidden-unit permutation symmetry") {
  PotentialModel model(small_potential_cfg());
  model.net().init(42);
  VectorXd x(2);
  x << -0.3, 0.9;
  const double v1 = model.value(x, 2.0);
  const double v2 = model.value(x, 2.0);
  CHECK(v1 == v2);

  // swap rows 2 and 5 of W0/b0 with the matching columns of W1
  Mlp& net = model.net();
  MatrixXd w0 = net.weight(0);
  VectorXd b0 = net.bias(0);
  MatrixXd w1 = net.weight(1);
  w0.row(2).swap(w0.row(5));
  std::swap(b0(2), b0(5));
  w1.col(2).swap(w1.col(5));
  net.weight(0) = w0;
  net.bias(0) = b0;
  net.weight(1) = w1;
  CHECK(model.value(x, 2.0) == doctest::Approx(v1).epsilon(1e-15));
}

TEST_CASE("constant network has vanishing derivatives") {
  PotentialModel model(small_potential_cfg());
  model.net().params().setZero();
  model.net().bias(2)(0) = -0.7;
  const PointDerivatives pd = model.derivs((VectorXd(2) << 0.2, 0.4).finished(), 1.3);
  CHECK(pd.value == doctest::Approx(-0.7));
  CHECK(pd.grad.norm() == 0.0);
  CHECK(pd.laplacian == 0.0);
  CHECK(pd.time_deriv == 0.0);
}

TEST_CASE("saturated softplus gives an effectively linear potential") {
  // First hidden unit carries w.x + 40 deep into the linear regime of
  // softplus; remaining units are constant. Downstream layers pass it through
  // the same way, so grad phi = w and the laplacian vanishes.
  MlpConfig cfg = small_potential_cfg();
  PotentialModel model(cfg);
  Mlp& net = model.net();
  net.params().setZero();
  VectorXd w(3);
  w << 1.3, -0.4, 0.0;
  net.weight(0).row(0) = w.transpose();
  net.bias(0).setConstant(40.0);
  net.weight(1).row(0).setZero();
  net.weight(1)(0, 0) = 1.0;
  net.bias(1).setConstant(40.0);
  net.weight(2).setZero();
  net.weight(2)(0, 0) = 1.0;

  const PointDerivatives pd = model.derivs((VectorXd(2) << 0.3, -0.8).finished(), 0.9);
  CHECK(pd.grad(0) == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(pd.grad(1) == doctest::Approx(-0.4).epsilon(1e-12));
  CHECK(std::abs(pd.laplacian) < 1e-12);
  CHECK(std::abs(pd.time_deriv) < 1e-12);
}

TEST_CASE("derivatives match central finite differences at random points") {
  PotentialModel model(small_potential_cfg());
  RngStream rng(101);
  const double h = 1e-4;
  for (int trial = 0; trial < 50; ++trial) {
    model.net().init(1000 + trial);
    VectorXd x(2);
    x << rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5);
    const double t = rng.uniform(0.1, 9.9);
    const PointDerivatives pd = model.derivs(x, t);

    double lap_fd = 0.0;
    for (int dim = 0; dim < 2; ++dim) {
      VectorXd xp = x, xm = x;
      xp(dim) += h;
      xm(dim) -= h;
      const double vp = model.value(xp, t), vm = model.value(xm, t);
      CHECK(rel_err(pd.grad(dim), (vp - vm) / (2.0 * h)) < 1e-4);
      lap_fd += (vp - 2.0 * pd.value + vm) / (h * h);
    }
    CHECK(rel_err(pd.laplacian, lap_fd, 1e-3) < 1e-4);
    const double dt_fd = (model.value(x, t + h) - model.value(x, t - h)) / (2.0 * h);
    CHECK(rel_err(pd.time_deriv, dt_fd) < 1e-4);
  }
}

TEST_CASE("third-order jets match finite differences of exact quantities") {
  PotentialModel model(small_potential_cfg());
  model.net().init(77);
  RngStream rng(5);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd x(2);
    x << rng.uniform(-1, 1), rng.uniform(-1, 1);
    const double t = rng.uniform(0.5, 9.5);
    const PotentialModel::Jet3 j3 = model.jet3(x, t);

    CHECK(rel_err(j3.laplacian, model.derivs(x, t).laplacian, 1e-9) < 1e-12);
    for (int i = 0; i < 2; ++i) {
      // hessian rows = d/dx of grad, grad_lap = d/dx of laplacian,
      // grad_time = d/dx of dt phi
      VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const PointDerivatives pp = model.derivs(xp, t);
      const PointDerivatives pm = model.derivs(xm, t);
      for (int j = 0; j < 2; ++j)
        CHECK(rel_err(j3.hess(j, i), (pp.grad(j) - pm.grad(j)) / (2.0 * h), 1e-4) < 1e-4);
      CHECK(rel_err(j3.grad_lap(i), (pp.laplacian - pm.laplacian) / (2.0 * h), 1e-3) < 1e-4);
      CHECK(rel_err(j3.grad_time(i), (pp.time_deriv - pm.time_deriv) / (2.0 * h), 1e-4) <
            1e-4);
    }
  }
}

TEST_CASE("direct score model: shape, zero weights, jacobian") {
  MlpConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = {10, 8};
  cfg.output_dim = 2;
  DirectScoreModel model(cfg);
  VectorXd x(2);
  x << 0.3, 0.6;
  CHECK(model.value(x, 1.0).size() == 2);
  CHECK(model.value(x, 1.0).norm() == 0.0);

  model.net().init(9);
  RngStream rng(13);
  const double h = 1e-4;
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd p(2);
    p << rng.uniform(-1, 1), rng.uniform(-1, 1);
    const double t = rng.uniform(0.1, 9.9);
    const MatrixXd jac = model.jacobian(p, t);
    for (int j = 0; j < 2; ++j) {
      VectorXd pp = p, pm = p;
      pp(j) += h;
      pm(j) -= h;
      const VectorXd fd = (model.value(pp, t) - model.value(pm, t)) / (2.0 * h);
      for (int i = 0; i < 2; ++i) CHECK(rel_err(jac(i, j), fd(i)) < 1e-4);
    }
    // score jet agrees with the plain jacobian
    const ScoreJet sj = model.jet(p, t);
    CHECK((sj.jac - jac).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("parameter gradients match finite differences in theta") {
  PotentialModel model(small_potential_cfg());
  model.net().init(321);
  const long n = model.net().params().size();
  MatrixXd x(2, 3);
  x << 0.2, -0.5, 0.9, 0.1, 0.8, -0.4;
  VectorXd ts(3);
  ts << 0.5, 3.0, 8.0;

  // base case: loss = mean phi equals plain backprop through the value
  {
    auto [loss, grad] = loss_gradient(model, x, ts, [](const BatchDerivs& d, BatchCotangent& c) {
      c.value = VectorXd::Constant(d.value.size(), 1.0 / d.value.size());
      return d.value.mean();
    });
    RngStream rng(4);
    const double h = 1e-6;
    for (int k = 0; k < 20; ++k) {
      const long idx = rng.index(static_cast<int>(n));
      VectorXd theta = model.net().params();
      theta(idx) += h;
      model.net().set_params(theta);
      const double up = model.value_batch(x, ts).mean();
      theta(idx) -= 2.0 * h;
      model.net().set_params(theta);
      const double dn = model.value_batch(x, ts).mean();
      theta(idx) += h;
      model.net().set_params(theta);
      CHECK(rel_err(grad(idx), (up - dn) / (2.0 * h), 1e-7) < 1e-3);
    }
    CHECK(std::isfinite(loss));
  }

  // ||grad phi||^2 and (lap phi)^2 losses, finite differences in theta
  auto grad_sq = [](const BatchDerivs& d, BatchCotangent& c) {
    const long B = d.value.size();
    c.grad = 2.0 * d.grad / static_cast<double>(B);
    double loss = 0.0;
    for (long i = 0; i < B; ++i) loss += d.grad.col(i).squaredNorm();
    return loss / static_cast<double>(B);
  };
  auto lap_sq = [](const BatchDerivs& d, BatchCotangent& c) {
    const long B = d.value.size();
    c.laplacian = 2.0 * d.laplacian / static_cast<double>(B);
    return d.laplacian.squaredNorm() / static_cast<double>(B);
  };
  auto dt_sq = [](const BatchDerivs& d, BatchCotangent& c) {
    const long B = d.value.size();
    c.time_deriv = 2.0 * d.time_deriv / static_cast<double>(B);
    return d.time_deriv.squaredNorm() / static_cast<double>(B);
  };

  auto check_loss = [&](auto&& fn) {
    auto eval = [&](const MatrixXd& xs, const VectorXd& tv) {
      BatchCotangent scratch;
      const BatchDerivs d = model.derivs_batch(xs, tv);
      return fn(d, scratch);
    };
    auto [loss, grad] = loss_gradient(model, x, ts, fn);
    CHECK(loss == doctest::Approx(eval(x, ts)).epsilon(1e-12));
    RngStream rng(99);
    const double h = 1e-5;
    for (int k = 0; k < 20; ++k) {
      const long idx = rng.index(static_cast<int>(n));
      VectorXd theta = model.net().params();
      const double save = theta(idx);
      theta(idx) = save + h;
      model.net().set_params(theta);
      const double up = eval(x, ts);
      theta(idx) = save - h;
      model.net().set_params(theta);
      const double dn = eval(x, ts);
      theta(idx) = save;
      model.net().set_params(theta);
      CHECK(rel_err(grad(idx), (up - dn) / (2.0 * h), 1e-7) < 1e-3);
    }
  };
  check_loss(grad_sq);
  check_loss(lap_sq);
  check_loss(dt_sq);
}

TEST_CASE("direct score parameter gradients match finite differences") {
  MlpConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = {8, 8};
  cfg.output_dim = 2;
  DirectScoreModel model(cfg);
  model.net().init(55);
  MatrixXd x(2, 4);
  x << 0.1, -0.2, 0.5, -0.9, 0.7, 0.3, -0.6, 0.2;
  VectorXd ts(4);
  ts << 1.0, 2.0, 4.0, 9.0;

  auto eval = [&]() {
    return model.value_batch(x, ts).squaredNorm() / 4.0;
  };
  DirectScoreModel::Cache cache;
  const MatrixXd s = model.forward(x, ts, cache);
  VectorXd grad = VectorXd::Zero(model.net().params().size());
  model.backward(cache, s * (2.0 / 4.0), grad);

  RngStream rng(12);
  const double h = 1e-6;
  for (int k = 0; k < 20; ++k) {
    const long idx = rng.index(static_cast<int>(model.net().params().size()));
    VectorXd theta = model.net().params();
    const double save = theta(idx);
    theta(idx) = save + h;
    model.net().set_params(theta);
    const double up = eval();
    theta(idx) = save - h;
    model.net().set_params(theta);
    const double dn = eval();
    theta(idx) = save;
    model.net().set_params(theta);
    CHECK(rel_err(grad(idx), (up - dn) / (2.0 * h), 1e-8) < 1e-3);
  }
}

TEST_CASE("gradient-of-potential score has an exactly symmetric jacobian") {
  PotentialModel model(small_potential_cfg());
  model.net().init(2024);
  RngStream rng(1);
  for (int trial = 0; trial < 25; ++trial) {
    VectorXd x(2);
    x << rng.uniform(-2, 2), rng.uniform(-2, 2);
    const ScoreJet sj = model.score_jet(x, rng.uniform(0, 10));
    CHECK(std::abs(sj.jac(1, 0) - sj.jac(0, 1)) < 1e-8);
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "sf_test.ckpt").string();
  Checkpoint ck;
  ck.model_kind = "potential";
  ck.config = small_potential_cfg();
  ck.seed = 987654321;
  ck.iteration = 1234;
  Mlp net(ck.config);
  net.init(31337);
  ck.params = net.params();
  ck.has_adam = true;
  ck.adam_m = VectorXd::Random(ck.params.size());
  ck.adam_v = VectorXd::Random(ck.params.size()).cwiseAbs();
  ck.adam_step = 77;
  save_checkpoint(path, ck);

  const Checkpoint back = load_checkpoint(path);
  CHECK(back.model_kind == ck.model_kind);
  CHECK(back.config == ck.config);
  CHECK(back.seed == ck.seed);
  CHECK(back.iteration == ck.iteration);
  CHECK(std::memcmp(back.params.data(), ck.params.data(),
                    sizeof(double) * ck.params.size()) == 0);
  CHECK(std::memcmp(back.adam_m.data(), ck.adam_m.data(),
                    sizeof(double) * ck.params.size()) == 0);
  CHECK(std::memcmp(back.adam_v.data(), ck.adam_v.data(),
                    sizeof(double) * ck.params.size()) == 0);
  CHECK(back.adam_step == ck.adam_step);
  fs::remove(path);
}

TEST_CASE("dimension mismatches are rejected") {
  PotentialModel model(small_potential_cfg());
  MatrixXd bad(3, 2);
  bad.setZero();
  CHECK_THROWS_AS(model.value_batch(bad, VectorXd::Zero(2)), std::invalid_argument);
  MlpConfig cfg = small_potential_cfg();
  cfg.output_dim = 2;
  CHECK_THROWS_AS(PotentialModel{cfg}, std::invalid_argument);
  cfg.output_dim = 1;
  CHECK_THROWS_AS(DirectScoreModel{cfg}, std::invalid_argument);
}

}  // TEST_SUITE
