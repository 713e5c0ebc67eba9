#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scoreflow/experiment.hpp"
#include "scoreflow/train.hpp"

using namespace scoreflow;

namespace {

SdeSpec ou2() {
  SdeSpec spec;
  spec.dimension = 2;
  spec.horizon = 10.0;
  return spec;
}

MlpConfig tiny_cfg(int width = 24) {
  MlpConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = {width, width};
  cfg.output_dim = 1;
  return cfg;
}

TrainConfig tiny_train(long iters, double w_R, uint64_t seed) {
  TrainConfig tc;
  tc.iterations = iters;
  tc.dsm_batch = 128;
  tc.colloc_batch = 128;
  tc.w_R = w_R;
  tc.seed = seed;
  tc.record_every = 50;
  return tc;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("learning rate schedule endpoints and midpoint") {
  TrainConfig tc;
  tc.iterations = 20001;
  CHECK(lr_at(tc, 0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_at(tc, tc.iterations - 1) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_at(tc, (tc.iterations - 1) / 2) == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK_THROWS_AS(lr_at(tc, -1), std::domain_error);
  CHECK_THROWS_AS(lr_at(tc, tc.iterations), std::domain_error);
}

TEST_CASE("adam first step moves by -lr * sign(grad)") {
  TrainConfig tc;
  VectorXd theta = VectorXd::Zero(4);
  VectorXd grad(4);
  grad << 0.5, -2.0, 1e-3, -1e-6;
  AdamState state = AdamState::zeros(4);
  adam_step(theta, grad, state, 0.01, tc);
  for (int i = 0; i < 4; ++i)
    CHECK(theta(i) == doctest::Approx(-0.01 * (grad(i) > 0 ? 1.0 : -1.0)).epsilon(1e-3));
  CHECK(state.step == 1);

  // zero gradient leaves parameters unchanged forever
  VectorXd frozen = VectorXd::Constant(3, 1.5);
  AdamState zs = AdamState::zeros(3);
  for (int k = 0; k < 10; ++k) adam_step(frozen, VectorXd::Zero(3), zs, 0.1, tc);
  CHECK((frozen.array() == 1.5).all());

  CHECK_THROWS_AS(
      adam_step(theta, VectorXd::Constant(4, std::numeric_limits<double>::quiet_NaN()), state,
                0.01, tc),
      std::runtime_error);
}

TEST_CASE("identical seeds give bitwise identical trajectories") {
  const SdeSpec spec = ou2();
  const Dataset data(DatasetSpec::mixture_default());
  VectorXd first, second;
  for (int run = 0; run < 2; ++run) {
    PotentialModel model(tiny_cfg());
    model.net().init(7);
    AdamState adam = AdamState::zeros(model.net().params().size());
    TrainConfig tc = tiny_train(40, 1.0, 99);
    train(model, adam, tc, data, spec);
    (run == 0 ? first : second) = model.net().params();
  }
  CHECK(std::memcmp(first.data(), second.data(), sizeof(double) * first.size()) == 0);
}

TEST_CASE("zero iterations returns the initial parameters") {
  const SdeSpec spec = ou2();
  const Dataset data(DatasetSpec::mixture_default());
  PotentialModel model(tiny_cfg());
  model.net().init(3);
  const VectorXd before = model.net().params();
  AdamState adam = AdamState::zeros(before.size());
  TrainConfig tc = tiny_train(0, 0.0, 1);
  const TrainResult tr = train(model, adam, tc, data, spec);
  CHECK(tr.iterations_done == 0);
  CHECK((model.net().params() - before).norm() == 0.0);
}

TEST_CASE("checkpoint resume reproduces the uninterrupted trajectory") {
  namespace fs = std::filesystem;
  const SdeSpec spec = ou2();
  const Dataset data(DatasetSpec::circles_default());
  const TrainConfig tc = tiny_train(60, 0.5, 1234);

  PotentialModel straight(tiny_cfg());
  straight.net().init(11);
  AdamState adam_a = AdamState::zeros(straight.net().params().size());
  train(straight, adam_a, tc, data, spec);

  PotentialModel part(tiny_cfg());
  part.net().init(11);
  AdamState adam_b = AdamState::zeros(part.net().params().size());
  train(part, adam_b, tc, data, spec, 0, 30);  // interrupted at iteration 30

  const std::string path = (fs::temp_directory_path() / "sf_resume.ckpt").string();
  Checkpoint ck;
  ck.model_kind = "potential";
  ck.config = part.net().config();
  ck.seed = tc.seed;
  ck.iteration = 30;
  ck.params = part.net().params();
  ck.has_adam = true;
  ck.adam_m = adam_b.m;
  ck.adam_v = adam_b.v;
  ck.adam_step = adam_b.step;
  save_checkpoint(path, ck);

  const Checkpoint back = load_checkpoint(path);
  PotentialModel resumed = load_potential_model(back);
  AdamState adam_c{back.adam_m, back.adam_v, back.adam_step};
  train(resumed, adam_c, tc, data, spec, back.iteration);

  CHECK(std::memcmp(resumed.net().params().data(), straight.net().params().data(),
                    sizeof(double) * straight.net().params().size()) == 0);
  fs::remove(path);
}

TEST_CASE("divergence aborts with the last checkpoint attached") {
  const SdeSpec spec = ou2();
  const Dataset data(DatasetSpec::mixture_default());
  PotentialModel model(tiny_cfg());
  model.net().init(5);
  AdamState adam = AdamState::zeros(model.net().params().size());
  TrainConfig tc = tiny_train(2000, 0.0, 2);
  tc.lr_start = 1e6;  // force blow-up
  tc.lr_end = 1e6;
  tc.divergence_threshold = 1e6;
  CHECK_THROWS_AS(train(model, adam, tc, data, spec), TrainingDiverged);
}

TEST_CASE("training decreases the loss on a moving average") {
  const SdeSpec spec = ou2();
  const Dataset data(DatasetSpec::mixture_default());
  PotentialModel model(tiny_cfg(32));
  model.net().init(21);
  AdamState adam = AdamState::zeros(model.net().params().size());
  TrainConfig tc = tiny_train(1200, 0.0, 77);
  tc.record_every = 20;
  const TrainResult tr = train(model, adam, tc, data, spec);
  const long k = static_cast<long>(tr.trace.size());
  REQUIRE(k >= 10);
  double head = 0.0, tail = 0.0;
  for (long i = 0; i < 5; ++i) head += tr.trace[i].combined;
  for (long i = k - 5; i < k; ++i) tail += tr.trace[i].combined;
  CHECK(tail < head);
}

TEST_CASE("oracle run: trained score approaches the analytic marginal score") {
  // Gaussian data makes the exact marginal score available; the desk-scale
  // w_R = 0 run must reach a small weighted score-matching loss.
  const SdeSpec spec = ou2();
  GaussianState p0;
  p0.mean = VectorXd::Zero(2);
  p0.cov = 0.25 * MatrixXd::Identity(2, 2);
  p0.time = 0.0;
  const Dataset data(DatasetSpec::gaussian_oracle(p0.mean, p0.cov));

  const ExperimentConfig desk = desk_preset();
  PotentialModel model(desk.mlp);
  TrainConfig tc = desk.train;
  tc.w_R = 0.0;
  tc.seed = 424242;
  model.net().init(mix_seed(tc.seed, 0xA11CEuLL));
  AdamState adam = AdamState::zeros(model.net().params().size());
  train(model, adam, tc, data, spec);

  const ExactGaussianScore truth(spec, p0);
  const PotentialScore learned(model);
  RngStream rng(31415);
  const SmBatch batch = make_sm_batch(spec, p0, 20000, rng, tc.t_eps);
  const double sm = sm_loss(learned, truth, batch);
  CHECK(sm < 0.05);
}

TEST_CASE("residual regularization lowers the held-out residual") {
  // 3 seeds, matched pairs; the w_R = 10 median must come out below w_R = 0.
  const SdeSpec spec = ou2();
  const Dataset data(DatasetSpec::mixture_default());
  RngStream eval_rng(604);
  const CollocationBatch heldout = make_collocation_batch(spec, -2, 2, 2048, eval_rng);

  std::vector<double> r0, r10;
  for (uint64_t seed : {11u, 22u, 33u}) {
    for (double w : {0.0, 10.0}) {
      PotentialModel model(tiny_cfg(32));
      model.net().init(mix_seed(seed, 0xBEEF));
      AdamState adam = AdamState::zeros(model.net().params().size());
      TrainConfig tc = tiny_train(1500, w, seed);
      train(model, adam, tc, data, spec);
      (w == 0.0 ? r0 : r10).push_back(lfp_residual(model, heldout, spec));
    }
  }
  std::sort(r0.begin(), r0.end());
  std::sort(r10.begin(), r10.end());
  CHECK(r10[1] < r0[1]);  // medians of 3
  // every matched pair should already show the effect at this scale
  CHECK(r10[2] < r0[0]);
}

TEST_CASE("trace csv round trip") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "sf_trace.csv").string();
  std::vector<TraceRow> trace{{0, 1e-3, 0.5, 4.0, 4.5}, {100, 9e-4, 0.4, 3.0, 3.4}};
  write_trace_csv(path, trace);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "iteration,lr,dsm_loss,lfp_residual,combined_loss");
  int rows = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  fs::remove(path);
}

}  // TEST_SUITE
