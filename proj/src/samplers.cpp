#include "scoreflow/samplers.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace scoreflow {

namespace {

constexpr long kBlock = 8192;

void check_finite(const MatrixXd& x, int step, const char* kind) {
  if (!x.allFinite())
    throw std::runtime_error(std::string(kind) + " sampler: non-finite state at step " +
                             std::to_string(step));
}

}  // namespace

void SamplerConfig::validate() const {
  if (n < 1) throw std::invalid_argument("sampler: n must be >= 1");
  if (steps < 1) throw std::invalid_argument("sampler: steps must be >= 1");
}

MatrixXd sample_prior(const SdeSpec& spec, long n, uint64_t seed) {
  const double sd = std::sqrt(ou_stationary_variance(spec));
  MatrixXd x(spec.dimension, n);
  for (long i = 0; i < n; ++i)
    for (int k = 0; k < spec.dimension; ++k)
      x(k, i) = sd * hash_normal(seed, static_cast<uint64_t>(i), 0,
                                 static_cast<uint64_t>(k));
  return x;
}

double prior_logpdf(const SdeSpec& spec, const VectorXd& x) {
  const double var = ou_stationary_variance(spec);
  const double d = static_cast<double>(spec.dimension);
  return -0.5 * x.squaredNorm() / var - 0.5 * d * std::log(2.0 * M_PI * var);
}

SampleBatch sample_reverse_sde(const ScoreField& score, const SdeSpec& spec,
                               const SamplerConfig& cfg) {
  cfg.validate();
  spec.validate();
  SampleBatch batch;
  batch.kind = "sde";
  batch.seed = cfg.seed;
  batch.steps = cfg.steps;
  batch.points = sample_prior(spec, cfg.n, cfg.seed);
  const double dtau = spec.horizon / cfg.steps;
  const double sq = std::sqrt(dtau);

  MatrixXd drift, noise;
  for (long lo = 0; lo < cfg.n; lo += kBlock) {
    const long b = std::min(kBlock, cfg.n - lo);
    auto x = batch.points.middleCols(lo, b);
    MatrixXd xb = x;
    noise.resize(spec.dimension, b);
    for (int step = 0; step < cfg.steps; ++step) {
      const double t = spec.horizon - step * dtau;
      reverse_drift_batch(spec, score, xb, t, drift);
      const double g = spec.g(t);
      for (long i = 0; i < b; ++i)
        for (int k = 0; k < spec.dimension; ++k)
          noise(k, i) = hash_normal(cfg.seed, static_cast<uint64_t>(lo + i),
                                    static_cast<uint64_t>(step + 1),
                                    static_cast<uint64_t>(k));
      xb += -dtau * drift + (g * sq) * noise;
      check_finite(xb, step, "sde");
    }
    x = xb;
  }
  return batch;
}

SampleBatch sample_ode(const ScoreField& score, const SdeSpec& spec, const SamplerConfig& cfg) {
  cfg.validate();
  spec.validate();
  SampleBatch batch;
  batch.kind = "ode";
  batch.seed = cfg.seed;
  batch.steps = cfg.steps;
  batch.points = sample_prior(spec, cfg.n, cfg.seed);
  const double dtau = spec.horizon / cfg.steps;

  MatrixXd drift;
  for (long lo = 0; lo < cfg.n; lo += kBlock) {
    const long b = std::min(kBlock, cfg.n - lo);
    auto x = batch.points.middleCols(lo, b);
    MatrixXd xb = x;
    for (int step = 0; step < cfg.steps; ++step) {
      const double t = spec.horizon - step * dtau;
      ode_drift_batch(spec, score, xb, t, drift);
      xb -= dtau * drift;
      check_finite(xb, step, "ode");
    }
    x = xb;
  }
  return batch;
}

VectorXd ode_loglik_batch(const ScoreField& score, const SdeSpec& spec, const MatrixXd& x,
                          int steps) {
  if (!score.has_divergence())
    throw std::invalid_argument("ode_loglik: score field must provide a divergence");
  if (steps < 1) throw std::invalid_argument("ode_loglik: steps must be >= 1");
  const double dt = spec.horizon / steps;
  MatrixXd xt = x;
  VectorXd logdet = VectorXd::Zero(x.cols());
  MatrixXd s;
  VectorXd div;
  for (int step = 0; step < steps; ++step) {
    const double t = step * dt;
    score.eval(xt, t, s);
    score.divergence(xt, t, div);
    const double g2 = spec.g2(t);
    // f_ode = f - (g^2/2) s; div f_ode = -d - (g^2/2) div s
    logdet.array() +=
        dt * (-static_cast<double>(spec.dimension) - 0.5 * g2 * div.array());
    xt += dt * (-xt - 0.5 * g2 * s);
    check_finite(xt, step, "loglik");
  }
  VectorXd out(x.cols());
  for (long i = 0; i < x.cols(); ++i) out(i) = prior_logpdf(spec, xt.col(i)) + logdet(i);
  return out;
}

double ode_loglik(const ScoreField& score, const SdeSpec& spec, const VectorXd& x, int steps) {
  return ode_loglik_batch(score, spec, x, steps)(0);
}

void write_samples_csv(const std::string& path, const SampleBatch& batch) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("samples: cannot open '" + path + "'");
  os << "# kind=" << batch.kind << " seed=" << batch.seed << " steps=" << batch.steps
     << " n=" << batch.size() << "\n";
  os << "x1,x2\n";
  char buf[128];
  for (long i = 0; i < batch.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", batch.points(0, i), batch.points(1, i));
    os << buf;
  }
}

SampleBatch read_samples_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("samples: cannot open '" + path + "'");
  std::string line;
  SampleBatch batch;
  std::vector<double> xs, ys;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
    std::istringstream ss(line);
    double a, b;
    char comma;
    if (ss >> a >> comma >> b) {
      xs.push_back(a);
      ys.push_back(b);
    }
  }
  batch.points.resize(2, static_cast<long>(xs.size()));
  for (size_t i = 0; i < xs.size(); ++i) {
    batch.points(0, static_cast<long>(i)) = xs[i];
    batch.points(1, static_cast<long>(i)) = ys[i];
  }
  return batch;
}

}  // namespace scoreflow
