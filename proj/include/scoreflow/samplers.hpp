#pragma once

#include <string>

#include "scoreflow/sde.hpp"

namespace scoreflow {

struct SamplerConfig {
  long n = 100000;
  int steps = 1000;  // uniform grid on [0, T]
  uint64_t seed = 0;

  void validate() const;
};

struct SampleBatch {
  MatrixXd points;  // d x n, model time t = 0
  uint64_t seed = 0;
  int steps = 0;
  std::string kind;  // "sde" | "ode"

  long size() const { return points.cols(); }
};

// Euler-Maruyama on the reverse-time SDE from the prior at tau = 0 to tau = T.
// Noise is counter-hashed per (particle, step), so results are independent of
// batching and reproducible per seed.
SampleBatch sample_reverse_sde(const ScoreField& score, const SdeSpec& spec,
                               const SamplerConfig& cfg);

// Explicit Euler on the reverse-time probability flow ODE.
SampleBatch sample_ode(const ScoreField& score, const SdeSpec& spec, const SamplerConfig& cfg);

// log p(x, 0) by integrating the flow forward and accumulating the divergence
// of the ODE drift; requires an exact divergence on the score field.
double ode_loglik(const ScoreField& score, const SdeSpec& spec, const VectorXd& x, int steps);
VectorXd ode_loglik_batch(const ScoreField& score, const SdeSpec& spec, const MatrixXd& x,
                          int steps);

double prior_logpdf(const SdeSpec& spec, const VectorXd& x);
MatrixXd sample_prior(const SdeSpec& spec, long n, uint64_t seed);

void write_samples_csv(const std::string& path, const SampleBatch& batch);
SampleBatch read_samples_csv(const std::string& path);

}  // namespace scoreflow
