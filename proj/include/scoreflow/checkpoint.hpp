#pragma once

#include <string>

#include "scoreflow/mlp.hpp"

namespace scoreflow {

// Self-describing container: magic, JSON header, little-endian f64 payload.
// Round-trips bit-exactly. Optimizer moments are optional and present only
// for resumable training checkpoints.
struct Checkpoint {
  int format_version = 1;
  std::string model_kind = "potential";  // potential | score
  MlpConfig config;
  uint64_t seed = 0;
  long iteration = 0;
  VectorXd params;
  bool has_adam = false;
  VectorXd adam_m, adam_v;
  long adam_step = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace scoreflow
