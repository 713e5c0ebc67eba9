#pragma once

#include <string>
#include <vector>

#include "scoreflow/common.hpp"

namespace scoreflow {

// Fully connected net on (x, t): input_dim = d + 1. Softplus activations
// keep every quantity we differentiate twice continuously differentiable.
struct MlpConfig {
  int input_dim = 3;
  std::vector<int> hidden = {80, 80};
  int output_dim = 1;
  std::string activation = "softplus";

  std::vector<int> widths() const;
  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  long parameter_count() const;
  void validate() const;
  bool operator==(const MlpConfig&) const = default;
};

// Flat parameter vector; per layer: weight (fan_out x fan_in, column-major)
// followed by bias.
class Mlp {
 public:
  explicit Mlp(MlpConfig cfg);

  const MlpConfig& config() const { return cfg_; }
  const std::vector<int>& widths() const { return widths_; }

  VectorXd& params() { return theta_; }
  const VectorXd& params() const { return theta_; }
  void set_params(const VectorXd& theta);

  // Uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)] per layer.
  void init(uint64_t seed);

  Eigen::Map<const MatrixXd> weight(int layer) const;
  Eigen::Map<const VectorXd> bias(int layer) const;
  Eigen::Map<MatrixXd> weight(int layer);
  Eigen::Map<VectorXd> bias(int layer);
  long weight_offset(int layer) const { return w_off_[layer]; }
  long bias_offset(int layer) const { return b_off_[layer]; }

 private:
  MlpConfig cfg_;
  std::vector<int> widths_;
  std::vector<long> w_off_, b_off_;
  VectorXd theta_;
};

// softplus and its first three derivatives, elementwise and overflow-safe
double softplus(double x);
double sigmoid(double x);
void softplus_inplace(MatrixXd& m);
void sigmoid_into(const MatrixXd& s, MatrixXd& out);

}  // namespace scoreflow
