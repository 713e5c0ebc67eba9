#pragma once

#include <string>
#include <vector>

#include "scoreflow/common.hpp"

namespace scoreflow {

enum class DatasetKind { Mixture, Circles, Checkerboard, GaussianOracle };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Mixture;

  // mixture
  std::vector<VectorXd> means;
  std::vector<MatrixXd> covs;
  std::vector<double> weights;

  // circles: uniform angle, Gaussian radius (truncated at 0)
  std::vector<double> radii;
  std::vector<double> ring_weights;
  double radial_std = 0.05;

  // checkerboard: tiles x tiles alternating board on [board_lo, board_hi]^2
  double board_lo = -1.25, board_hi = 1.25;
  int tiles = 4;

  // gaussian oracle
  VectorXd oracle_mean;
  MatrixXd oracle_cov;

  double scale = 1.0;

  static DatasetSpec mixture_default();
  static DatasetSpec circles_default();
  static DatasetSpec checkerboard_default();
  static DatasetSpec gaussian_oracle(const VectorXd& mean, const MatrixXd& cov);
  static DatasetSpec by_name(const std::string& name);  // mixture|circles|checkerboard|gaussian

  std::string name() const;
  void validate() const;
};

class Dataset {
 public:
  explicit Dataset(DatasetSpec spec);

  const DatasetSpec& spec() const { return spec_; }
  int dimension() const { return 2; }

  MatrixXd sample(long n, RngStream& rng) const;  // 2 x n
  double density(const VectorXd& x) const;        // normalized
  bool has_density() const { return true; }

  // true iff x lies in an "on" tile (checkerboard only)
  bool on_tile(const VectorXd& x) const;

 private:
  DatasetSpec spec_;
  std::vector<Eigen::LLT<MatrixXd>> chols_;  // mixture factorizations
  std::vector<double> comp_logdet_;
  double tile_side_ = 0.0;
  int on_count_ = 0;
};

}  // namespace scoreflow
