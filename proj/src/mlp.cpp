#include "scoreflow/mlp.hpp"

#include <cmath>

namespace scoreflow {

std::vector<int> MlpConfig::widths() const {
  std::vector<int> w;
  w.push_back(input_dim);
  for (int h : hidden) w.push_back(h);
  w.push_back(output_dim);
  return w;
}

long MlpConfig::parameter_count() const {
  const auto w = widths();
  long n = 0;
  for (size_t l = 0; l + 1 < w.size(); ++l) n += static_cast<long>(w[l + 1]) * w[l] + w[l + 1];
  return n;
}

void MlpConfig::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("mlp: input/output dimensions must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("mlp: at least one hidden layer required");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("mlp: hidden widths must be >= 1");
  if (activation != "softplus")
    throw std::invalid_argument("mlp: unsupported activation '" + activation + "'");
}

Mlp::Mlp(MlpConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  widths_ = cfg_.widths();
  long off = 0;
  for (size_t l = 0; l + 1 < widths_.size(); ++l) {
    w_off_.push_back(off);
    off += static_cast<long>(widths_[l + 1]) * widths_[l];
    b_off_.push_back(off);
    off += widths_[l + 1];
  }
  theta_ = VectorXd::Zero(off);
}

void Mlp::set_params(const VectorXd& theta) {
  if (theta.size() != theta_.size())
    throw std::invalid_argument("mlp: parameter vector length mismatch");
  theta_ = theta;
}

void Mlp::init(uint64_t seed) {
  RngStream rng(seed);
  for (int l = 0; l < cfg_.num_layers(); ++l) {
    const double bound = std::sqrt(1.0 / widths_[l]);
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    auto b = bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
  }
}

Eigen::Map<const MatrixXd> Mlp::weight(int l) const {
  return {theta_.data() + w_off_[l], widths_[l + 1], widths_[l]};
}
Eigen::Map<const VectorXd> Mlp::bias(int l) const {
  return {theta_.data() + b_off_[l], widths_[l + 1]};
}
Eigen::Map<MatrixXd> Mlp::weight(int l) {
  return {theta_.data() + w_off_[l], widths_[l + 1], widths_[l]};
}
Eigen::Map<VectorXd> Mlp::bias(int l) {
  return {theta_.data() + b_off_[l], widths_[l + 1]};
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softplus_inplace(MatrixXd& m) {
  m = m.unaryExpr([](double v) { return softplus(v); });
}

void sigmoid_into(const MatrixXd& s, MatrixXd& out) {
  out = s.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace scoreflow
