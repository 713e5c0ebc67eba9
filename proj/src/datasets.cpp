#include "scoreflow/datasets.hpp"

#include <cmath>

namespace scoreflow {

namespace {

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

DatasetSpec DatasetSpec::mixture_default() {
  DatasetSpec s;
  s.kind = DatasetKind::Mixture;
  for (double sx : {-0.8, 0.8})
    for (double sy : {-0.8, 0.8}) {
      s.means.push_back((VectorXd(2) << sx, sy).finished());
      s.covs.push_back(0.02 * MatrixXd::Identity(2, 2));
      s.weights.push_back(0.25);
    }
  return s;
}

DatasetSpec DatasetSpec::circles_default() {
  DatasetSpec s;
  s.kind = DatasetKind::Circles;
  s.radii = {0.5, 1.0};
  s.ring_weights = {0.5, 0.5};
  s.radial_std = 0.05;
  return s;
}

DatasetSpec DatasetSpec::checkerboard_default() {
  DatasetSpec s;
  s.kind = DatasetKind::Checkerboard;
  s.board_lo = -1.25;
  s.board_hi = 1.25;
  s.tiles = 4;
  return s;
}

DatasetSpec DatasetSpec::gaussian_oracle(const VectorXd& mean, const MatrixXd& cov) {
  DatasetSpec s;
  s.kind = DatasetKind::GaussianOracle;
  s.oracle_mean = mean;
  s.oracle_cov = cov;
  return s;
}

DatasetSpec DatasetSpec::by_name(const std::string& name) {
  if (name == "mixture") return mixture_default();
  if (name == "circles") return circles_default();
  if (name == "checkerboard") return checkerboard_default();
  if (name == "gaussian")
    return gaussian_oracle(VectorXd::Zero(2), 0.25 * MatrixXd::Identity(2, 2));
  throw std::invalid_argument("dataset: unknown kind '" + name + "'");
}

std::string DatasetSpec::name() const {
  switch (kind) {
    case DatasetKind::Mixture: return "mixture";
    case DatasetKind::Circles: return "circles";
    case DatasetKind::Checkerboard: return "checkerboard";
    case DatasetKind::GaussianOracle: return "gaussian";
  }
  return "unknown";
}

void DatasetSpec::validate() const {
  if (!(scale > 0.0)) throw std::invalid_argument("dataset: scale must be positive");
  switch (kind) {
    case DatasetKind::Mixture: {
      if (means.empty() || means.size() != covs.size() || means.size() != weights.size())
        throw std::invalid_argument("dataset: mixture component lists inconsistent");
      double total = 0.0;
      for (double w : weights) {
        if (!(w > 0.0)) throw std::invalid_argument("dataset: mixture weights must be positive");
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("dataset: mixture weights must sum to 1");
      break;
    }
    case DatasetKind::Circles: {
      if (radii.empty() || radii.size() != ring_weights.size())
        throw std::invalid_argument("dataset: circle lists inconsistent");
      for (double r : radii)
        if (!(r > 0.0)) throw std::invalid_argument("dataset: radii must be positive");
      if (!(radial_std > 0.0))
        throw std::invalid_argument("dataset: radial std must be positive");
      double total = 0.0;
      for (double w : ring_weights) total += w;
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("dataset: ring weights must sum to 1");
      break;
    }
    case DatasetKind::Checkerboard:
      if (!(board_hi > board_lo)) throw std::invalid_argument("dataset: empty board");
      if (tiles < 2 || tiles % 2 != 0)
        throw std::invalid_argument("dataset: tiles must be even and >= 2");
      break;
    case DatasetKind::GaussianOracle:
      if (oracle_mean.size() != 2 || oracle_cov.rows() != 2 || oracle_cov.cols() != 2)
        throw std::invalid_argument("dataset: oracle moments must be 2-dimensional");
      break;
  }
}

Dataset::Dataset(DatasetSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind == DatasetKind::Mixture) {
    for (const auto& c : spec_.covs) {
      Eigen::LLT<MatrixXd> llt(c);
      chols_.push_back(llt);
      if (llt.info() == Eigen::Success)
        comp_logdet_.push_back(
            2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum());
      else
        comp_logdet_.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  } else if (spec_.kind == DatasetKind::GaussianOracle) {
    chols_.emplace_back(spec_.oracle_cov);
    comp_logdet_.push_back(
        2.0 * chols_[0].matrixL().toDenseMatrix().diagonal().array().log().sum());
  } else if (spec_.kind == DatasetKind::Checkerboard) {
    tile_side_ = (spec_.board_hi - spec_.board_lo) / spec_.tiles;
    on_count_ = spec_.tiles * spec_.tiles / 2;
  }
}

bool Dataset::on_tile(const VectorXd& x) const {
  if (spec_.kind != DatasetKind::Checkerboard) return false;
  const double u = (x(0) / spec_.scale - spec_.board_lo) / tile_side_;
  const double v = (x(1) / spec_.scale - spec_.board_lo) / tile_side_;
  if (u < 0 || v < 0 || u >= spec_.tiles || v >= spec_.tiles) return false;
  const int ix = static_cast<int>(u), iy = static_cast<int>(v);
  return (ix + iy) % 2 == 0;
}

MatrixXd Dataset::sample(long n, RngStream& rng) const {
  if (n < 1) throw std::invalid_argument("dataset: sample count must be >= 1");
  MatrixXd out(2, n);
  switch (spec_.kind) {
    case DatasetKind::Mixture: {
      std::discrete_distribution<int> pick(spec_.weights.begin(), spec_.weights.end());
      for (long i = 0; i < n; ++i) {
        const int c = pick(rng.engine());
        VectorXd z(2);
        z << rng.normal(), rng.normal();
        // LLT of a zero covariance degenerates to the mean point
        if (chols_[c].info() == Eigen::Success)
          out.col(i) = spec_.means[c] + chols_[c].matrixL() * z;
        else
          out.col(i) = spec_.means[c];
      }
      break;
    }
    case DatasetKind::Circles: {
      std::discrete_distribution<int> pick(spec_.ring_weights.begin(),
                                           spec_.ring_weights.end());
      for (long i = 0; i < n; ++i) {
        const int c = pick(rng.engine());
        double r = -1.0;
        while (r <= 0.0) r = spec_.radii[c] + spec_.radial_std * rng.normal();
        const double a = rng.uniform(0.0, 2.0 * M_PI);
        out.col(i) << r * std::cos(a), r * std::sin(a);
      }
      break;
    }
    case DatasetKind::Checkerboard: {
      for (long i = 0; i < n; ++i) {
        const int idx = rng.index(on_count_);
        // enumerate "on" tiles row-major: tile (ix, iy) is on iff (ix+iy) even
        int seen = 0, tx = 0, ty = 0;
        for (int iy = 0; iy < spec_.tiles && seen <= idx; ++iy)
          for (int ix = 0; ix < spec_.tiles && seen <= idx; ++ix)
            if ((ix + iy) % 2 == 0) {
              tx = ix;
              ty = iy;
              ++seen;
            }
        const double x = spec_.board_lo + (tx + rng.uniform()) * tile_side_;
        const double y = spec_.board_lo + (ty + rng.uniform()) * tile_side_;
        out.col(i) << x, y;
      }
      break;
    }
    case DatasetKind::GaussianOracle: {
      for (long i = 0; i < n; ++i) {
        VectorXd z(2);
        z << rng.normal(), rng.normal();
        out.col(i) = spec_.oracle_mean + chols_[0].matrixL() * z;
      }
      break;
    }
  }
  return spec_.scale * out;
}

double Dataset::density(const VectorXd& x) const {
  const VectorXd y = x / spec_.scale;
  const double jac = 1.0 / (spec_.scale * spec_.scale);
  switch (spec_.kind) {
    case DatasetKind::Mixture: {
      double p = 0.0;
      for (size_t c = 0; c < spec_.means.size(); ++c) {
        if (chols_[c].info() != Eigen::Success)
          throw std::domain_error("dataset: density of degenerate mixture component");
        const VectorXd q = chols_[c].matrixL().solve(y - spec_.means[c]);
        p += spec_.weights[c] *
             std::exp(-0.5 * q.squaredNorm() - 0.5 * (2.0 * std::log(2.0 * M_PI) +
                                                      comp_logdet_[c]));
      }
      return p * jac;
    }
    case DatasetKind::Circles: {
      const double rho = y.norm();
      if (rho == 0.0) return 0.0;
      double p = 0.0;
      for (size_t c = 0; c < spec_.radii.size(); ++c) {
        // radius ~ N(r, s^2) truncated to (0, inf), angle uniform
        const double trunc = normal_cdf(spec_.radii[c] / spec_.radial_std);
        p += spec_.ring_weights[c] * normal_pdf(rho, spec_.radii[c], spec_.radial_std) /
             (trunc * 2.0 * M_PI * rho);
      }
      return p * jac;
    }
    case DatasetKind::Checkerboard: {
      if (!on_tile(x)) return 0.0;
      const double area = on_count_ * tile_side_ * tile_side_;
      return jac / area;
    }
    case DatasetKind::GaussianOracle: {
      const VectorXd q = chols_[0].matrixL().solve(y - spec_.oracle_mean);
      return jac * std::exp(-0.5 * q.squaredNorm() -
                            0.5 * (2.0 * std::log(2.0 * M_PI) + comp_logdet_[0]));
    }
  }
  return 0.0;
}

}  // namespace scoreflow
