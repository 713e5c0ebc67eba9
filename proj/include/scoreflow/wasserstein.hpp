#pragma once

#include <vector>

#include "scoreflow/grid.hpp"
#include "scoreflow/sde.hpp"

namespace scoreflow {

struct DiscreteMeasure {
  MatrixXd points;  // d x n
  VectorXd mass;

  long size() const { return mass.size(); }
};

// Cells with positive mass only; the solver never sees empty cells.
DiscreteMeasure measure_from_grid(const GridDistribution& g);

// Exact optimal transport with squared Euclidean cost via the transportation
// simplex. Intended for small supports (up to ~1000 points per side).
// Returns the squared W2 distance.
double w2sq_exact(const DiscreteMeasure& a, const DiscreteMeasure& b);
double w2_exact_small(const DiscreteMeasure& a, const DiscreteMeasure& b);

struct SinkhornOptions {
  double epsilon = 5e-3;        // final regularization, in squared-distance units
  double tol = 1e-10;           // marginal L1 stopping tolerance
  int max_iters = 4000;         // per epsilon level
  bool debias = true;
};

// Log-domain Sinkhorn with epsilon scaling; with debiasing this approximates
// the unregularized cost closely. Returns squared W2.
double w2sq_sinkhorn(const DiscreteMeasure& a, const DiscreteMeasure& b,
                     const SinkhornOptions& opt = {});

double w2_grid(const GridDistribution& a, const GridDistribution& b,
               const SinkhornOptions& opt = {});
double w2sq_grid(const GridDistribution& a, const GridDistribution& b,
                 const SinkhornOptions& opt = {});

double spearman_rank_correlation(const std::vector<std::pair<double, double>>& pairs);

struct CurlField {
  int resolution = 64;
  double lo = -2.0, hi = 2.0;
  double time = 0.0;
  VectorXd values;  // row-major like GridDistribution

  double max_abs() const { return values.cwiseAbs().maxCoeff(); }
  double median_abs() const;
};

// Pointwise d s2/dx1 - d s1/dx2 at cell centers from the exact Jacobian.
CurlField curl_field(const ScoreJetField& score, double t, int resolution, double lo,
                     double hi);

void write_curl_csv(const std::string& path, const CurlField& field);

}  // namespace scoreflow
