#pragma once

#include <functional>
#include <string>

#include "scoreflow/common.hpp"

namespace scoreflow {

// Normalized histogram on a square domain; mass indexed row-major by
// iy * resolution + ix, cells closed at the lower edge.
struct GridDistribution {
  int resolution = 64;
  double lo = -2.0, hi = 2.0;
  VectorXd mass;
  long out_of_domain = 0;
  long total_samples = 0;

  double cell_size() const { return (hi - lo) / resolution; }
  int index(int ix, int iy) const { return iy * resolution + ix; }
  double center_x(int idx) const { return lo + (idx % resolution + 0.5) * cell_size(); }
  double center_y(int idx) const { return lo + (idx / resolution + 0.5) * cell_size(); }
  void validate() const;
};

// Bins samples; out-of-domain points are clipped to boundary cells only while
// their fraction stays below max_oob_frac, otherwise this throws.
GridDistribution grid_histogram(const MatrixXd& points, int resolution, double lo, double hi,
                                double max_oob_frac = 1e-3);

// Cell masses from a density by sub-cell quadrature (sub x sub midpoints).
GridDistribution grid_from_density(const std::function<double(double, double)>& density,
                                   int resolution, double lo, double hi, int sub = 4);

GridDistribution downsample(const GridDistribution& g, int factor);

void write_grid_csv(const std::string& path, const GridDistribution& g);
GridDistribution read_grid_csv(const std::string& path);
void write_grid_pgm(const std::string& path, const GridDistribution& g);

}  // namespace scoreflow
