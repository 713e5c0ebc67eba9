#include "scoreflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace scoreflow {

void GridDistribution::validate() const {
  if (resolution < 1) throw std::invalid_argument("grid: resolution must be >= 1");
  if (!(hi > lo)) throw std::invalid_argument("grid: empty domain");
  if (mass.size() != static_cast<long>(resolution) * resolution)
    throw std::invalid_argument("grid: mass array size mismatch");
  if (mass.minCoeff() < 0.0) throw std::invalid_argument("grid: negative mass");
  if (std::abs(mass.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("grid: mass does not sum to 1");
}

GridDistribution grid_histogram(const MatrixXd& points, int resolution, double lo, double hi,
                                double max_oob_frac) {
  if (points.cols() < 1) throw std::invalid_argument("grid: no samples");
  if (points.rows() != 2) throw std::invalid_argument("grid: points must be 2-dimensional");
  GridDistribution g;
  g.resolution = resolution;
  g.lo = lo;
  g.hi = hi;
  g.mass = VectorXd::Zero(static_cast<long>(resolution) * resolution);
  g.total_samples = points.cols();
  const double h = g.cell_size();
  for (long i = 0; i < points.cols(); ++i) {
    const double x = points(0, i), y = points(1, i);
    int ix = static_cast<int>(std::floor((x - lo) / h));
    int iy = static_cast<int>(std::floor((y - lo) / h));
    if (ix < 0 || ix >= resolution || iy < 0 || iy >= resolution) ++g.out_of_domain;
    ix = std::clamp(ix, 0, resolution - 1);
    iy = std::clamp(iy, 0, resolution - 1);
    g.mass(g.index(ix, iy)) += 1.0;
  }
  const double frac = static_cast<double>(g.out_of_domain) / points.cols();
  if (frac >= max_oob_frac)
    throw std::runtime_error("grid: " + std::to_string(100.0 * frac) +
                             "% of samples left the domain");
  g.mass /= static_cast<double>(points.cols());
  return g;
}

GridDistribution grid_from_density(const std::function<double(double, double)>& density,
                                   int resolution, double lo, double hi, int sub) {
  GridDistribution g;
  g.resolution = resolution;
  g.lo = lo;
  g.hi = hi;
  g.mass = VectorXd::Zero(static_cast<long>(resolution) * resolution);
  const double h = g.cell_size();
  for (int iy = 0; iy < resolution; ++iy)
    for (int ix = 0; ix < resolution; ++ix) {
      double acc = 0.0;
      for (int sy = 0; sy < sub; ++sy)
        for (int sx = 0; sx < sub; ++sx) {
          const double x = lo + (ix + (sx + 0.5) / sub) * h;
          const double y = lo + (iy + (sy + 0.5) / sub) * h;
          acc += density(x, y);
        }
      g.mass(g.index(ix, iy)) = acc;
    }
  const double total = g.mass.sum();
  if (!(total > 0.0)) throw std::runtime_error("grid: density vanishes on the domain");
  g.mass /= total;
  return g;
}

GridDistribution downsample(const GridDistribution& g, int factor) {
  if (factor < 1 || g.resolution % factor != 0)
    throw std::invalid_argument("grid: downsample factor must divide the resolution");
  GridDistribution out;
  out.resolution = g.resolution / factor;
  out.lo = g.lo;
  out.hi = g.hi;
  out.total_samples = g.total_samples;
  out.mass = VectorXd::Zero(static_cast<long>(out.resolution) * out.resolution);
  for (int iy = 0; iy < g.resolution; ++iy)
    for (int ix = 0; ix < g.resolution; ++ix)
      out.mass(out.index(ix / factor, iy / factor)) += g.mass(g.index(ix, iy));
  return out;
}

void write_grid_csv(const std::string& path, const GridDistribution& g) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("grid: cannot open '" + path + "'");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "# resolution=%d lo=%.17g hi=%.17g\n", g.resolution, g.lo,
                g.hi);
  os << buf;
  for (int iy = 0; iy < g.resolution; ++iy) {
    for (int ix = 0; ix < g.resolution; ++ix) {
      std::snprintf(buf, sizeof(buf), "%.17g", g.mass(g.index(ix, iy)));
      os << buf << (ix + 1 == g.resolution ? "\n" : ",");
    }
  }
}

GridDistribution read_grid_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("grid: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line.rfind("# resolution=", 0) != 0)
    throw std::runtime_error("grid: bad header in '" + path + "'");
  GridDistribution g;
  if (std::sscanf(line.c_str(), "# resolution=%d lo=%lg hi=%lg", &g.resolution, &g.lo, &g.hi) !=
      3)
    throw std::runtime_error("grid: bad header in '" + path + "'");
  g.mass.resize(static_cast<long>(g.resolution) * g.resolution);
  long idx = 0;
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (idx >= g.mass.size()) throw std::runtime_error("grid: too many cells");
      g.mass(idx++) = std::stod(cell);
    }
  }
  if (idx != g.mass.size()) throw std::runtime_error("grid: too few cells");
  return g;
}

void write_grid_pgm(const std::string& path, const GridDistribution& g) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("grid: cannot open '" + path + "'");
  const double peak = g.mass.maxCoeff();
  os << "P5\n" << g.resolution << " " << g.resolution << "\n255\n";
  for (int iy = g.resolution - 1; iy >= 0; --iy)
    for (int ix = 0; ix < g.resolution; ++ix) {
      const double v = peak > 0 ? g.mass(g.index(ix, iy)) / peak : 0.0;
      os.put(static_cast<char>(std::lround(255.0 * v)));
    }
}

}  // namespace scoreflow
