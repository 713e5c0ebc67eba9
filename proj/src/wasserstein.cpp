#include "scoreflow/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace scoreflow {

DiscreteMeasure measure_from_grid(const GridDistribution& g) {
  DiscreteMeasure m;
  const long support = (g.mass.array() > 0.0).count();
  m.points.resize(2, support);
  m.mass.resize(support);
  long k = 0;
  for (long idx = 0; idx < g.mass.size(); ++idx) {
    if (g.mass(idx) <= 0.0) continue;
    m.points(0, k) = g.center_x(static_cast<int>(idx));
    m.points(1, k) = g.center_y(static_cast<int>(idx));
    m.mass(k) = g.mass(idx);
    ++k;
  }
  return m;
}

namespace {

MatrixXd cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const long n = a.size(), m = b.size();
  MatrixXd c(n, m);
  for (long j = 0; j < m; ++j)
    for (long i = 0; i < n; ++i) c(i, j) = (a.points.col(i) - b.points.col(j)).squaredNorm();
  return c;
}

// Transportation simplex with tree-structured basis. Dantzig pricing with a
// Bland fallback after long degenerate streaks, which guarantees termination.
class TransportSimplex {
 public:
  TransportSimplex(const VectorXd& supply, const VectorXd& demand, const MatrixXd& cost)
      : a_(supply), b_(demand), c_(cost), m_(supply.size()), n_(demand.size()) {}

  double solve() {
    northwest_corner();
    const double tol = 1e-12 * (1.0 + c_.cwiseAbs().maxCoeff());
    int degenerate_streak = 0;
    for (long pivot = 0;; ++pivot) {
      if (pivot > 8 * (m_ + n_) * (m_ + n_) + 100000)
        throw std::runtime_error("transport simplex: pivot limit exceeded");
      compute_duals();
      const bool bland = degenerate_streak > 64;
      long ei = -1, ej = -1;
      if (bland) {
        // first negative cell in row-major order
        for (long i = 0; i < m_ && ei < 0; ++i)
          for (long j = 0; j < n_; ++j)
            if (c_(i, j) - u_(i) - v_(j) < -tol) {
              ei = i;
              ej = j;
              break;
            }
      } else {
        double best = -tol;
        for (long i = 0; i < m_; ++i)
          for (long j = 0; j < n_; ++j) {
            const double rc = c_(i, j) - u_(i) - v_(j);
            if (rc < best) {
              best = rc;
              ei = i;
              ej = j;
            }
          }
      }
      if (ei < 0) break;  // optimal
      const double moved = pivot_on(ei, ej, bland);
      degenerate_streak = moved > 0.0 ? 0 : degenerate_streak + 1;
    }
    double total = 0.0;
    for (const auto& e : edges_)
      if (e.in_basis) total += e.flow * c_(e.i, e.j);
    return total;
  }

 private:
  struct Edge {
    long i, j;
    double flow = 0.0;
    bool in_basis = false;
  };

  void add_edge(long i, long j, double flow) {
    Edge e{i, j, flow, true};
    edges_.push_back(e);
    const long id = static_cast<long>(edges_.size()) - 1;
    adj_[i].push_back(id);
    adj_[m_ + j].push_back(id);
  }

  void northwest_corner() {
    adj_.assign(m_ + n_, {});
    edges_.clear();
    VectorXd ra = a_, rb = b_;
    long i = 0, j = 0;
    while (true) {
      const double v = std::min(ra(i), rb(j));
      add_edge(i, j, v);
      ra(i) -= v;
      rb(j) -= v;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (i < m_ - 1 && (ra(i) <= rb(j) || j == n_ - 1))
        ++i;
      else
        ++j;
    }
  }

  void compute_duals() {
    u_.setConstant(m_, std::numeric_limits<double>::quiet_NaN());
    v_.setConstant(n_, std::numeric_limits<double>::quiet_NaN());
    parent_node_.assign(m_ + n_, -1);
    parent_edge_.assign(m_ + n_, -1);
    depth_.assign(m_ + n_, 0);
    u_(0) = 0.0;
    std::vector<long> stack{0};
    while (!stack.empty()) {
      const long node = stack.back();
      stack.pop_back();
      for (long id : adj_[node]) {
        const Edge& e = edges_[id];
        if (!e.in_basis) continue;
        const long other = (node < m_) ? m_ + e.j : e.i;
        if (parent_node_[other] >= 0 || other == 0) continue;
        parent_node_[other] = node;
        parent_edge_[other] = id;
        depth_[other] = depth_[node] + 1;
        if (other >= m_)
          v_(other - m_) = c_(e.i, e.j) - u_(e.i);
        else
          u_(other) = c_(e.i, e.j) - v_(e.j);
        stack.push_back(other);
      }
    }
    if (u_.hasNaN() || v_.hasNaN())
      throw std::runtime_error("transport simplex: basis not spanning");
  }

  // Adds (ei, ej) to the basis, shifts flow around the unique cycle, and
  // removes a blocking edge. Returns the amount of flow moved.
  double pivot_on(long ei, long ej, bool bland) {
    // tree path from node ei to node m_+ej
    long x = ei, y = m_ + ej;
    std::vector<long> up_x, up_y;  // edge ids
    while (depth_[x] > depth_[y]) {
      up_x.push_back(parent_edge_[x]);
      x = parent_node_[x];
    }
    while (depth_[y] > depth_[x]) {
      up_y.push_back(parent_edge_[y]);
      y = parent_node_[y];
    }
    while (x != y) {
      up_x.push_back(parent_edge_[x]);
      up_y.push_back(parent_edge_[y]);
      x = parent_node_[x];
      y = parent_node_[y];
    }
    // cycle: entering edge, then path m_+ej -> apex -> ei. Cells alternate
    // sign; a tree cell gets '-' iff its position in the alternation is odd.
    std::vector<long> cycle;  // edge ids in cycle order starting after entering
    cycle.insert(cycle.end(), up_y.begin(), up_y.end());
    cycle.insert(cycle.end(), up_x.rbegin(), up_x.rend());

    double theta = std::numeric_limits<double>::infinity();
    long leaving = -1;
    for (size_t k = 0; k < cycle.size(); k += 2) {  // even positions are '-' cells
      const Edge& e = edges_[cycle[k]];
      const bool tie = leaving >= 0 && e.flow == theta;
      const bool lower_index =
          tie && (e.i * n_ + e.j) < (edges_[leaving].i * n_ + edges_[leaving].j);
      if (e.flow < theta || (bland && lower_index)) {
        theta = e.flow;
        leaving = cycle[k];
      }
    }
    if (leaving < 0) throw std::runtime_error("transport simplex: unbounded pivot");

    for (size_t k = 0; k < cycle.size(); ++k)
      edges_[cycle[k]].flow += (k % 2 == 0) ? -theta : theta;
    edges_[leaving].in_basis = false;
    add_edge(ei, ej, theta);
    return theta;
  }

  VectorXd a_, b_;
  const MatrixXd& c_;
  long m_, n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<long>> adj_;
  VectorXd u_, v_;
  std::vector<long> parent_node_, parent_edge_;
  std::vector<long> depth_;
};

}  // namespace

double w2sq_exact(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("w2: empty measure");
  if (std::abs(a.mass.sum() - b.mass.sum()) > 1e-9)
    throw std::invalid_argument("w2: total masses differ");
  VectorXd sa = a.mass, sb = b.mass;
  sb *= sa.sum() / sb.sum();
  const MatrixXd c = cost_matrix(a, b);
  TransportSimplex simplex(sa, sb, c);
  return simplex.solve() / sa.sum();
}

double w2_exact_small(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return std::sqrt(std::max(0.0, w2sq_exact(a, b)));
}

namespace {

// One Sinkhorn phase at fixed epsilon in the log domain; returns the L1 error
// of the b-marginal at exit. f and g are warm-started across epsilon levels.
double sinkhorn_phase(const MatrixXd& c, const VectorXd& loga, const VectorXd& logb,
                      double eps, double tol, int max_iters, VectorXd& f, VectorXd& g,
                      MatrixXd& work) {
  const long n = loga.size(), m = logb.size();
  double err = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    // g-update: column logsumexp of (f_i - C_ij)/eps + loga_i
    work = (-c / eps).colwise() + (f / eps + loga);
    VectorXd colmax = work.colwise().maxCoeff();
    VectorXd lse(m);
    for (long j = 0; j < m; ++j)
      lse(j) = colmax(j) + std::log((work.col(j).array() - colmax(j)).exp().sum());
    g = -eps * lse;
    // f-update: row logsumexp of (g_j - C_ij)/eps + logb_j
    work = (-c / eps).rowwise() + (g / eps + logb).transpose();
    VectorXd rowmax = work.rowwise().maxCoeff();
    VectorXd lse2(n);
    for (long i = 0; i < n; ++i)
      lse2(i) = rowmax(i) + std::log((work.row(i).array() - rowmax(i)).exp().sum());
    f = -eps * lse2;
    if (iter % 5 == 4 || iter == max_iters - 1) {
      // after the f-update the a-marginal is exact; check the b-marginal:
      // sum_i P_ij = exp(lse_j + g_j/eps + logb_j) with P the transport plan
      work = (-c / eps).colwise() + (f / eps + loga);
      err = 0.0;
      for (long j = 0; j < m; ++j) {
        const double cm = work.col(j).maxCoeff();
        const double lse = cm + std::log((work.col(j).array() - cm).exp().sum());
        err += std::abs(std::exp(lse + g(j) / eps + logb(j)) - std::exp(logb(j)));
      }
      if (err < tol) return err;
    }
  }
  return err;
}

double sharp_cost(const MatrixXd& c, const VectorXd& loga, const VectorXd& logb, double eps,
                  const VectorXd& f, const VectorXd& g, MatrixXd& work) {
  work = (((-c / eps).colwise() + (f / eps + loga)).rowwise() +
          (g / eps + logb).transpose());
  return (work.array().exp() * c.array()).sum();
}

double ot_sharp(const DiscreteMeasure& a, const DiscreteMeasure& b,
                const SinkhornOptions& opt) {
  const MatrixXd c = cost_matrix(a, b);
  const VectorXd loga = a.mass.array().log();
  const VectorXd logb = b.mass.array().log();
  VectorXd f = VectorXd::Zero(a.size()), g = VectorXd::Zero(b.size());
  MatrixXd work;

  const double cmax = c.maxCoeff();
  double eps = std::max(opt.epsilon, cmax / 8.0);
  while (true) {
    const bool final_level = eps <= opt.epsilon * (1.0 + 1e-12);
    const double tol = final_level ? opt.tol : std::max(opt.tol, 1e-5);
    sinkhorn_phase(c, loga, logb, eps, tol, final_level ? opt.max_iters : 200, f, g, work);
    if (final_level) break;
    eps = std::max(eps / 2.0, opt.epsilon);
  }
  return sharp_cost(c, loga, logb, opt.epsilon, f, g, work);
}

}  // namespace

namespace {

// Canonical argument order makes the estimate exactly symmetric even when the
// final Sinkhorn phase stops at its iteration cap.
bool measure_less(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (long i = 0; i < a.size(); ++i) {
    if (a.mass(i) != b.mass(i)) return a.mass(i) < b.mass(i);
    for (int k = 0; k < a.points.rows(); ++k)
      if (a.points(k, i) != b.points(k, i)) return a.points(k, i) < b.points(k, i);
  }
  return false;
}

}  // namespace

double w2sq_sinkhorn(const DiscreteMeasure& a, const DiscreteMeasure& b,
                     const SinkhornOptions& opt) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("w2: empty measure");
  if (std::abs(a.mass.sum() - b.mass.sum()) > 1e-9)
    throw std::invalid_argument("w2: total masses differ");
  const DiscreteMeasure& lo = measure_less(b, a) ? b : a;
  const DiscreteMeasure& hi = measure_less(b, a) ? a : b;
  double s = ot_sharp(lo, hi, opt);
  if (opt.debias) s -= 0.5 * (ot_sharp(lo, lo, opt) + ot_sharp(hi, hi, opt));
  return std::max(0.0, s);
}

double w2sq_grid(const GridDistribution& a, const GridDistribution& b,
                 const SinkhornOptions& opt) {
  if (a.resolution != b.resolution || a.lo != b.lo || a.hi != b.hi)
    throw std::invalid_argument("w2: grids must share resolution and domain");
  return w2sq_sinkhorn(measure_from_grid(a), measure_from_grid(b), opt);
}

double w2_grid(const GridDistribution& a, const GridDistribution& b,
               const SinkhornOptions& opt) {
  return std::sqrt(w2sq_grid(a, b, opt));
}

double spearman_rank_correlation(const std::vector<std::pair<double, double>>& pairs) {
  const long n = static_cast<long>(pairs.size());
  if (n < 3) throw std::invalid_argument("spearman: need at least 3 pairs");
  auto ranks = [n](auto proj, const std::vector<std::pair<double, double>>& p) {
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](long i, long j) { return proj(p[i]) < proj(p[j]); });
    VectorXd r(n);
    long i = 0;
    while (i < n) {
      long j = i;
      while (j + 1 < n && proj(p[order[j + 1]]) == proj(p[order[i]])) ++j;
      const double avg = 0.5 * (i + j) + 1.0;  // average rank for ties
      for (long k = i; k <= j; ++k) r(order[k]) = avg;
      i = j + 1;
    }
    return r;
  };
  const VectorXd ra = ranks([](const auto& p) { return p.first; }, pairs);
  const VectorXd rb = ranks([](const auto& p) { return p.second; }, pairs);
  const VectorXd da = ra.array() - ra.mean();
  const VectorXd db = rb.array() - rb.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (denom == 0.0) return 0.0;
  return da.dot(db) / denom;
}

double CurlField::median_abs() const {
  std::vector<double> v(values.data(), values.data() + values.size());
  for (auto& x : v) x = std::abs(x);
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

CurlField curl_field(const ScoreJetField& score, double t, int resolution, double lo,
                     double hi) {
  if (score.dimension() != 2) throw std::invalid_argument("curl: requires dimension 2");
  CurlField field;
  field.resolution = resolution;
  field.lo = lo;
  field.hi = hi;
  field.time = t;
  field.values.resize(static_cast<long>(resolution) * resolution);
  const double h = (hi - lo) / resolution;
  for (int iy = 0; iy < resolution; ++iy)
    for (int ix = 0; ix < resolution; ++ix) {
      VectorXd x(2);
      x << lo + (ix + 0.5) * h, lo + (iy + 0.5) * h;
      const ScoreJet sj = score.jet(x, t);
      field.values(iy * static_cast<long>(resolution) + ix) = sj.jac(1, 0) - sj.jac(0, 1);
    }
  if (!field.values.allFinite()) throw std::runtime_error("curl: non-finite values");
  return field;
}

void write_curl_csv(const std::string& path, const CurlField& field) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("curl: cannot open '" + path + "'");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "# resolution=%d lo=%.17g hi=%.17g t=%.17g\n",
                field.resolution, field.lo, field.hi, field.time);
  os << buf;
  for (int iy = 0; iy < field.resolution; ++iy) {
    for (int ix = 0; ix < field.resolution; ++ix) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    field.values(iy * static_cast<long>(field.resolution) + ix));
      os << buf << (ix + 1 == field.resolution ? "\n" : ",");
    }
  }
}

}  // namespace scoreflow
