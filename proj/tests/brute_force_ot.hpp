#pragma once

#include <numeric>
#include <stdexcept>

#include "scoreflow/wasserstein.hpp"

namespace scoreflow::testing {

// Exhaustive optimal-transport oracle: enumerate every spanning tree of the
// bipartite support graph (every vertex of the transportation polytope lives
// on one), solve the unique flows by leaf elimination, and keep the cheapest
// feasible plan. Exponential; supports up to ~5x5.
class BruteForceOT {
 public:
  BruteForceOT(const DiscreteMeasure& a, const DiscreteMeasure& b)
      : a_(a), b_(b), m_(static_cast<int>(a.size())), n_(static_cast<int>(b.size())) {
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < n_; ++j)
        cost_.push_back((a.points.col(i) - b.points.col(j)).squaredNorm());
  }

  double solve() {
    best_ = std::numeric_limits<double>::infinity();
    chosen_.clear();
    recurse(0, m_ + n_ - 1);
    if (!std::isfinite(best_)) throw std::logic_error("brute force: no feasible plan");
    return best_ / a_.mass.sum();
  }

 private:
  void recurse(int next_edge, int needed) {
    if (needed == 0) {
      evaluate();
      return;
    }
    if (m_ * n_ - next_edge < needed) return;
    for (int e = next_edge; e <= m_ * n_ - needed; ++e) {
      if (creates_cycle(e)) continue;
      chosen_.push_back(e);
      recurse(e + 1, needed - 1);
      chosen_.pop_back();
    }
  }

  bool creates_cycle(int e) const {
    // union-find over current chosen edges plus e
    std::vector<int> parent(m_ + n_);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    auto join = [&](int u, int v) {
      const int ru = find(u), rv = find(v);
      if (ru == rv) return false;
      parent[ru] = rv;
      return true;
    };
    for (int c : chosen_) join(c / n_, m_ + c % n_);
    return !join(e / n_, m_ + e % n_);
  }

  void evaluate() {
    std::vector<double> rem(m_ + n_);
    for (int i = 0; i < m_; ++i) rem[i] = a_.mass(i);
    for (int j = 0; j < n_; ++j) rem[m_ + j] = b_.mass(j);
    std::vector<int> degree(m_ + n_, 0);
    std::vector<std::vector<int>> adj(m_ + n_);
    for (int e : chosen_) {
      const int u = e / n_, v = m_ + e % n_;
      ++degree[u];
      ++degree[v];
      adj[u].push_back(e);
      adj[v].push_back(e);
    }
    std::vector<bool> done(chosen_.size(), false);
    std::vector<int> leaves;
    for (int v = 0; v < m_ + n_; ++v)
      if (degree[v] == 1) leaves.push_back(v);
    double total = 0.0;
    for (size_t processed = 0; processed < chosen_.size(); ++processed) {
      if (leaves.empty()) return;
      const int v = leaves.back();
      leaves.pop_back();
      int edge = -1;
      size_t slot = 0;
      for (size_t s = 0; s < chosen_.size(); ++s) {
        if (done[s]) continue;
        const int e = chosen_[s];
        if (e / n_ == v || m_ + e % n_ == v) {
          edge = e;
          slot = s;
          break;
        }
      }
      if (edge < 0) return;  // degenerate leaf ordering; tree exhausted early
      const double flow = rem[v];
      if (flow < -1e-12) return;  // infeasible orientation
      const int u = edge / n_, w = m_ + edge % n_;
      const int other = (u == v) ? w : u;
      total += flow * cost_[edge];
      rem[v] = 0.0;
      rem[other] -= flow;
      done[slot] = true;
      if (--degree[other] == 1) leaves.push_back(other);
      degree[v] = 0;
    }
    for (int v = 0; v < m_ + n_; ++v)
      if (std::abs(rem[v]) > 1e-9) return;
    best_ = std::min(best_, total);
  }

  const DiscreteMeasure& a_;
  const DiscreteMeasure& b_;
  int m_, n_;
  std::vector<double> cost_;
  std::vector<int> chosen_;
  double best_ = 0.0;
};

}  // namespace scoreflow::testing
