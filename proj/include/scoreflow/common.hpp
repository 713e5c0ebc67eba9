#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace scoreflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

// Stateless counter-based uniform in (0,1); reproducible independent of
// evaluation order or batching.
inline double hash_uniform(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = splitmix64(splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b) ^ c);
  return static_cast<double>(h >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Standard normal from two hashed uniforms (Box-Muller).
inline double hash_normal(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  const double u1 = hash_uniform(seed, a, b, 2 * c);
  const double u2 = hash_uniform(seed, a, b, 2 * c + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Sequential RNG stream for dataset draws and training batches.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  uint64_t next_u64() { return engine_(); }
  int index(int n) {
    return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(engine_));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace scoreflow
