#pragma once

#include <cstdint>
#include <complex>
#include <random>

#include <Eigen/Dense>

namespace tbm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic per-trial RNG stream. Streams derived from the same master
/// seed but different ids are independent for practical purposes, so trials
/// can run on any thread in any order without changing results.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static RngStream derive(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(master ^ splitmix64(a));
    s = splitmix64(s ^ splitmix64(b));
    s = splitmix64(s ^ splitmix64(c));
    return RngStream(s);
  }

  double uniform() { return unif_(engine_); }
  double normal() { return normal_(engine_); }

  /// CN(0,1): unit-variance circular complex Gaussian.
  std::complex<double> cnormal() {
    const double s = 1.0 / std::sqrt(2.0);
    return {normal() * s, normal() * s};
  }

  Eigen::VectorXcd cnormal_vec(Eigen::Index n) {
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cnormal();
    return v;
  }

  /// Uniform on the complex sphere of radius r in dimension n.
  Eigen::VectorXcd sphere_vec(Eigen::Index n, double r) {
    Eigen::VectorXcd v = cnormal_vec(n);
    return v * (r / v.norm());
  }

  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace tbm
