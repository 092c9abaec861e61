#pragma once

#include "rlang/core.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rlang {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Substream k of a master seed. Stable across platforms and releases.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t k) {
  return mix64(mix64(master) ^ mix64(k + 0x632be59bd9b4e019ULL));
}

// mt19937_64 with hand-written transforms so that draws do not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(mix64(seed)) {}

  static Rng substream(std::uint64_t master, std::uint64_t k) { return Rng(substream_seed(master, k)); }

  std::uint64_t bits() { return eng_(); }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1)
  double uniform_open() {
    double u;
    do u = uniform(); while (u == 0.0);
    return u;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Gamma(k, 1) for integer k >= 1
  double gamma_int(int k) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s -= std::log(uniform_open());
    return s;
  }

  Index below(Index n) { return static_cast<Index>(uniform() * static_cast<double>(n)) % n; }

  MatrixXr normal_matrix(Index rows, Index cols) {
    MatrixXr m(rows, cols);
    fill_normal(m);
    return m;
  }

  template <typename Derived>
  void fill_normal(Eigen::DenseBase<Derived>& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = normal();
  }

  RowVectorXr unit_vector(Index d) {
    RowVectorXr v(d);
    double n2 = 0.0;
    do {
      for (Index k = 0; k < d; ++k) v(k) = normal();
      n2 = v.squaredNorm();
    } while (n2 == 0.0);
    return v / std::sqrt(n2);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rlang
