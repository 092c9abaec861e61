#include "helpers.hpp"
#include "rlang/integrate.hpp"
#include "rlang/limits.hpp"

#include <doctest.h>

#include <cmath>

using namespace rlang;

namespace {

Scheme fixed(double dt, Scheme::Tag tag = Scheme::Tag::strang_split) {
  Scheme s;
  s.tag = tag;
  s.dt = dt;
  s.adaptive = false;
  return s;
}

bool same(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size() || a.times != b.times) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a.states[k].q != b.states[k].q || a.states[k].p != b.states[k].p) return false;
  return a.rejections == b.rejections && a.dt_eff == b.dt_eff;
}

// E p(T)^2 for dq = p dt, dp = (-2q - p) dt + sqrt(2) dW from a deterministic start,
// by RK4 on the first and second moment equations.
double ou_second_moment(double q0, double p0, double T) {
  Eigen::Matrix2d A;
  A << 0, 1, -2, -1;
  Eigen::Matrix2d Q = Eigen::Matrix2d::Zero();
  Q(1, 1) = 2.0;
  Eigen::Vector2d mean(q0, p0);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  const int steps = 20000;
  const double h = T / steps;
  auto fm = [&](const Eigen::Vector2d& v) { return Eigen::Vector2d(A * v); };
  auto fc = [&](const Eigen::Matrix2d& c) { return Eigen::Matrix2d(A * c + c * A.transpose() + Q); };
  for (int k = 0; k < steps; ++k) {
    const Eigen::Vector2d m1 = fm(mean), m2 = fm(mean + 0.5 * h * m1), m3 = fm(mean + 0.5 * h * m2),
                          m4 = fm(mean + h * m3);
    mean += h / 6 * (m1 + 2 * m2 + 2 * m3 + m4);
    const Eigen::Matrix2d c1 = fc(cov), c2 = fc(cov + 0.5 * h * c1), c3 = fc(cov + 0.5 * h * c2), c4 = fc(cov + h * c3);
    cov += h / 6 * (c1 + 2 * c2 + 2 * c3 + c4);
  }
  return cov(1, 1) + mean(1) * mean(1);
}

}  // namespace

TEST_SUITE("integrate") {

TEST_CASE("equilibrium is a fixed point without noise") {
  const ModelSpec m = test::model(1, 2, 0.1);
  for (auto tag : {Scheme::Tag::strang_split, Scheme::Tag::euler_maruyama}) {
    const StateD y = step(fixed(0.01, tag), DriftKind::for_model(m), m, StateD(1, 2), 0.01, MatrixXr::Zero(1, 2));
    CHECK(y.q.norm() == 0.0);
    CHECK(y.p.norm() == 0.0);
  }
}

TEST_CASE("noise part of a step scales like sqrt(dt)") {
  const ModelSpec m = test::model(1, 3, 0.1);
  Rng rng(1);
  const MatrixXr xi = rng.normal_matrix(1, 3);
  for (auto tag : {Scheme::Tag::strang_split, Scheme::Tag::euler_maruyama}) {
    double prev = 0.0;
    for (double dt : {1e-4, 1e-6, 1e-8}) {
      const StateD y = step(fixed(dt, tag), DriftKind::for_model(m), m, StateD(1, 3), dt, xi);
      const double moved = (y.p.norm() + y.q.norm()) / std::sqrt(dt);
      CHECK(moved == doctest::Approx(std::sqrt(2.0) * xi.norm()).epsilon(1e-3));
      if (prev > 0) CHECK(moved == doctest::Approx(prev).epsilon(1e-3));
      prev = moved;
    }
  }
}

TEST_CASE("weak accuracy on the quadratic langevin case against exact moments") {
  const ModelSpec m = test::model(1, 1, 0.1);
  StateD x0(1, 1);
  x0.q(0, 0) = 1.0;
  x0.p(0, 0) = 0.5;
  const double T = 1.0;
  const double exact = ou_second_moment(1.0, 0.5, T);
  const Index n = 20000;
  const EnsembleResult e = simulate_ensemble(m, DriftKind::langevin(), fixed(1e-3), x0, T, n, 99, 1,
                                             SimulateOptions{{T}, false});
  REQUIRE(e.failures == 0);
  double s = 0, s2 = 0;
  for (const auto& tr : e.trajectories) {
    const double v = tr->states.back().p.squaredNorm();
    s += v;
    s2 += v * v;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / (n - 1));
  CAPTURE(exact);
  CAPTURE(mean);
  CHECK(std::abs(mean - exact) <= 3 * se);
}

TEST_CASE("strang splitting conserves energy to second order without friction") {
  const ModelSpec m = test::model(2, 2, 0.2);
  StateD x0(2, 2);
  x0.q << -0.8, 0.0, 0.8, 0.1;
  x0.p << 0.0, 0.6, 0.0, -0.6;
  double err[2];
  int k = 0;
  for (double dt : {2e-3, 1e-3}) {
    Scheme s = fixed(dt);
    s.dissipative = false;
    const Trajectory tr = simulate(m, DriftKind::for_model(m), s, x0, 2.0, 1);
    double worst = 0;
    for (double h : tr.hamiltonian) worst = std::max(worst, std::abs(h - tr.hamiltonian.front()));
    for (const StateD& x : tr.states) REQUIRE(min_pair_distance(m, x.q).distance > 0.1);
    err[k++] = worst;
  }
  const double order = std::log2(err[0] / err[1]);
  CAPTURE(err[0]);
  CAPTURE(err[1]);
  CHECK(order >= 1.9);
}

TEST_CASE("adaptive step: free state uses dt_max, interaction cap scales with distance cubed") {
  const ModelSpec m = test::model(2, 3, 0.1);
  StateD x(2, 3);
  x.q(0, 0) = -2.0;
  x.q(1, 0) = 2.0;
  CHECK(adaptive_dt(m, DriftKind::for_model(m), x, 1e-3, {}) == 1e-3);
  x.q(0, 0) = -0.005;
  x.q(1, 0) = 0.005;
  const double a = adaptive_dt(m, DriftKind::for_model(m), x, 1e-3, {});
  x.q(0, 0) = -0.0025;
  x.q(1, 0) = 0.0025;
  const double b = adaptive_dt(m, DriftKind::for_model(m), x, 1e-3, {});
  CHECK(b / a == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("adaptive step shrinks monotonically as the drift grows") {
  const ModelSpec m = test::model(1, 2, 0.1);
  double prev = kInf;
  for (double r : {1.0, 10.0, 1e2, 1e4, 1e6}) {
    StateD x(1, 2);
    x.q(0, 0) = r;
    const double dt = adaptive_dt(m, DriftKind::for_model(m), x, 1.0, {});
    CHECK(dt < prev);
    CHECK(dt > 0);
    prev = dt;
  }
}

TEST_CASE("simulate over zero time returns the initial state only") {
  const ModelSpec m = test::model(2, 3, 0.1);
  const StateD x0 = default_state(m);
  const Trajectory tr = simulate(m, DriftKind::for_model(m), Scheme{}, x0, 0.0, 5);
  REQUIRE(tr.size() == 1);
  CHECK(tr.times[0] == 0.0);
  CHECK(tr.states[0].q == x0.q);
  CHECK(tr.hamiltonian.size() == 1);
  CHECK(tr.dt_eff.size() == 1);
}

TEST_CASE("same seed gives the same trajectory; recorded states stay collision free") {
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const ModelSpec m = test::model(3, 2, rng.uniform(0.01, 1.0));
    const StateD x0 = test::random_state(m, rng);
    const std::uint64_t seed = rng.bits();
    const Trajectory a = simulate(m, DriftKind::for_model(m), Scheme{}, x0, 0.5, seed);
    const Trajectory b = simulate(m, DriftKind::for_model(m), Scheme{}, x0, 0.5, seed);
    REQUIRE(same(a, b));
    REQUIRE(a.times.front() == 0.0);
    REQUIRE(a.hamiltonian.size() == a.size());
    REQUIRE(a.delta_min.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.delta_min[i] >= m.collision_floor);
    for (std::size_t i = 1; i < a.size(); ++i) REQUIRE(a.times[i] > a.times[i - 1]);
  }
}

TEST_CASE("head-on coulomb pair stays above the floor") {
  const ModelSpec m = test::model(2, 3, 0.01);
  StateD x0(2, 3);
  x0.q(0, 0) = -0.5;
  x0.q(1, 0) = 0.5;
  x0.p(0, 0) = 20.0;
  x0.p(1, 0) = -20.0;
  Scheme s;
  s.dt = 1e-2;
  const Trajectory tr = simulate(m, DriftKind::for_model(m), s, x0, 1.0, 7);
  double lo = kInf;
  for (double d : tr.delta_min) lo = std::min(lo, d);
  CHECK(lo > s.policy.delta_floor);
  CHECK(tr.rejections.size() == tr.size());
}

TEST_CASE("self-coupling with the langevin drift on both legs has zero distance") {
  const ModelSpec m = test::model(2, 2, 0.1);
  const CoupledRun r = simulate_coupled(m, DriftKind::langevin(), DriftKind::langevin(), fixed(1e-3), default_state(m), 0.5, 3);
  double sup = 0;
  for (double v : r.sup_distance) sup = std::max(sup, v);
  CHECK(sup <= 1e-10);
  CHECK(r.noise_hash_a == r.noise_hash_b);
}

TEST_CASE("coupled sup distance is nonnegative and nondecreasing; noise identical") {
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const ModelSpec m = test::model(2, 2, 0.1);
    const CoupledRun r = simulate_coupled(m, fixed(1e-3), test::random_state(m, rng), 0.3, rng.log_uniform(1e-3, 0.5), rng.bits());
    REQUIRE(r.noise_hash_a == r.noise_hash_b);
    REQUIRE(r.sup_distance.front() >= 0.0);
    for (std::size_t i = 1; i < r.sup_distance.size(); ++i) REQUIRE(r.sup_distance[i] >= r.sup_distance[i - 1]);
  }
}

TEST_CASE("paired seeds: larger eps gives the larger truncated distance") {
  const ModelSpec m = test::model(1, 1, 0.1);
  const TruncatedModel t = truncate_model(m, 10.0, 500);
  StateD x0(1, 1);
  x0.q(0, 0) = 0.5;
  int wins = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const std::uint64_t seed = substream_seed(17, k);
    DriftKind a = t.relativistic;
    a.epsilon = 1e-2;
    DriftKind b = t.relativistic;
    b.epsilon = 1e-4;
    const CoupledRun ra = simulate_coupled(m, a, t.langevin, fixed(1e-3), x0, 1.0, seed, {false});
    const CoupledRun rb = simulate_coupled(m, b, t.langevin, fixed(1e-3), x0, 1.0, seed, {false});
    wins += ra.sup_distance.back() > rb.sup_distance.back();
  }
  CHECK(wins >= 95);
}

TEST_CASE("ensemble member k is simulate with substream k; threads do not matter") {
  const ModelSpec m = test::model(2, 2, 0.1);
  const StateD x0 = default_state(m);
  const EnsembleResult one = simulate_ensemble(m, DriftKind::for_model(m), Scheme{}, x0, 0.2, 1, 42);
  CHECK(same(*one.trajectories[0], simulate(m, DriftKind::for_model(m), Scheme{}, x0, 0.2, substream_seed(42, 0))));
  const EnsembleResult a = simulate_ensemble(m, DriftKind::for_model(m), Scheme{}, x0, 0.2, 24, 42, 1);
  const EnsembleResult b = simulate_ensemble(m, DriftKind::for_model(m), Scheme{}, x0, 0.2, 24, 42, 8);
  for (std::size_t k = 0; k < 24; ++k) REQUIRE(same(*a.trajectories[k], *b.trajectories[k]));
}

TEST_CASE("ensemble mean agrees with a four times larger ensemble") {
  const ModelSpec m = test::model(1, 2, 0.1);
  const StateD x0 = default_state(m);
  auto stats = [&](Index n, std::uint64_t seed) {
    const EnsembleResult e = simulate_ensemble(m, DriftKind::for_model(m), Scheme{}, x0, 0.5, n, seed, 1, {{0.5}, false});
    double s = 0, s2 = 0;
    for (const auto& tr : e.trajectories) {
      const double v = tr->states.back().p.squaredNorm();
      s += v;
      s2 += v * v;
    }
    const double mean = s / double(n);
    return std::pair{mean, (s2 / double(n) - mean * mean) / double(n - 1)};
  };
  const auto [m1, v1] = stats(2000, 1);
  const auto [m4, v4] = stats(8000, 2);
  CHECK(std::abs(m1 - m4) <= 3 * std::sqrt(v1 + v4));
}

TEST_CASE("model hash is stable under copies and changes with the model") {
  const ModelSpec a = test::model(2, 3, 0.1);
  ModelSpec b = a;
  CHECK(model_hash(a) == model_hash(b));
  b.epsilon = 0.2;
  CHECK(model_hash(a) != model_hash(b));
}

}  // TEST_SUITE
