#include "helpers.hpp"
#include "rlang/ergodicity.hpp"

#include <doctest.h>

#include <cmath>

using namespace rlang;

namespace {

ModelSpec free_particle(double eps) { return test::model(1, 3, eps); }

double z_of(const ChainMean& c, double target) { return (c.mean - target) / c.se; }

}  // namespace

TEST_SUITE("ergodicity") {

TEST_CASE("sampler is deterministic and thread independent") {
  const ModelSpec m = test::model(2, 2, 0.05);
  SamplerOptions one, many;
  many.threads = 8;
  const StationarySample a = sample_stationary(m, 2000, 8, 200, 3, one);
  const StationarySample b = sample_stationary(m, 2000, 8, 200, 3, many);
  REQUIRE(a.states.size() == 2000);
  REQUIRE(b.states.size() == 2000);
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    REQUIRE(a.states[k].q == b.states[k].q);
    REQUIRE(a.states[k].p == b.states[k].p);
  }
  CHECK(a.ess == b.ess);
  CHECK(a.q_acceptance == b.q_acceptance);
}

TEST_CASE("momentum draws: symmetric, gaussian limit for small eps") {
  for (double eps : {0.3, 0.05, 1e-4}) {
    Rng rng(7);
    const Index d = 3, n = 100000;
    const double scale = momentum_proposal_scale(d, eps);
    RowVectorXr p(d);
    Eigen::ArrayXd s = Eigen::ArrayXd::Zero(d), s2 = Eigen::ArrayXd::Zero(d), s4 = Eigen::ArrayXd::Zero(d);
    for (Index k = 0; k < n; ++k) {
      draw_momentum(d, eps, scale, rng, p);
      s += p.transpose().array();
      s2 += p.transpose().array().square();
      s4 += p.transpose().array().square().square();
    }
    for (Index c = 0; c < d; ++c) {
      const double m2 = s2(c) / n;
      CHECK(std::abs(s(c) / n) <= 3 * std::sqrt(m2 / n));
      if (eps == 1e-4) {
        const double se = std::sqrt((s4(c) / n - m2 * m2) / n);
        CHECK(std::abs(m2 - 1.0) <= 3 * se + 1e-3);
      }
    }
  }
}

TEST_CASE("momentum second moment matches the radial integral") {
  // E|p|^2 under exp(-sqrt(1+eps r^2)/eps) r^(d-1), by quadrature
  const double eps = 0.2;
  const Index d = 3;
  double num = 0, den = 0;
  const double h = 1e-3;
  for (double r = h / 2; r < 200; r += h) {
    const double w = std::exp(-(std::sqrt(1 + eps * r * r) - 1) / eps) * r * r;
    num += w * r * r;
    den += w;
  }
  Rng rng(9);
  const Index n = 100000;
  RowVectorXr p(d);
  double s = 0, s2 = 0;
  for (Index k = 0; k < n; ++k) {
    draw_momentum(d, eps, momentum_proposal_scale(d, eps), rng, p);
    s += p.squaredNorm();
    s2 += p.squaredNorm() * p.squaredNorm();
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - num / den) <= 3 * se);
}

TEST_CASE("coulomb pair sample is exchangeable") {
  const ModelSpec m = test::model(2, 2, 0.05);
  const StationarySample s = sample_stationary(m, 20000, 32, 500, 5);
  std::vector<double> dq, dp;
  for (const StateD& x : s.states) {
    dq.push_back(x.q.row(0).squaredNorm() - x.q.row(1).squaredNorm());
    dp.push_back(x.p.row(0).squaredNorm() - x.p.row(1).squaredNorm());
  }
  CHECK(std::abs(z_of(chain_mean(s, dq), 0.0)) <= 2.576);
  CHECK(std::abs(z_of(chain_mean(s, dp), 0.0)) <= 2.576);
  CHECK_FALSE(s.degenerate);
}

TEST_CASE("a bump that misses the sample has mean exactly zero") {
  const ModelSpec m = free_particle(0.05);
  const StationarySample s = sample_stationary(m, 2000, 8, 200, 1);
  Bump far{MatrixXr::Zero(1, 3), 0.0, MatrixXr::Constant(1, 3, 500.0), 1.0, "far"};
  const StationarityReport r = stationarity_check(m, {far}, s);
  REQUIRE(r.items.size() == 1);
  CHECK(r.items[0].mean == 0.0);
  CHECK(r.items[0].support_hits == 0);
  CHECK_FALSE(r.items[0].pass);
}

TEST_CASE("bump jets match finite differences") {
  Rng rng(2);
  const ModelSpec m = test::model(2, 2, 0.1);
  const Bump b = default_bumps(m)[2];
  const Observable phi = bump_observable(b);
  const Observable fd = Observable::from_value([phi](const StateD& x) { return phi.value(x); }, m);
  int checked = 0;
  for (int k = 0; checked < 200; ++k) {
    const StateD x = test::random_state(m, rng, 0.8, 1.0, 0.6);
    const Jet a = phi(x);
    if (a.value < 1e-3) continue;
    ++checked;
    const double la = generator_apply(m, phi, x), lf = generator_apply(m, fd, x);
    REQUIRE(std::abs(la - lf) <= 1e-5 * (1 + std::abs(la)));
  }
}

TEST_CASE("p-only bumps are rejected when collisions are possible") {
  const ModelSpec m = test::model(2, 2, 0.1);
  Bump p_only{MatrixXr::Zero(2, 2), 0.0, MatrixXr::Zero(2, 2), 2.0, "p"};
  CHECK(!bump_support_problem(m, p_only).empty());
  Bump ball{MatrixXr::Zero(2, 2), 1.0, MatrixXr::Zero(2, 2), 2.0, "ball"};
  CHECK(!bump_support_problem(m, ball).empty());
  for (const Bump& b : default_bumps(m)) CHECK(bump_support_problem(m, b).empty());
  ModelSpec one = free_particle(0.1);
  one.anchored = true;
  for (const Bump& b : default_bumps(one)) CHECK(bump_support_problem(one, b).empty());
}

TEST_CASE("stationarity holds for a single particle and the mismatched control fails") {
  const ModelSpec m = free_particle(0.05);
  const StationarySample s = sample_stationary(m, 100000, 32, 1000, 11);
  const StationarityReport r = stationarity_check(m, default_bumps(m), s);
  for (const auto& it : r.items) {
    CAPTURE(it.name);
    CAPTURE(it.z);
    CHECK(it.pass);
  }
  ModelSpec wrong = m;
  wrong.epsilon = 0.2;
  const StationarySample sw = sample_stationary(wrong, 100000, 32, 1000, 11);
  const StationarityReport rw = stationarity_check(m, default_bumps(m), sw);
  CHECK_FALSE(rw.all_pass);
}

TEST_CASE("constant observable has no mixing distance; a far start does") {
  const ModelSpec m = free_particle(0.05);
  const StationarySample ref = sample_stationary(m, 4000, 16, 500, 2);
  StateD x0(1, 3);
  x0.q(0, 0) = 3.0;
  x0.p(0, 0) = 3.0;
  const MixingCurve c = mixing_curve(m, [](const StateD&) { return 0.5; }, x0, {0.0, 0.5, 1.0}, 200, 3, ref, Scheme{});
  for (const auto& p : c.points) CHECK(p.distance == 0.0);
  const MixingCurve e = mixing_curve(m, energy_observable(m), x0, {0.0, 0.5}, 200, 3, ref, Scheme{});
  CHECK(e.points[0].distance > 3 * e.points[0].se_distance);
}

TEST_CASE("momentum observable relaxes with a positive fitted exponent") {
  const ModelSpec m = free_particle(0.05);
  const StationarySample ref = sample_stationary(m, 20000, 32, 1000, 4);
  Scheme s;
  s.dt = 5e-3;
  const ScalarFn f = [](const StateD& x) { return std::tanh(x.p(0, 0)); };
  const std::vector<double> grid{0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  StateD x0(1, 3);
  x0.q(0, 0) = -1.0;
  x0.p(0, 0) = 3.0;
  const MixingCurve c = mixing_curve(m, f, x0, grid, 2000, 8, ref, s);
  CHECK(c.decreasing);
  CHECK(c.fit_defined);
  CHECK(c.r_hat > 0.0);
  // the linearization is underdamped, so from here the mean of p overshoots and D rebounds
  x0.q(0, 0) = 2.0;
  const MixingCurve o = mixing_curve(m, f, x0, grid, 2000, 8, ref, s);
  CHECK_FALSE(o.decreasing);
}

TEST_CASE("bracket rank is full for every built-in model and flip invariant") {
  Rng rng(3);
  for (const SingularSpec& g : test::builtin_singular())
    for (Index n : {1, 2, 3})
      for (Index d : {1, 2, 3}) {
        const ModelSpec m = test::model(n, d, 0.1, g);
        for (int k = 0; k < 20; ++k) {
          StateD x = test::random_state(m, rng, 1.0, 2.0, 0.3);
          const RankReport r = hypoellipticity_check(m, x);
          REQUIRE(r.rank == 2 * n * d);
          REQUIRE(r.full);
          x.p *= -1.0;
          REQUIRE(hypoellipticity_check(m, x).rank == r.rank);
          REQUIRE(hypoellipticity_check(m, x, true).rank == n * d);
        }
      }
}

TEST_CASE("control paths meet the endpoint, speed and residual bounds") {
  Rng rng(4);
  for (Index n : {1, 2})
    for (Index d : {1, 2, 3})
      for (double eps : {0.25, 0.01}) {
        const ModelSpec m = test::model(n, d, eps);
        const StateD x0 = test::random_state(m, rng, 1.5, 1.5, 0.2);
        const ControlPath path = control_path(m, x0, rng.bits());
        const ControlReport r = verify_control_path(m, x0, path);
        CAPTURE(n);
        CAPTURE(d);
        CHECK(r.end_q_error <= 1e-9);
        CHECK(r.end_p_error <= 1e-9);
        CHECK(r.start_q_error <= 1e-9);
        CHECK(r.start_p_error <= 1e-9);
        CHECK(r.speed_sqrt_eps < 1.0);
        CHECK(r.residual_p <= 1e-6);
        CHECK(r.residual_q <= 1e-6);
        CHECK(r.min_distance > 0.0);
        CHECK(r.passed);
      }
}

TEST_CASE("control targets are ordered along the first axis") {
  StateD x0(3, 2);
  x0.q << 2.0, 0.0, -1.0, 1.0, 0.5, -3.0;
  const MatrixXr t = control_targets(x0);
  CHECK(t(0, 0) == 3.0);
  CHECK(t(1, 0) == 1.0);
  CHECK(t(2, 0) == 2.0);
  CHECK(t.col(1).norm() == 0.0);
}

TEST_CASE("pair-distance sum inequality") {
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    const MatrixXr q = rng.log_uniform(0.01, 10.0) * rng.normal_matrix(2, 3);
    const double gamma = rng.uniform(0.1, 1.0), s = rng.uniform(0.0, 2.0);
    const auto [lhs, rhs] = lemma_a1_sides(q, gamma, s);
    REQUIRE(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
  }
  for (Index n : {3, 5}) {
    const LemmaCensus c = lemma_a1_check(n, 2, 0.5, 1.0, 10000, 7);
    CHECK(c.violations == 0);
    CHECK(c.worst_margin >= -1e-9);
  }
  MatrixXr line = MatrixXr::Zero(3, 2);
  line(0, 0) = -1.0;
  line(2, 0) = 2.0;
  for (double gamma : {0.25, 0.5, 1.0})
    for (double s : {0.0, 1.0, 2.0}) {
      const auto [lhs, rhs] = lemma_a1_sides(line, gamma, s);
      CHECK(lhs - rhs >= 0.0);
    }
}

TEST_CASE("potential versus log-distance inequality") {
  const ModelSpec m = test::model(2, 3, 0.1);
  const LemmaA2Fit f = lemma_a2_fit(m, 5000, 3);
  REQUIRE(f.feasible);
  CHECK(f.census.violations == 0);
  CHECK(f.near_collision_samples > 0);
  CHECK(lemma_a2_certify(m, f.c_G, 2 * f.C_G, 5000, 4).violations == 0);
  // a pair at distance 1e-6
  MatrixXr q = MatrixXr::Zero(2, 3);
  q(0, 0) = 0.3;
  q(1, 0) = 0.3 + 1e-6;
  const double logterm = -std::log(1e-6);
  CHECK(logterm == doctest::Approx(13.8155).epsilon(1e-4));
  const double pot = potential_energy(m, q);
  CHECK(pot > 1e6);
  const double middle = q.rowwise().norm().sum() + f.c_G * logterm;
  const double right = f.c_G * q.rowwise().norm().sum() + f.c_G * logterm;
  CHECK(f.C_G * pot > 1e3 * middle);
  CHECK(middle >= right);
  // far field: the |q_i| terms dominate
  q.setZero();
  q(0, 0) = 50.0;
  q(1, 1) = -60.0;
  const double mid2 = q.rowwise().norm().sum() - f.c_G * std::log((q.row(0) - q.row(1)).norm());
  CHECK(f.C_G * potential_energy(m, q) > 10 * mid2);
  CHECK(mid2 > f.c_G * q.rowwise().norm().sum());
}

}  // TEST_SUITE
