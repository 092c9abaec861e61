#include "helpers.hpp"
#include "rlang/limits.hpp"

#include <doctest.h>

#include <cmath>

using namespace rlang;

namespace {

ExperimentRun coarse(double dt = 1e-3) {
  ExperimentRun r;
  r.scheme.dt = dt;
  return r;
}

}  // namespace

TEST_SUITE("limits") {

TEST_CASE("cutoff profile: range, plateaus, monotone, C1 seams") {
  const double R = 5.0;
  double prev = 1.0;
  for (int k = 0; k <= 10000; ++k) {
    const double t = 8.0 * k / 10000.0;
    const double th = cutoff_theta(t, R);
    REQUIRE(th >= 0.0);
    REQUIRE(th <= 1.0);
    REQUIRE(th <= prev);
    REQUIRE(cutoff_theta(-t, R) == th);
    if (t <= R) REQUIRE(th == 1.0);
    if (t >= R + 1) REQUIRE(th == 0.0);
    prev = th;
  }
  for (double seam : {R, R + 1}) {
    const double h = 1e-6;
    CHECK(std::abs(cutoff_theta_derivative(seam + h, R)) < 1e-9);
    CHECK(std::abs(cutoff_theta_derivative(seam - h, R)) < 1e-9);
  }
  for (int k = 1; k < 100; ++k) {
    const double t = R + k / 100.0, h = 1e-6;
    const double fd = (cutoff_theta(t + h, R) - cutoff_theta(t - h, R)) / (2 * h);
    REQUIRE(std::abs(fd - cutoff_theta_derivative(t, R)) < 1e-7);
  }
  CHECK_THROWS_AS(CutoffSpec{2.0}.validate(), ParameterError);
}

TEST_CASE("truncated drift equals the full drift bit for bit where the cutoff is one") {
  Rng rng(1);
  const double R = 10.0;
  for (Index n : {1, 2, 3}) {
    const ModelSpec m = test::model(n, 3, 0.05);
    for (int k = 0; k < 500; ++k) {
      const StateD x = test::random_state(m, rng, 2.0, 2.0, 1.0 / R);
      bool inside = true;
      for (Index i = 0; i < n; ++i) inside = inside && x.q.row(i).norm() <= R;
      if (!inside) continue;
      const auto a = drift(DriftKind::relativistic(0.05), m, x);
      const auto b = drift(DriftKind::relativistic_truncated(0.05, R), m, x);
      REQUIRE(a.dq == b.dq);
      REQUIRE(a.dp == b.dp);
    }
  }
}

TEST_CASE("confining force vanishes beyond R + 1") {
  const ModelSpec m = test::model(1, 2, 0.1);
  StateD x(1, 2);
  x.q(0, 0) = 11.0;
  MatrixXr f;
  conservative_force(m, DriftKind::relativistic_truncated(0.1, 10.0), x.q, f);
  CHECK(f.norm() == 0.0);
}

TEST_CASE("truncated coulomb force is bounded") {
  const TruncatedModel t = truncate_model(test::model(2, 3, 0.1), 10.0, 4000, 3);
  CHECK(std::isfinite(t.force_bound));
  CHECK(t.force_bound > 0);
  CHECK(std::isfinite(t.lipschitz_estimate));
}

TEST_CASE("log-log fit recovers an exact power law") {
  RateFit f;
  f.eps = {1e-1, 1e-2, 1e-3};
  for (double e : f.eps) f.statistic.push_back(3.0 * std::pow(e, 1.5));
  fit_loglog(f);
  CHECK(f.slope == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0));
}

TEST_CASE("repeated eps values reuse the same seeds") {
  const ModelSpec m = test::model(1, 1, 0.1);
  const auto fits = newtonian_rate_experiment(m, 10.0, default_state(m), 0.5, {1e-1, 1e-2, 1e-1, 1e-3}, {1.0, 2.0}, 10, 5, coarse());
  for (const RateFit& f : fits) {
    CHECK(f.statistic[0] == f.statistic[2]);
    CHECK(f.stderr_[0] == f.stderr_[2]);
  }
}

TEST_CASE("a single eps leaves the fit undefined") {
  const ModelSpec m = test::model(1, 1, 0.1);
  const RateFit f = newtonian_rate_experiment(m, 10.0, default_state(m), 0.2, {1e-2}, 1.0, 5, 1, coarse());
  CHECK_FALSE(f.ok);
  CHECK(!f.failure.empty());
}

TEST_CASE("small rate experiment has the expected slopes") {
  const ModelSpec m = test::model(1, 1, 0.1);
  const auto fits = newtonian_rate_experiment(m, 10.0, default_state(m), 1.0, {1e-1, 1e-2, 1e-3}, {1.0, 2.0}, 40, 2, coarse());
  REQUIRE(fits[0].ok);
  REQUIRE(fits[1].ok);
  CHECK(fits[0].slope >= 0.8);
  CHECK(fits[0].slope <= 1.2);
  CHECK(fits[1].slope >= 1.6);
  CHECK(fits[1].slope <= 2.4);
}

TEST_CASE("exceedance probability at the trivial thresholds") {
  const ModelSpec m = test::model(2, 2, 0.1);
  const ProbCurve zero = prob_convergence_experiment(m, default_state(m), 0.2, 0.0, {1e-1, 1e-2}, 20, 1, coarse());
  for (const auto& p : zero.points) CHECK(p.phat == 1.0);
  const ProbCurve inf = prob_convergence_experiment(m, default_state(m), 0.2, kInf, {1e-1, 1e-2}, 20, 1, coarse());
  for (const auto& p : inf.points) {
    CHECK(p.phat == 0.0);
    CHECK(p.lo == 0.0);
  }
}

TEST_CASE("wilson interval contains the estimate and stays in [0, 1]") {
  Rng rng(4);
  for (int k = 0; k < 1000; ++k) {
    const Index n = 1 + rng.below(500), s = rng.below(n + 1);
    const auto [lo, hi] = wilson_interval(s, n);
    const double ph = double(s) / double(n);
    REQUIRE(lo >= 0.0);
    REQUIRE(hi <= 1.0);
    REQUIRE(lo <= ph + 1e-15);
    REQUIRE(hi >= ph - 1e-15);
  }
  CHECK(wilson_interval(0, 400).first == 0.0);
  CHECK(wilson_interval(400, 400).second == 1.0);
}

TEST_CASE("gamma1 is constant on a noise-free rest state") {
  const ModelSpec m = test::model(1, 2, 0.1);
  Scheme s;
  s.dissipative = false;
  const Trajectory tr = simulate(m, DriftKind::langevin(), s, StateD(1, 2), 1.0, 1);
  const MomentSeries ms = moment_monitor(m, DriftKind::langevin(), tr);
  REQUIRE(ms.values.size() == tr.size());
  for (double v : ms.values) CHECK(v == ms.values.front());
}

TEST_CASE("gamma2 dominates the newtonian energy") {
  Rng rng(6);
  for (int k = 0; k < 5000; ++k) {
    const ModelSpec m = test::model(1 + rng.below(3), 2, rng.log_uniform(1e-3, 1.0));
    const StateD x = test::random_state(m, rng, 2.0, rng.log_uniform(0.1, 100.0));
    double newton = potential_energy(m, x.q) + 0.5 * x.p.squaredNorm();
    REQUIRE(gamma2(m, m.epsilon, x) >= newton * (1 - 1e-14));
  }
}

}  // TEST_SUITE
