#include "helpers.hpp"
#include "rlang/lyapunov.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace rlang;

namespace {

ModelSpec single(double eps) {
  ModelSpec m = test::model(1, 3, eps);
  m.anchored = true;
  return m;
}

double qp(const StateD& x) { return (x.q.array() * x.p.array()).sum(); }

}  // namespace

TEST_SUITE("lyapunov") {

TEST_CASE("V1 at rest and its odd part") {
  const ModelSpec m = single(0.05);
  const LyapunovParams1 p{0.05, 50.0};
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    StateD x = test::random_state(m, rng, 1.5, 2.0, 0.05);
    const double h = hamiltonian(m, x);
    StateD rest = x;
    rest.p.setZero();
    const double h0 = hamiltonian(m, rest);
    REQUIRE(v1(m, p, rest) == doctest::Approx(h0 * h0 + 50.0).epsilon(1e-14));
    StateD flip = x;
    flip.p *= -1.0;
    const double s = qp(x), r = x.q.norm();
    const double odd = v1(m, p, x) - v1(m, p, flip);
    REQUIRE(std::abs(odd - 2.0 * (0.05 * s - s / r)) <= 1e-10 * (h * h + std::abs(s) / r));
  }
}

TEST_CASE("V1 is sandwiched by H^2 with constants fitted on one sample and checked on another") {
  const ModelSpec m = single(0.01);
  const LyapunovParams1 p{0.01, 200.0};
  const RegionSampler sampler;
  auto draw = [&](std::uint64_t seed) {
    Rng rng(seed);
    std::vector<StateD> xs;
    for (int k = 0; k < 100000; ++k) xs.push_back(sampler.draw(m, k % 3, rng));
    return xs;
  };
  // upper: V1 <= C H^2 + C; lower: V1 >= c H^2 - C with c = 1/2
  double C = 0;
  for (const StateD& x : draw(1)) {
    const double h = hamiltonian(m, x), v = v1(m, p, x);
    C = std::max({C, v / (h * h + 1.0), 0.5 * h * h - v});
  }
  C *= 1.01;
  REQUIRE(std::isfinite(C));
  Index bad = 0;
  for (const StateD& x : draw(2)) {
    const double h = hamiltonian(m, x), v = v1(m, p, x);
    bad += v > C * h * h + C || v < 0.5 * h * h - C;
  }
  CHECK(bad == 0);
}

TEST_CASE("VN at rest, exchange symmetry and a cubic upper bound") {
  const ModelSpec m = test::model(3, 3, 0.01);
  const LyapunovParamsN p{1.0, 1.0, 50.0};
  Rng rng(2);
  for (int k = 0; k < 500; ++k) {
    StateD x = test::random_state(m, rng, 1.5, 2.0, 0.05);
    StateD rest = x;
    rest.p.setZero();
    const double h0 = hamiltonian(m, rest);
    REQUIRE(vN(m, p, rest) == doctest::Approx(h0 * h0 * h0 + 50.0).epsilon(1e-14));
    StateD y = x;
    y.q.row(0).swap(y.q.row(2));
    y.p.row(0).swap(y.p.row(2));
    REQUIRE(std::abs(vN(m, p, y) - vN(m, p, x)) <= 1e-12 * vN(m, p, x));
  }
  const RegionSampler sampler;
  double c = 0;
  Rng r1(3), r2(4);
  for (int k = 0; k < 100000; ++k) {
    const StateD x = sampler.draw(m, k % 3, r1);
    const double h = hamiltonian(m, x);
    c = std::max(c, vN(m, p, x) / (h * h * h));
  }
  c *= 1.01;
  Index bad = 0;
  for (int k = 0; k < 100000; ++k) {
    const StateD x = sampler.draw(m, k % 3, r2);
    const double h = hamiltonian(m, x);
    bad += vN(m, p, x) > c * h * h * h;
  }
  CHECK(std::isfinite(c));
  CHECK(bad == 0);
}

TEST_CASE("analytic generator on V^n agrees with finite differences") {
  Rng rng(5);
  const RegionSampler sampler;
  struct Case {
    ModelSpec m;
    LyapunovParams p;
  };
  std::vector<Case> cases{{single(0.01), LyapunovParams1{0.01, 20.0}},
                          {single(0.3), LyapunovParams1{0.3, 20.0}},
                          {test::model(2, 3, 0.01), LyapunovParamsN{1.0, 1.0, 20.0}},
                          {test::model(3, 2, 0.1), LyapunovParamsN{2.0, 0.5, 20.0}}};
  for (const Case& c : cases) {
    for (double n : {1.0, 2.0}) {
      int checked = 0;
      for (int k = 0; checked < 300; ++k) {
        const StateD x = sampler.draw(c.m, k % 3, rng);
        if (min_pair_distance(c.m, x.q).distance <= 1e-3 || x.p.norm() >= 1e3 || x.q.norm() > 50) continue;
        ++checked;
        const LyapunovParams par = c.p;
        const ModelSpec m = c.m;
        const Observable fd = Observable::from_value(
            [&](const StateD& y) { return std::pow(lyapunov_value(m, par, y), n); }, m);
        const double ref = generator_apply(m, fd, x);
        const double an = generator_on_v(m, par, x, n);
        const Jet j = power(lyapunov_jet(m, par, x), n);
        const double scale = std::abs(an) + j.gq.cwiseAbs().sum() + j.gp.cwiseAbs().sum() + 1.0;
        CAPTURE(an);
        CAPTURE(ref);
        REQUIRE(std::abs(an - ref) <= 1e-6 * scale);
      }
    }
  }
}

TEST_CASE("single particle scan passes for n = 1 and 2 with the envelope property") {
  const ModelSpec m = single(0.01);
  for (double n : {1.0, 2.0}) {
    const ScanSet set = draw_scan_set(m, RegionSampler{}, 20000, 7);
    const DriftReport r = drift_scan(m, default_params(m), n, set, 0.5);
    CHECK(r.passed);
    CHECK(r.violations == 0);
    CHECK(r.c > 0);
    CHECK(std::isfinite(r.C));
    CHECK(r.min_v >= 1.0);
    double worst = -kInf;
    for (const ScanSample& s : set.samples) {
      if (!s.ok) continue;
      const double v = lyapunov_value(m, r.params, s.x);
      REQUIRE(v >= 1.0);
      const double lv = generator_on_v(m, r.params, s.x, n);
      worst = std::max(worst, (lv + r.c * std::pow(v, n - 0.5) - r.C) / (std::abs(lv) + r.C));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("coulomb pair scan in three dimensions passes with alpha 1/3") {
  const ModelSpec m = test::model(2, 3, 0.01);
  const DriftReport r = drift_scan(m, default_params(m), 1.0, RegionSampler{}, 20000, 3, 1, 1.0 / 3.0);
  CHECK(r.passed);
  CHECK(r.c > 0);
  CHECK(r.alpha == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("a too large eps returns a census instead of throwing") {
  const ModelSpec m = single(0.9);
  DriftReport r;
  CHECK_NOTHROW(r = drift_scan(m, default_params(m), 1.0, RegionSampler{}, 3000, 1));
  CHECK(r.samples == 3000);
  if (!r.passed) CHECK(!r.failure.empty());
}

TEST_CASE("scans are deterministic and thread independent") {
  const ModelSpec m = test::model(2, 2, 0.05);
  const DriftReport a = drift_scan(m, default_params(m), 1.0, RegionSampler{}, 5000, 11, 1);
  const DriftReport b = drift_scan(m, default_params(m), 1.0, RegionSampler{}, 5000, 11, 8);
  CHECK(a.c == b.c);
  CHECK(a.C == b.C);
  CHECK(a.worst_margin == b.worst_margin);
  CHECK(a.argmax_state.q == b.argmax_state.q);
}

TEST_CASE("raising kappa shifts C and never breaks V >= 1") {
  const ModelSpec m = single(0.01);
  const ScanSet set = draw_scan_set(m, RegionSampler{}, 5000, 2);
  const DriftReport base = drift_scan(m, default_params(m), 1.0, set);
  REQUIRE(base.passed);
  const double k0 = std::get<LyapunovParams1>(base.params).kappa1;
  for (double extra : {1.0, 10.0, 1e3}) {
    LyapunovParams1 p = std::get<LyapunovParams1>(base.params);
    p.kappa1 = k0 + extra;
    const DriftReport r = drift_scan(m, p, 1.0, set);
    CHECK(r.min_v >= base.min_v + extra - 1e-9 * (base.min_v + extra));
    CHECK(r.violations == 0);
  }
}

TEST_CASE("drift of VN is affine in A1 with slope L(H^3)") {
  // Doubling A1 can remove negative-drift states wherever L(H^3) > 0, so the count is not
  // monotone; what holds exactly is L V(2 A1) - L V(A1) = A1 L(H^3).
  const ModelSpec m = test::model(2, 3, 0.01);
  const DriftKind kind = DriftKind::for_model(m);
  Rng rng(4);
  const RegionSampler sampler;
  Index neg1 = 0, neg2 = 0, kept = 0;
  for (int k = 0; k < 10000; ++k) {
    const StateD x = sampler.draw(m, k % 3, rng);
    const double a1 = 1.0 + double(k % 4);
    const double l1 = generator_on_v(m, LyapunovParamsN{a1, 1.0, 1e3}, x);
    const double l2 = generator_on_v(m, LyapunovParamsN{2 * a1, 1.0, 1e3}, x);
    const Jet h3 = power(hamiltonian_jet(m, x), 3.0);
    const double lh3 = generator_from_jet(m, kind, h3, x);
    const double scale = std::abs(l1) + std::abs(l2) + a1 * (h3.gq.cwiseAbs().sum() + h3.gp.cwiseAbs().sum()) + 1.0;
    REQUIRE(std::abs(l2 - l1 - a1 * lh3) <= 1e-10 * scale);
    if (lh3 < 0 && l1 < 0) {
      ++kept;
      REQUIRE(l2 < 0);
    }
    neg1 += l1 < 0;
    neg2 += l2 < 0;
  }
  CHECK(kept > 0);
  MESSAGE("negative drift states: ", neg1, " at A1, ", neg2, " at 2 A1");
}

TEST_CASE("tuning with a budget of one returns the seed point") {
  const ModelSpec m = single(0.01);
  const TuneResult t = tune_constants(m, 1.0, 1, 9, RegionSampler{}, 4000);
  const DriftReport r = drift_scan(m, default_params(m), 1.0, RegionSampler{}, 4000, 9);
  CHECK(t.evaluated == 1);
  CHECK(t.report.c == r.c);
  CHECK(t.report.C == r.C);
  CHECK(t.report.violations == r.violations);
}

}  // TEST_SUITE
