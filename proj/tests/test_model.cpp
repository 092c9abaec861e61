#include "helpers.hpp"
#include "rlang/dynamics.hpp"

#include <doctest.h>

#include <cmath>

using namespace rlang;

TEST_SUITE("model") {

TEST_CASE("velocity map closed forms") {
  RowVectorXr p(2);
  p << 3.0, 4.0;
  const RowVectorXr v = relativistic_velocity(p, 1.0);
  CHECK(v(0) == doctest::Approx(3.0 / std::sqrt(26.0)).epsilon(1e-15));
  CHECK(v(1) == doctest::Approx(4.0 / std::sqrt(26.0)).epsilon(1e-15));
  CHECK(relativistic_velocity(RowVectorXr::Zero(3), 0.3).norm() == 0.0);
}

TEST_CASE("velocity map is bounded, monotone on rays and close to p for small eps") {
  Rng rng(11);
  for (int k = 0; k < 10000; ++k) {
    const double eps = rng.log_uniform(1e-6, 1.0);
    const RowVectorXr dir = rng.unit_vector(3);
    const double r = rng.log_uniform(1e-3, 1e6);
    const RowVectorXr v = relativistic_velocity(RowVectorXr(r * dir), eps);
    REQUIRE(v.norm() < 1.0 / std::sqrt(eps));
    const RowVectorXr v2 = relativistic_velocity(RowVectorXr(1.5 * r * dir), eps);
    REQUIRE(v2.norm() >= v.norm());
    const RowVectorXr p = r * dir;
    REQUIRE((v - p).lpNorm<Eigen::Infinity>() <= std::sqrt(eps) * p.squaredNorm() * (1 + 1e-12));
  }
}

TEST_CASE("kinetic energy values and gradient") {
  CHECK(kinetic_energy(RowVectorXr::Zero(2), 1.0) == doctest::Approx(1.0));
  RowVectorXr p(2);
  p << 2.0, 0.0;
  CHECK(kinetic_energy(p, 0.25) == doctest::Approx(4.0 * std::sqrt(2.0)).epsilon(1e-14));
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const double eps = rng.log_uniform(1e-3, 1.0);
    RowVectorXr x = 2.0 * rng.normal_matrix(1, 3);
    const RowVectorXr g = relativistic_velocity(x, eps);
    for (Index c = 0; c < 3; ++c) {
      const double h = 1e-5 * (1 + x.norm());
      RowVectorXr a = x, b = x;
      a(c) += h;
      b(c) -= h;
      const double fd = (kinetic_energy(a, eps) - kinetic_energy(b, eps)) / (2 * h);
      REQUIRE(std::abs(fd - g(c)) <= 1e-8 * std::max(1.0, std::abs(g(c))) / std::sqrt(eps));
    }
  }
}

TEST_CASE("confining potential closed forms") {
  ConfiningSpec u;
  CHECK(confining_value(u, RowVectorXr::Zero(3)) == 1.0);
  CHECK(confining_grad(u, RowVectorXr::Zero(3)).norm() == 0.0);
  RowVectorXr q = RowVectorXr::Zero(3);
  q(0) = 1.0;
  CHECK(confining_value(u, q) == 2.0);
  CHECK(confining_grad(u, q)(0) == 2.0);
}

TEST_CASE("confining coercivity on random points") {
  Rng rng(5);
  for (double lam : {1.0, 2.0, 3.5}) {
    ConfiningSpec u;
    u.lambda = lam;
    ModelSpec m;
    m.confining = u;
    const ValidationReport rep = validate_assumptions(m, {2000, 1, 1e-9});
    for (int k = 0; k < 10000; ++k) {
      const RowVectorXr q = rng.log_uniform(1e-3, 1e3) * rng.unit_vector(3);
      const double res = confining_grad(u, q).dot(q) - rep.a2 * std::pow(q.norm(), lam + 1) + rep.a3;
      REQUIRE(res >= -1e-9 * (1 + std::pow(q.norm(), lam + 1)));
    }
  }
}

TEST_CASE("coulomb closed form and exact structure") {
  const SingularSpec g = SingularSpec::coulomb();
  RowVectorXr r = RowVectorXr::Zero(3);
  r(0) = 1.0;
  CHECK(singular_value(g, r) == 1.0);
  CHECK(singular_grad(g, r)(0) == -1.0);
  Rng rng(2);
  for (int k = 0; k < 10000; ++k) {
    const RowVectorXr x = rng.log_uniform(1e-3, 1e3) * rng.unit_vector(3);
    REQUIRE(singular_structure_residual(g, x).norm() == 0.0);
  }
}

TEST_CASE("interaction gradients are odd bit for bit") {
  Rng rng(8);
  for (const SingularSpec& g : test::builtin_singular()) {
    for (int k = 0; k < 10000; ++k) {
      const RowVectorXr x = rng.log_uniform(1e-2, 1e2) * rng.unit_vector(3);
      const RowVectorXr sum = singular_grad(g, x) + singular_grad(g, RowVectorXr(-x));
      REQUIRE(sum.norm() == 0.0);
    }
  }
}

TEST_CASE("gradients match central differences for every family") {
  Rng rng(13);
  const auto rel_fd = [](auto f, const RowVectorXr& x, const RowVectorXr& g) {
    double worst = 0.0;
    for (Index c = 0; c < x.size(); ++c) {
      const double h = 1e-6 * x.norm();
      RowVectorXr a = x, b = x, a2 = x, b2 = x;
      a(c) += h;
      b(c) -= h;
      a2(c) += 2 * h;
      b2(c) -= 2 * h;
      const double fd = (8 * (f(a) - f(b)) - (f(a2) - f(b2))) / (12 * h);
      worst = std::max(worst, std::abs(fd - g(c)) / (g.norm() + 1e-300));
    }
    return worst;
  };
  for (const SingularSpec& g : test::builtin_singular()) {
    CAPTURE(family_name(g.family));
    double worst = 0.0;
    for (int k = 0; k < 25000; ++k) {
      const RowVectorXr x = rng.log_uniform(0.3, 30.0) * rng.unit_vector(3);
      worst = std::max(worst, rel_fd([&](const RowVectorXr& y) { return singular_value(g, y); }, x, singular_grad(g, x)));
    }
    CHECK(worst <= 1e-6);
  }
  for (double lam : {1.0, 2.0, 3.0}) {
    ConfiningSpec u;
    u.lambda = lam;
    double worst = 0.0;
    for (int k = 0; k < 25000; ++k) {
      const RowVectorXr x = rng.log_uniform(0.1, 30.0) * rng.unit_vector(3);
      worst = std::max(worst, rel_fd([&](const RowVectorXr& y) { return confining_value(u, y); }, x, confining_grad(u, x)));
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("validation of the default model passes and is g2 compliant") {
  const ValidationReport rep = validate_assumptions(ModelSpec{});
  CHECK(rep.passed);
  CHECK(rep.g2_compliant);
  for (const auto& c : rep.checks) {
    CAPTURE(c.name);
    CHECK(c.pass);
  }
}

TEST_CASE("log interaction is not g2 compliant") {
  ModelSpec m;
  m.singular = SingularSpec::logarithmic();
  const ValidationReport rep = validate_assumptions(m, {2000, 1, 1e-9});
  CHECK_FALSE(rep.g2_compliant);
}

TEST_CASE("beta2 >= beta1 is rejected before probing") {
  ModelSpec m;
  m.singular.beta2 = 2.5;
  CHECK_THROWS_AS(validate_assumptions(m), ParameterError);
}

TEST_CASE("lennard-jones structure residual is bounded by the fitted a6") {
  ModelSpec m;
  m.singular = SingularSpec::lennard_jones();
  const ValidationReport rep = validate_assumptions(m, {4000, 1, 1e-9});
  CHECK(std::isfinite(rep.a6));
  Rng rng(4);
  for (int k = 0; k < 10000; ++k) {
    const RowVectorXr x = rng.log_uniform(1e-3, 1e3) * rng.unit_vector(3);
    const double res = singular_structure_residual(m.singular, x).norm();
    const double scale = singular_grad(m.singular, x).norm() + m.singular.a4 * singular_kernel(x, 13.0).norm();
    REQUIRE(res <= rep.a6 + 1e-9 * (scale + rep.a6));
  }
}

TEST_CASE("default states are collision free") {
  for (Index n : {1, 2, 3, 5})
    for (Index d : {1, 2, 3}) {
      ModelSpec m = test::model(n, d, 0.1);
      CHECK(min_pair_distance(m, default_state(m).q).distance >= 1.0);
      m.anchored = true;
      CHECK(min_pair_distance(m, default_state(m).q).distance > 0.1);
    }
}

}  // TEST_SUITE
