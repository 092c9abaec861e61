#include "rlang/model.hpp"
#include "rlang/rng.hpp"

#include <algorithm>
#include <cmath>

namespace rlang {

void ConfiningSpec::validate() const {
  if (family == ConfiningFamily::custom) {
    if (!custom_value || !custom_grad) throw ParameterError("custom confining family needs value and gradient hooks");
    return;
  }
  if (!(lambda >= 1.0) || !std::isfinite(lambda)) throw ParameterError("confining.lambda must be >= 1");
  for (const auto& a : {a1, a2, a3})
    if (a && !(*a >= 0.0)) throw ParameterError("confining constants must be nonnegative");
  if (a1 && !(*a1 > 0.0)) throw ParameterError("confining.a1 must be positive");
}

SingularSpec SingularSpec::coulomb(double a4) {
  SingularSpec s;
  s.family = SingularFamily::coulomb;
  s.beta1 = 2.0;
  s.a4 = a4;
  return s;
}

SingularSpec SingularSpec::riesz(double beta1, double a4) {
  SingularSpec s;
  s.family = SingularFamily::riesz;
  s.beta1 = beta1;
  s.a4 = a4;
  return s;
}

SingularSpec SingularSpec::logarithmic(double a4) {
  SingularSpec s;
  s.family = SingularFamily::log;
  s.beta1 = 1.0;
  s.a4 = a4;
  return s;
}

SingularSpec SingularSpec::lennard_jones(double a4) {
  SingularSpec s;
  s.family = SingularFamily::lennard_jones;
  s.beta1 = 13.0;
  s.beta2 = 7.0;
  s.a4 = a4;
  s.a5 = -0.5 * a4;
  return s;
}

void SingularSpec::validate() const {
  if (!(a4 > 0.0) || !std::isfinite(a4)) throw ParameterError("singular.a4 must be positive");
  if (!(beta1 >= 1.0) || !std::isfinite(beta1)) throw ParameterError("singular.beta1 must be >= 1");
  if (!(beta2 >= 0.0) || !(beta2 < beta1)) throw ParameterError("singular.beta2 must lie in [0, beta1)");
  if (!(a6 >= 0.0)) throw ParameterError("singular.a6 must be nonnegative");
  if (!std::isfinite(a5)) throw ParameterError("singular.a5 must be finite");
  switch (family) {
    case SingularFamily::coulomb:
      if (beta1 != 2.0) throw ParameterError("coulomb family has beta1 = 2");
      if (a5 != 0.0) throw ParameterError("coulomb family has a5 = 0");
      break;
    case SingularFamily::riesz:
      if (!(beta1 > 1.0)) throw ParameterError("riesz family needs beta1 > 1 (use the log family for beta1 = 1)");
      if (a5 != 0.0) throw ParameterError("riesz family has a5 = 0");
      break;
    case SingularFamily::log:
      if (beta1 != 1.0) throw ParameterError("log family has beta1 = 1");
      if (a5 != 0.0) throw ParameterError("log family has a5 = 0");
      break;
    case SingularFamily::lennard_jones:
      if (beta1 != 13.0 || beta2 != 7.0) throw ParameterError("lennard-jones family has beta1 = 13, beta2 = 7");
      if (a5 != -0.5 * a4) throw ParameterError("lennard-jones family has a5 = -a4/2");
      break;
    case SingularFamily::custom:
      if (!custom_value || !custom_grad) throw ParameterError("custom singular family needs value and gradient hooks");
      break;
  }
}

std::string family_name(ConfiningFamily f) { return f == ConfiningFamily::power ? "power" : "custom"; }

std::string family_name(SingularFamily f) {
  switch (f) {
    case SingularFamily::riesz: return "riesz";
    case SingularFamily::coulomb: return "coulomb";
    case SingularFamily::lennard_jones: return "lennard-jones";
    case SingularFamily::log: return "log";
    case SingularFamily::custom: return "custom";
  }
  return "?";
}

ConfiningFamily confining_family_from(const std::string& s) {
  if (s == "power") return ConfiningFamily::power;
  if (s == "custom") return ConfiningFamily::custom;
  throw ParameterError("unknown confining family '" + s + "'");
}

SingularFamily singular_family_from(const std::string& s) {
  if (s == "riesz") return SingularFamily::riesz;
  if (s == "coulomb") return SingularFamily::coulomb;
  if (s == "lennard-jones") return SingularFamily::lennard_jones;
  if (s == "log") return SingularFamily::log;
  if (s == "custom") return SingularFamily::custom;
  throw ParameterError("unknown singular family '" + s + "'");
}

void ModelSpec::validate() const {
  if (n < 1 || d < 1) throw ParameterError("n and d must be >= 1");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ParameterError("epsilon must lie in (0, 1]");
  if (!(collision_floor > 0.0)) throw ParameterError("collision_floor must be positive");
  if (!std::isfinite(energy_shift) || energy_shift < 0.0) throw ParameterError("energy_shift must be finite and >= 0");
  confining.validate();
  singular.validate();
}

namespace {

// Tracks the worst scaled slack of one inequality.
struct Tracker {
  AssumptionCheck check;
  double tol;
  Tracker(std::string name, std::string statement, double tol_) : tol(tol_) {
    check.name = std::move(name);
    check.statement = std::move(statement);
  }
  // slack >= 0 means satisfied; scale is the magnitude of the terms compared.
  void add(double slack, double scale) {
    ++check.probes;
    const double s = std::max(scale, 1e-300);
    const double rel = slack / s;
    if (!std::isfinite(rel)) {
      check.pass = false;
      check.worst_residual = -kInf;
      return;
    }
    if (check.probes == 1 || rel < check.worst_residual) check.worst_residual = rel;
    if (slack < -tol * s) check.pass = false;
  }
};

std::vector<double> log_radii(Index count, double lo, double hi) {
  std::vector<double> r(static_cast<std::size_t>(std::max<Index>(count, 2)));
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = std::exp(a + (b - a) * double(k) / double(r.size() - 1));
  return r;
}

}  // namespace

ValidationReport validate_assumptions(const ModelSpec& m, const ValidationOptions& opt) {
  if (opt.probe_count < 1) throw ParameterError("probe_count must be >= 1");
  m.validate();
  const auto& U = m.confining;
  const auto& G = m.singular;
  const double lam = U.lambda;
  const double tol = opt.tolerance;
  Rng rng(opt.seed);

  // Probe points: half on log-spaced radii in [1e-3, 1e3] with random directions,
  // half Gaussian at random scales.
  std::vector<RowVectorXr> pts;
  const Index radial = std::max<Index>(opt.probe_count / 2, 1);
  for (double r : log_radii(radial, 1e-3, 1e3)) pts.push_back(r * rng.unit_vector(m.d));
  while (static_cast<Index>(pts.size()) < std::max<Index>(opt.probe_count, 2)) {
    const double scale = rng.log_uniform(1e-2, 1e2);
    RowVectorXr v(m.d);
    for (Index k = 0; k < m.d; ++k) v(k) = scale * rng.normal();
    if (v.squaredNorm() > 0) pts.push_back(v);
  }

  // Estimate the constants the declarations leave open.
  double a1_need = 0.0;
  double a2_est = kInf;
  for (const auto& q : pts) {
    const double r = q.norm();
    const double x = std::pow(r, lam + 1.0);
    const double u = confining_value(U, q);
    const double gu = confining_grad(U, q).norm();
    a1_need = std::max(a1_need, u / (1.0 + x));
    a1_need = std::max(a1_need, gu / (1.0 + std::pow(r, lam)));
    a1_need = std::max(a1_need, 0.5 * (-u + std::sqrt(u * u + 4.0 * x)));
    if (r >= 1.0) a2_est = std::min(a2_est, confining_grad(U, q).dot(q) / x);
    const double g = singular_value(G, q);
    const double gg = singular_grad(G, q).norm();
    const double rb = std::pow(r, -G.beta1);
    a1_need = std::max(a1_need, std::abs(g) / (1.0 + r + rb));
    a1_need = std::max(a1_need, gg / (1.0 + rb));
  }
  if (!std::isfinite(a2_est) || a2_est <= 0.0) a2_est = 0.0;

  ValidationReport rep;
  rep.tolerance = tol;
  rep.probe_count = static_cast<Index>(pts.size());
  rep.seed = opt.seed;
  rep.a1_declared = U.a1.has_value();
  rep.a2_declared = U.a2.has_value();
  rep.a3_declared = U.a3.has_value();
  rep.a1 = U.a1.value_or(a1_need);
  rep.a2 = U.a2.value_or(a2_est);
  double a3_need = 0.0;
  for (const auto& q : pts)
    a3_need = std::max(a3_need, rep.a2 * std::pow(q.norm(), lam + 1.0) - confining_grad(U, q).dot(q));
  rep.a3 = U.a3.value_or(a3_need);

  // Fitted remainder of the structural bound.
  double a6_need = 0.0;
  for (const auto& q : pts) {
    const RowVectorXr res = singular_structure_residual(G, q);
    const double scale = singular_grad(G, q).norm() + G.a4 * singular_kernel(q, G.beta1).norm() +
                         std::abs(G.a5) * singular_kernel(q, G.beta2).norm();
    a6_need = std::max(a6_need, res.norm() - tol * scale);
  }
  rep.a4 = G.a4;
  rep.a5 = G.a5;
  rep.a6 = std::max(G.a6, a6_need);
  rep.beta1 = G.beta1;
  rep.beta2 = G.beta2;
  rep.g2_compliant = G.g2_compliant();

  Tracker u_floor("confining_floor", "U(q) >= 1", tol);
  Tracker u_lower("confining_growth_lower", "U(q) >= |q|^(lambda+1)/a1 - a1", tol);
  Tracker u_upper("confining_growth_upper", "U(q) <= a1 (1 + |q|^(lambda+1))", tol);
  Tracker u_grad("confining_gradient_bound", "|grad U(q)| <= a1 (1 + |q|^lambda)", tol);
  Tracker u_coer("confining_coercivity", "<grad U(q), q> >= a2 |q|^(lambda+1) - a3", tol);
  Tracker g_even("singular_even", "G(-r) = G(r)", tol);
  Tracker g_odd("singular_gradient_odd", "grad G(-r) = -grad G(r)", tol);
  Tracker g_val("singular_value_bound", "|G(r)| <= a1 (1 + |r| + |r|^-beta1)", tol);
  Tracker g_grad("singular_gradient_bound", "|grad G(r)| <= a1 (1 + |r|^-beta1)", tol);
  Tracker g_struct("singular_structure",
                   "|grad G(r) + a4 r/|r|^(beta1+1) + a5 r/|r|^(beta2+1)| <= a6", tol);
  const double a1 = rep.a1;
  for (const auto& q : pts) {
    const double r = q.norm();
    const double x = std::pow(r, lam + 1.0);
    const double u = confining_value(U, q);
    const RowVectorXr gu = confining_grad(U, q);
    u_floor.add(u - 1.0, u);
    u_lower.add(u - (x / a1 - a1), std::abs(u) + x / a1 + a1);
    u_upper.add(a1 * (1.0 + x) - u, std::abs(u) + a1 * (1.0 + x));
    u_grad.add(a1 * (1.0 + std::pow(r, lam)) - gu.norm(), gu.norm() + a1 * (1.0 + std::pow(r, lam)));
    const double gq = gu.dot(q);
    u_coer.add(gq - rep.a2 * x + rep.a3, std::abs(gq) + rep.a2 * x + rep.a3);

    const double g = singular_value(G, q);
    const double gm = singular_value(G, RowVectorXr(-q));
    g_even.add(-std::abs(g - gm), std::abs(g) + std::abs(gm));
    const RowVectorXr gg = singular_grad(G, q);
    const RowVectorXr ggm = singular_grad(G, RowVectorXr(-q));
    g_odd.add(-(gg + ggm).norm(), gg.norm() + ggm.norm());
    const double rb = std::pow(r, -G.beta1);
    g_val.add(a1 * (1.0 + r + rb) - std::abs(g), std::abs(g) + a1 * (1.0 + r + rb));
    g_grad.add(a1 * (1.0 + rb) - gg.norm(), gg.norm() + a1 * (1.0 + rb));
    const double scale = gg.norm() + G.a4 * singular_kernel(q, G.beta1).norm() +
                         std::abs(G.a5) * singular_kernel(q, G.beta2).norm();
    g_struct.add(rep.a6 - singular_structure_residual(G, q).norm(), scale + rep.a6);
  }

  // Total potential floor on sampled configurations.
  rep.suggested_energy_shift = auto_energy_shift(m, std::min<Index>(opt.probe_count, 20000), opt.seed + 1);
  Tracker floor_total("total_potential_floor", "sum U + sum G >= 1 (after energy_shift)", tol);
  {
    Rng r2 = Rng::substream(opt.seed, 7);
    double min_total = kInf;
    for (Index k = 0; k < std::min<Index>(opt.probe_count, 20000); ++k) {
      MatrixXr q(m.n, m.d);
      const double scale = r2.log_uniform(1e-2, 1e2);
      for (Index i = 0; i < m.n; ++i)
        for (Index c = 0; c < m.d; ++c) q(i, c) = scale * r2.normal();
      if (min_pair_distance(m, q).distance < m.collision_floor) continue;
      const double v = potential_energy(m, q);
      min_total = std::min(min_total, v);
      floor_total.add(v - 1.0, std::abs(v) + 1.0);
    }
    rep.min_total_potential = min_total;
  }

  for (Tracker* t : {&u_floor, &u_lower, &u_upper, &u_grad, &u_coer, &g_even, &g_odd, &g_val, &g_grad, &g_struct,
                     &floor_total})
    rep.checks.push_back(t->check);

  AssumptionCheck g2;
  g2.name = "g2_compliant";
  g2.statement = "beta1 in (1,2] and beta2 in [0, beta1-1)";
  g2.pass = rep.g2_compliant;
  g2.probes = 0;
  rep.checks.push_back(g2);

  rep.passed = true;
  for (const auto& c : rep.checks)
    if (c.name != "g2_compliant" && !c.pass) rep.passed = false;
  rep.note =
      "Probing is a falsification test on sampled points, not a proof. Undeclared constants are estimated "
      "from the same probes; g2_compliant is informational and only required for multi-particle Lyapunov scans.";
  return rep;
}

double auto_energy_shift(const ModelSpec& m, Index samples, std::uint64_t seed) {
  ModelSpec base = m;
  base.energy_shift = 0.0;
  Rng rng(seed);
  double min_total = kInf;
  auto consider = [&](const MatrixXr& q) {
    if (min_pair_distance(base, q).distance < base.collision_floor) return;
    min_total = std::min(min_total, potential_energy(base, q));
  };
  for (Index k = 0; k < samples; ++k) {
    MatrixXr q(m.n, m.d);
    const double scale = rng.log_uniform(1e-2, 1e2);
    for (Index i = 0; i < m.n; ++i)
      for (Index c = 0; c < m.d; ++c) q(i, c) = scale * rng.normal();
    consider(q);
  }
  if (!std::isfinite(min_total)) return 0.0;
  if (min_total >= 1.0) return 0.0;
  // 1e-9 headroom keeps the shifted floor at or above 1 under rounding.
  return (1.0 - min_total) / double(m.n) * (1.0 + 1e-9) + 1e-12;
}

StateD lattice_state(Index n, Index d) {
  Index side = 1;
  while (true) {
    Index cap = 1;
    for (Index k = 0; k < d; ++k) cap *= side;
    if (cap >= n) break;
    ++side;
  }
  StateD x(n, d);
  for (Index i = 0; i < n; ++i) {
    Index idx = i;
    for (Index k = 0; k < d; ++k) {
      x.q(i, k) = double(idx % side);
      idx /= side;
    }
  }
  const RowVectorXr mean = x.q.colwise().mean();
  x.q.rowwise() -= mean;
  return x;
}

StateD default_state(const ModelSpec& m) {
  StateD x = lattice_state(m.n, m.d);
  if (!m.anchored) return x;
  // a diagonal shift that keeps every particle off the origin
  const MatrixXr base = x.q;
  for (double t : {0.5, 0.25, 0.75, 0.375, 0.625}) {
    x.q = base.array() + t;
    if (x.q.rowwise().norm().minCoeff() >= 0.25) break;
  }
  return x;
}

}  // namespace rlang
