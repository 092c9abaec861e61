#include "rlang/dynamics.hpp"

#include <cmath>

namespace rlang {

void DriftKind::validate() const {
  if (is_relativistic() && !(epsilon > 0.0 && epsilon <= 1.0)) throw ParameterError("drift epsilon must lie in (0, 1]");
  if (is_truncated() && !(R > 2.0)) throw ParameterError("cutoff radius R must exceed 2");
}

std::string DriftKind::name() const {
  switch (tag) {
    case Tag::relativistic: return "relativistic";
    case Tag::langevin: return "langevin";
    case Tag::relativistic_truncated: return "relativistic-truncated";
    case Tag::langevin_truncated: return "langevin-truncated";
  }
  return "?";
}

// ---- jet algebra ------------------------------------------------------------------

Jet Jet::constant(double c, Index n, Index d) {
  Jet j;
  j.value = c;
  j.gq = MatrixXr::Zero(n, d);
  j.gp = MatrixXr::Zero(n, d);
  return j;
}

bool Jet::finite() const {
  return std::isfinite(value) && std::isfinite(lap_p) && gq.allFinite() && gp.allFinite();
}

Jet operator+(const Jet& a, const Jet& b) {
  Jet r;
  r.value = a.value + b.value;
  r.gq = a.gq + b.gq;
  r.gp = a.gp + b.gp;
  r.lap_p = a.lap_p + b.lap_p;
  return r;
}

Jet operator-(const Jet& a, const Jet& b) { return a + (-1.0) * b; }

Jet operator*(double s, const Jet& a) {
  Jet r;
  r.value = s * a.value;
  r.gq = s * a.gq;
  r.gp = s * a.gp;
  r.lap_p = s * a.lap_p;
  return r;
}

Jet operator+(const Jet& a, double c) {
  Jet r = a;
  r.value += c;
  return r;
}

Jet product(const Jet& a, const Jet& b) {
  Jet r;
  r.value = a.value * b.value;
  r.gq = a.value * b.gq + b.value * a.gq;
  r.gp = a.value * b.gp + b.value * a.gp;
  r.lap_p = a.value * b.lap_p + b.value * a.lap_p + 2.0 * (a.gp.array() * b.gp.array()).sum();
  return r;
}

Jet compose(const Jet& a, double g, double g1, double g2) {
  Jet r;
  r.value = g;
  r.gq = g1 * a.gq;
  r.gp = g1 * a.gp;
  r.lap_p = g1 * a.lap_p + g2 * a.gp.squaredNorm();
  return r;
}

Jet power(const Jet& a, double k) {
  if (k == 1.0) return a;
  if (k == 0.0) return Jet::constant(1.0, a.gq.rows(), a.gq.cols());
  const double v = a.value;
  return compose(a, std::pow(v, k), k * std::pow(v, k - 1.0), k * (k - 1.0) * std::pow(v, k - 2.0));
}

// ---- finite differences ------------------------------------------------------------

namespace {

double fd_first(const Observable::ValueFn& f, StateD& x, MatrixXr& block, Index i, Index k, double h) {
  const double x0 = block(i, k);
  double v[4];
  const double off[4] = {-2.0, -1.0, 1.0, 2.0};
  for (int s = 0; s < 4; ++s) {
    block(i, k) = x0 + off[s] * h;
    v[s] = f(x);
  }
  block(i, k) = x0;
  return (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * h);
}

double fd_second(const Observable::ValueFn& f, StateD& x, MatrixXr& block, Index i, Index k, double h, double f0) {
  const double x0 = block(i, k);
  double v[4];
  const double off[4] = {-2.0, -1.0, 1.0, 2.0};
  for (int s = 0; s < 4; ++s) {
    block(i, k) = x0 + off[s] * h;
    v[s] = f(x);
  }
  block(i, k) = x0;
  return (-v[0] + 16.0 * v[1] - 30.0 * f0 + 16.0 * v[2] - v[3]) / (12.0 * h * h);
}

}  // namespace

Jet finite_difference_jet(const Observable::ValueFn& f, const ModelSpec& m, const StateD& x0, const FdOptions& opt) {
  StateD x = x0;
  const Index n = x.particles(), d = x.dim();
  Jet j = Jet::constant(f(x), n, d);
  const double dmin = min_pair_distance(m, x.q).distance;
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) {
      double hq = opt.step * (1.0 + std::abs(x.q(i, k)));
      if (std::isfinite(dmin)) hq = std::min(hq, opt.collision_fraction * dmin);
      j.gq(i, k) = fd_first(f, x, x.q, i, k, hq);
      const double hp = opt.step * (1.0 + std::abs(x.p(i, k)));
      j.gp(i, k) = fd_first(f, x, x.p, i, k, hp);
      const double h2 = opt.second_step * (1.0 + std::abs(x.p(i, k)));
      j.lap_p += fd_second(f, x, x.p, i, k, h2, j.value);
    }
  }
  return j;
}

Observable Observable::analytic(JetFn f) {
  Observable o;
  o.jet_ = std::move(f);
  return o;
}

Observable Observable::from_value(ValueFn f, const ModelSpec& m, FdOptions opt) {
  Observable o;
  o.value_ = f;
  o.jet_ = [f, m, opt](const StateD& x) { return finite_difference_jet(f, m, x, opt); };
  return o;
}

// ---- generator ------------------------------------------------------------------

double generator_from_jet(const ModelSpec& m, const DriftKind& kind, const Jet& j, const StateD& x) {
  if (!j.finite()) throw InvalidStateError("non-finite observable derivative");
  const DriftField<double> b = drift(kind, m, x);
  const double out = (b.dq.array() * j.gq.array()).sum() + (b.dp.array() * j.gp.array()).sum() + j.lap_p;
  if (!std::isfinite(out)) throw InvalidStateError("non-finite generator value");
  return out;
}

double generator_apply(const ModelSpec& m, const DriftKind& kind, const Observable& phi, const StateD& x) {
  return generator_from_jet(m, kind, phi(x), x);
}

double generator_apply(const ModelSpec& m, const Observable& phi, const StateD& x) {
  return generator_apply(m, DriftKind::for_model(m), phi, x);
}

Jet hamiltonian_jet(const ModelSpec& m, const StateD& x) {
  const double eps = m.epsilon;
  const Index n = x.particles(), d = x.dim();
  Jet j;
  j.value = hamiltonian(m, x);
  MatrixXr f;
  conservative_force(m, DriftKind::for_model(m), x.q, f);
  j.gq = -eps * f;
  j.gp.resize(n, d);
  j.lap_p = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double p2 = x.p.row(i).squaredNorm();
    const double s = std::sqrt(1.0 + eps * p2);
    j.gp.row(i) = eps * x.p.row(i) / s;
    j.lap_p += (double(d) * eps + double(d - 1) * eps * eps * p2) / (s * s * s);
  }
  return j;
}

Jet qp_jet(const StateD& x) {
  Jet j;
  j.value = (x.q.array() * x.p.array()).sum();
  j.gq = x.p;
  j.gp = x.q;
  j.lap_p = 0.0;
  return j;
}

double generator_hamiltonian_closed_form(const ModelSpec& m, const StateD& x) {
  require_collision_free(m, x.q);
  const double eps = m.epsilon;
  const double d = double(x.dim());
  double out = 0.0;
  for (Index i = 0; i < x.particles(); ++i) {
    const double p2 = x.p.row(i).squaredNorm();
    const double w = 1.0 + eps * p2;
    out += -eps * p2 / w + (d * eps + (d - 1.0) * eps * eps * p2) / std::pow(w, 1.5);
  }
  return out;
}

double generator_qp_closed_form(const ModelSpec& m, const StateD& x) {
  require_collision_free(m, x.q);
  const double eps = m.epsilon;
  double out = 0.0;
  const Index n = x.particles();
  for (Index i = 0; i < n; ++i) {
    const double s = std::sqrt(1.0 + eps * x.p.row(i).squaredNorm());
    out += x.p.row(i).squaredNorm() / s - x.q.row(i).dot(x.p.row(i)) / s;
    out -= confining_grad(m.confining, x.q.row(i)).dot(x.q.row(i));
    if (m.anchored) out -= singular_grad(m.singular, x.q.row(i)).dot(x.q.row(i));
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const RowVectorXr r = x.q.row(i) - x.q.row(j);
      out -= singular_grad(m.singular, r).dot(r);
    }
  return out;
}

}  // namespace rlang
