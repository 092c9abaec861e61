#pragma once

#include "rlang/model.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace rlang {

struct DriftKind {
  enum class Tag { relativistic, langevin, relativistic_truncated, langevin_truncated };
  Tag tag = Tag::relativistic;
  double epsilon = 0.01;
  double R = 0.0;

  static DriftKind relativistic(double eps) { return {Tag::relativistic, eps, 0.0}; }
  static DriftKind langevin() { return {Tag::langevin, 0.0, 0.0}; }
  static DriftKind relativistic_truncated(double eps, double R) { return {Tag::relativistic_truncated, eps, R}; }
  static DriftKind langevin_truncated(double R) { return {Tag::langevin_truncated, 0.0, R}; }
  static DriftKind for_model(const ModelSpec& m) { return relativistic(m.epsilon); }

  bool is_relativistic() const { return tag == Tag::relativistic || tag == Tag::relativistic_truncated; }
  bool is_truncated() const { return tag == Tag::relativistic_truncated || tag == Tag::langevin_truncated; }
  void validate() const;
  std::string name() const;
};

// ---- kinetic part ---------------------------------------------------------------

template <typename Derived>
auto relativistic_velocity(const Eigen::MatrixBase<Derived>& p, typename Derived::Scalar eps) {
  using S = typename Derived::Scalar;
  using std::sqrt;
  if (!p.allFinite()) throw InvalidStateError("non-finite momentum");
  return (p / sqrt(S(1) + eps * p.squaredNorm())).eval();
}

// (1/eps) sqrt(1 + eps |p|^2)
template <typename Derived>
typename Derived::Scalar kinetic_energy(const Eigen::MatrixBase<Derived>& p, typename Derived::Scalar eps) {
  using S = typename Derived::Scalar;
  using std::sqrt;
  if (!(eps > S(0))) throw ParameterError("kinetic_energy needs epsilon > 0");
  return sqrt(S(1) + eps * p.squaredNorm()) / eps;
}

// Row-wise velocity map for an N x d momentum block.
template <typename S>
void velocity_field(const DriftKind& kind, const Matrix<S>& p, Matrix<S>& v) {
  using std::sqrt;
  v.resize(p.rows(), p.cols());
  if (!kind.is_relativistic()) {
    v = p;
    return;
  }
  const S eps(kind.epsilon);
  for (Index i = 0; i < p.rows(); ++i) v.row(i) = p.row(i) / sqrt(S(1) + eps * p.row(i).squaredNorm());
}

// ---- cutoff -----------------------------------------------------------------------

// 1 on [-R, R], 0 outside [-R-1, R+1], quintic smoothstep in between (C2 seams).
inline double cutoff_theta(double t, double R) {
  const double a = std::abs(t);
  if (a <= R) return 1.0;
  if (a >= R + 1.0) return 0.0;
  const double u = a - R;
  return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

inline double cutoff_theta_derivative(double t, double R) {
  const double a = std::abs(t);
  if (a <= R || a >= R + 1.0) return 0.0;
  const double u = a - R;
  const double d = -30.0 * u * u * (1.0 - u) * (1.0 - u);
  return t < 0 ? -d : d;
}

// ---- forces -----------------------------------------------------------------------

// f_i = -grad U(q_i) - sum_{j != i} grad G(q_i - q_j) [- grad G(q_i) when anchored],
// with the cutoff multipliers for truncated kinds.
template <typename S>
void conservative_force(const ModelSpec& m, const DriftKind& kind, const Matrix<S>& q, Matrix<S>& f) {
  const Index n = q.rows();
  f.resize(n, q.cols());
  const bool trunc = kind.is_truncated();
  for (Index i = 0; i < n; ++i) {
    if (trunc) {
      const double th = cutoff_theta(static_cast<double>(q.row(i).norm()), kind.R);
      if (th == 0.0) {
        f.row(i).setZero();
      } else {
        f.row(i) = -S(th) * confining_grad(m.confining, q.row(i));
      }
    } else {
      f.row(i) = -confining_grad(m.confining, q.row(i));
    }
  }
  auto pair_term = [&](Index i, Index j, const RowVector<S>& r) {
    using std::sqrt;
    const double dist = static_cast<double>(sqrt(r.squaredNorm()));
    S th(1);
    if (trunc) {
      if (dist == 0.0) return;
      const double t = cutoff_theta(1.0 / dist, kind.R);
      if (t == 0.0) return;
      th = S(t);
    } else if (!(dist >= m.collision_floor)) {
      throw SingularityError(i, j, dist);
    }
    const RowVector<S> g = th == S(1) ? singular_grad(m.singular, r) : (th * singular_grad(m.singular, r)).eval();
    f.row(i) -= g;
    if (j >= 0) f.row(j) += g;
  };
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) pair_term(i, j, q.row(i) - q.row(j));
  if (m.anchored)
    for (Index i = 0; i < n; ++i) pair_term(i, -1, q.row(i));
}

template <typename S>
struct DriftField {
  Matrix<S> dq;
  Matrix<S> dp;
};

template <typename S>
DriftField<S> drift(const DriftKind& kind, const ModelSpec& m, const State<S>& x) {
  require_finite(x.q, "positions");
  require_finite(x.p, "momenta");
  DriftField<S> out;
  velocity_field(kind, x.p, out.dq);
  conservative_force(m, kind, x.q, out.dp);
  out.dp -= out.dq;
  return out;
}

// eps sum U + eps sum_{i<j} G + sum_i sqrt(1 + eps |p_i|^2)
template <typename S>
S hamiltonian(const ModelSpec& m, const State<S>& x) {
  using std::sqrt;
  require_finite(x.p, "momenta");
  const S eps(m.epsilon);
  S kin(0);
  for (Index i = 0; i < x.particles(); ++i) kin += sqrt(S(1) + eps * x.p.row(i).squaredNorm());
  return eps * potential_energy(m, x.q) + kin;
}

// log of the unnormalized stationary density
template <typename S>
S log_stationary_density(const ModelSpec& m, const State<S>& x) {
  require_finite(x.p, "momenta");
  const S eps(m.epsilon);
  S kin(0);
  for (Index i = 0; i < x.particles(); ++i) kin += kinetic_energy(x.p.row(i), eps);
  return -(kin + potential_energy(m, x.q));
}

// ---- observables -----------------------------------------------------------------

// Value, q- and p-gradients and p-Laplacian of a scalar function at one state.
struct Jet {
  double value = 0.0;
  MatrixXr gq;
  MatrixXr gp;
  double lap_p = 0.0;

  static Jet constant(double c, Index n, Index d);
  bool finite() const;
};

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator*(double s, const Jet& a);
Jet operator+(const Jet& a, double c);
Jet product(const Jet& a, const Jet& b);
// a^k, using the chain rule with the p-diffusion correction
Jet power(const Jet& a, double k);
// g(a) for scalar g with derivatives g1 = g'(a), g2 = g''(a)
Jet compose(const Jet& a, double g, double g1, double g2);

struct FdOptions {
  double step = 1e-5;         // first derivatives, relative to 1 + |x|
  double second_step = 1e-3;  // p-Laplacian, relative to 1 + |x|
  double collision_fraction = 1e-3;  // q steps never exceed this fraction of the min pair distance
};

class Observable {
 public:
  using JetFn = std::function<Jet(const StateD&)>;
  using ValueFn = std::function<double(const StateD&)>;

  Observable() = default;
  static Observable analytic(JetFn f);
  // derivatives by five-point central differences
  static Observable from_value(ValueFn f, const ModelSpec& m, FdOptions opt = {});

  Jet operator()(const StateD& x) const { return jet_(x); }
  double value(const StateD& x) const { return value_ ? value_(x) : jet_(x).value; }

 private:
  JetFn jet_;
  ValueFn value_;
};

Jet finite_difference_jet(const Observable::ValueFn& f, const ModelSpec& m, const StateD& x, const FdOptions& opt = {});

// L phi for a given jet; relativistic generator with the kind's epsilon (or p for langevin).
double generator_from_jet(const ModelSpec& m, const DriftKind& kind, const Jet& j, const StateD& x);
double generator_apply(const ModelSpec& m, const DriftKind& kind, const Observable& phi, const StateD& x);
// Relativistic generator with the model's epsilon.
double generator_apply(const ModelSpec& m, const Observable& phi, const StateD& x);

// Analytic jets of the Hamiltonian and of <q, p> = sum_i <q_i, p_i>.
Jet hamiltonian_jet(const ModelSpec& m, const StateD& x);
Jet qp_jet(const StateD& x);

// Closed forms used as oracles.
// L H for the N-particle Hamiltonian: sum_i [-eps|p_i|^2/(1+eps|p_i|^2) + (d eps + (d-1) eps^2 |p_i|^2)/(1+eps|p_i|^2)^(3/2)]
double generator_hamiltonian_closed_form(const ModelSpec& m, const StateD& x);
// L <q,p> = sum_i [ |p_i|^2/sqrt(1+eps|p_i|^2) - <q_i,p_i>/sqrt(1+eps|p_i|^2) + <f_i, q_i> ]
double generator_qp_closed_form(const ModelSpec& m, const StateD& x);

}  // namespace rlang
