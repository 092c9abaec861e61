#pragma once

#include "rlang/core.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace rlang {

enum class ConfiningFamily { power, custom };

// U(q) = 1 + |q|^(lambda+1) for the power family.
struct ConfiningSpec {
  ConfiningFamily family = ConfiningFamily::power;
  double lambda = 1.0;
  // Declared constants; estimated by validate_assumptions when absent.
  std::optional<double> a1, a2, a3;
  std::function<double(const RowVectorXr&)> custom_value;
  std::function<RowVectorXr(const RowVectorXr&)> custom_grad;

  void validate() const;
};

enum class SingularFamily { riesz, coulomb, lennard_jones, log, custom };

// Pair potential G. The structural constants say
//   |grad G(r) + a4 r/|r|^(beta1+1) + a5 r/|r|^(beta2+1)| <= a6.
struct SingularSpec {
  SingularFamily family = SingularFamily::coulomb;
  double beta1 = 2.0;
  double beta2 = 0.0;
  double a4 = 1.0;
  double a5 = 0.0;
  double a6 = 0.0;
  std::function<double(const RowVectorXr&)> custom_value;
  std::function<RowVectorXr(const RowVectorXr&)> custom_grad;

  static SingularSpec coulomb(double a4 = 1.0);
  static SingularSpec riesz(double beta1, double a4 = 1.0);
  static SingularSpec logarithmic(double a4 = 1.0);
  // 4e((1/r)^12 - (1/r)^6) with e = a4/48, i.e. a4 = 48 is the unit well depth.
  static SingularSpec lennard_jones(double a4 = 48.0);

  bool g2_compliant() const { return beta1 > 1.0 && beta1 <= 2.0 && beta2 >= 0.0 && beta2 < beta1 - 1.0; }
  void validate() const;
};

std::string family_name(ConfiningFamily f);
std::string family_name(SingularFamily f);
ConfiningFamily confining_family_from(const std::string& s);
SingularFamily singular_family_from(const std::string& s);

struct ModelSpec {
  Index n = 2;
  Index d = 3;
  double epsilon = 0.01;
  ConfiningSpec confining;
  SingularSpec singular;
  double energy_shift = 0.0;
  // Adds G(q_i) for every particle, i.e. an interaction with a fixed charge at the origin.
  // This is the single-particle system of the Lyapunov analysis.
  bool anchored = false;
  double collision_floor = 1e-10;

  void validate() const;
  bool has_singular_terms() const { return n >= 2 || anchored; }
};

// ---- confining potential ---------------------------------------------------

template <typename Derived>
typename Derived::Scalar confining_value(const ConfiningSpec& s, const Eigen::MatrixBase<Derived>& q) {
  using S = typename Derived::Scalar;
  if (s.family == ConfiningFamily::custom) {
    if constexpr (std::is_same_v<S, double>) {
      return s.custom_value(RowVectorXr(q));
    } else {
      throw ParameterError("custom confining potential is only available in double precision");
    }
  }
  using std::pow;
  const S r2 = q.squaredNorm();
  if (s.lambda == 1.0) return S(1) + r2;
  return S(1) + pow(r2, S((s.lambda + 1.0) / 2.0));
}

template <typename Derived>
RowVector<typename Derived::Scalar> confining_grad(const ConfiningSpec& s, const Eigen::MatrixBase<Derived>& q) {
  using S = typename Derived::Scalar;
  if (s.family == ConfiningFamily::custom) {
    if constexpr (std::is_same_v<S, double>) {
      return s.custom_grad(RowVectorXr(q));
    } else {
      throw ParameterError("custom confining potential is only available in double precision");
    }
  }
  using std::pow;
  if (s.lambda == 1.0) return S(2) * q;
  const S r2 = q.squaredNorm();
  if (r2 == S(0)) return RowVector<S>::Zero(q.size());
  return S(s.lambda + 1.0) * pow(r2, S((s.lambda - 1.0) / 2.0)) * q;
}

// ---- singular potential ----------------------------------------------------

// r / |r|^(beta+1), shared by the gradients and the structural residual so that
// exact families cancel to the last bit.
template <typename Derived>
RowVector<typename Derived::Scalar> singular_kernel(const Eigen::MatrixBase<Derived>& r, double beta) {
  using S = typename Derived::Scalar;
  using std::pow;
  using std::sqrt;
  const S r2 = r.squaredNorm();
  if (beta == 2.0) return r / (r2 * sqrt(r2));
  if (beta == 1.0) return r / r2;
  return r * pow(r2, S(-(beta + 1.0) / 2.0));
}

template <typename Derived>
typename Derived::Scalar singular_value(const SingularSpec& s, const Eigen::MatrixBase<Derived>& r) {
  using S = typename Derived::Scalar;
  using std::log;
  using std::pow;
  using std::sqrt;
  const S r2 = r.squaredNorm();
  if (!(r2 > S(0))) throw SingularityError(-1, -1, 0.0);
  switch (s.family) {
    case SingularFamily::coulomb:
      return S(s.a4) / sqrt(r2);
    case SingularFamily::riesz:
      return S(s.a4 / (s.beta1 - 1.0)) * pow(r2, S(-(s.beta1 - 1.0) / 2.0));
    case SingularFamily::log:
      return S(-0.5 * s.a4) * log(r2);
    case SingularFamily::lennard_jones: {
      const S inv6 = S(1) / (r2 * r2 * r2);
      return S(s.a4 / 12.0) * (inv6 * inv6 - inv6);
    }
    case SingularFamily::custom:
      if constexpr (std::is_same_v<S, double>) {
        return s.custom_value(RowVectorXr(r));
      } else {
        throw ParameterError("custom singular potential is only available in double precision");
      }
  }
  return S(0);
}

template <typename Derived>
RowVector<typename Derived::Scalar> singular_grad(const SingularSpec& s, const Eigen::MatrixBase<Derived>& r) {
  using S = typename Derived::Scalar;
  if (!(r.squaredNorm() > S(0))) throw SingularityError(-1, -1, 0.0);
  switch (s.family) {
    case SingularFamily::coulomb:
    case SingularFamily::riesz:
    case SingularFamily::log:
      return S(-s.a4) * singular_kernel(r, s.beta1);
    case SingularFamily::lennard_jones:
      return S(-s.a4) * singular_kernel(r, 13.0) + S(0.5 * s.a4) * singular_kernel(r, 7.0);
    case SingularFamily::custom:
      if constexpr (std::is_same_v<S, double>) {
        return s.custom_grad(RowVectorXr(r));
      } else {
        throw ParameterError("custom singular potential is only available in double precision");
      }
  }
  return RowVector<S>::Zero(r.size());
}

// grad G(r) + a4 r/|r|^(beta1+1) + a5 r/|r|^(beta2+1)
template <typename Derived>
RowVector<typename Derived::Scalar> singular_structure_residual(const SingularSpec& s,
                                                               const Eigen::MatrixBase<Derived>& r) {
  using S = typename Derived::Scalar;
  RowVector<S> res = singular_grad(s, r);
  res += S(s.a4) * singular_kernel(r, s.beta1);
  if (s.a5 != 0.0) res += S(s.a5) * singular_kernel(r, s.beta2);
  return res;
}

// ---- whole-configuration quantities ---------------------------------------

struct PairDistance {
  double distance = kInf;
  Index i = -1;
  Index j = -1;  // -1: the anchor at the origin
};

// Smallest pair separation (and distance to the origin when anchored).
template <typename Derived>
PairDistance min_pair_distance(const ModelSpec& m, const Eigen::MatrixBase<Derived>& q) {
  PairDistance out;
  const Index n = q.rows();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double dist = static_cast<double>((q.row(i) - q.row(j)).norm());
      if (dist < out.distance) out = {dist, i, j};
    }
    if (m.anchored) {
      const double dist = static_cast<double>(q.row(i).norm());
      if (dist < out.distance) out = {dist, i, -1};
    }
  }
  return out;
}

template <typename Derived>
void require_collision_free(const ModelSpec& m, const Eigen::MatrixBase<Derived>& q) {
  const PairDistance pd = min_pair_distance(m, q);
  if (!(pd.distance >= m.collision_floor)) throw SingularityError(pd.i, pd.j, pd.distance);
}

// sum_i (U(q_i) + shift) + sum_{i<j} G(q_i - q_j) [+ sum_i G(q_i) when anchored]
template <typename Derived>
typename Derived::Scalar potential_energy(const ModelSpec& m, const Eigen::MatrixBase<Derived>& q) {
  using S = typename Derived::Scalar;
  require_finite(q, "positions");
  require_collision_free(m, q);
  S total(0);
  const Index n = q.rows();
  for (Index i = 0; i < n; ++i) total += confining_value(m.confining, q.row(i)) + S(m.energy_shift);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) total += singular_value(m.singular, q.row(i) - q.row(j));
  if (m.anchored)
    for (Index i = 0; i < n; ++i) total += singular_value(m.singular, q.row(i));
  return total;
}

// Sum of G terms only (pairs i<j plus the anchor).
template <typename Derived>
typename Derived::Scalar interaction_energy(const ModelSpec& m, const Eigen::MatrixBase<Derived>& q) {
  using S = typename Derived::Scalar;
  S total(0);
  const Index n = q.rows();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) total += singular_value(m.singular, q.row(i) - q.row(j));
  if (m.anchored)
    for (Index i = 0; i < n; ++i) total += singular_value(m.singular, q.row(i));
  return total;
}

// ---- assumption probing ------------------------------------------------------

struct AssumptionCheck {
  std::string name;
  std::string statement;
  bool pass = true;
  double worst_residual = 0.0;  // most negative slack, scaled by the term magnitude
  Index probes = 0;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0;
  bool a1_declared = false, a2_declared = false, a3_declared = false;
  double beta1 = 0, beta2 = 0;
  bool g2_compliant = false;
  double min_total_potential = 0.0;
  double suggested_energy_shift = 0.0;
  double tolerance = 1e-9;
  Index probe_count = 0;
  std::uint64_t seed = 0;
  bool passed = true;
  std::string note;
};

struct ValidationOptions {
  Index probe_count = 10000;
  std::uint64_t seed = 1;
  double tolerance = 1e-9;
};

// Probes the growth, coercivity, symmetry and structure inequalities.
// Throws ParameterError for specs that violate their own declared ranges.
ValidationReport validate_assumptions(const ModelSpec& m, const ValidationOptions& opt = {});

// Smallest constant c >= 0 such that sum U + c N + sum G >= 1 on sampled configurations.
double auto_energy_shift(const ModelSpec& m, Index samples, std::uint64_t seed);

// Particles on a centered cubic lattice with unit spacing, p = 0.
StateD lattice_state(Index n, Index d);

// lattice_state, shifted off the origin for anchored models.
StateD default_state(const ModelSpec& m);

}  // namespace rlang
