#pragma once

#include "rlang/model.hpp"
#include "rlang/rng.hpp"

#include <vector>

namespace rlang::test {

// Built-in interaction families at default constants.
inline std::vector<SingularSpec> builtin_singular() {
  return {SingularSpec::coulomb(), SingularSpec::riesz(1.5), SingularSpec::logarithmic(), SingularSpec::lennard_jones()};
}

inline ModelSpec model(Index n, Index d, double eps, SingularSpec g = SingularSpec::coulomb()) {
  ModelSpec m;
  m.n = n;
  m.d = d;
  m.epsilon = eps;
  m.singular = g;
  return m;
}

// Gaussian positions at scale s, redrawn until the minimum separation exceeds sep.
inline MatrixXr separated_positions(const ModelSpec& m, Rng& rng, double s, double sep) {
  for (;;) {
    MatrixXr q = s * rng.normal_matrix(m.n, m.d);
    if (min_pair_distance(m, q).distance > sep) return q;
  }
}

inline StateD random_state(const ModelSpec& m, Rng& rng, double sq = 1.5, double sp = 1.5, double sep = 0.2) {
  MatrixXr q = separated_positions(m, rng, sq, sep);
  return StateD(q, sp * rng.normal_matrix(m.n, m.d));
}

}  // namespace rlang::test
