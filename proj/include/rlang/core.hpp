#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace rlang {

using Index = Eigen::Index;

// Particle-major layout: row i holds particle i.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXr = Matrix<double>;
using RowVectorXr = RowVector<double>;
using VectorXr = Vector<double>;

template <typename Scalar>
struct State {
  Matrix<Scalar> q;
  Matrix<Scalar> p;

  State() = default;
  State(Index n, Index d) : q(Matrix<Scalar>::Zero(n, d)), p(Matrix<Scalar>::Zero(n, d)) {}
  State(Matrix<Scalar> q_, Matrix<Scalar> p_) : q(std::move(q_)), p(std::move(p_)) {}

  Index particles() const { return q.rows(); }
  Index dim() const { return q.cols(); }

  bool finite() const { return q.allFinite() && p.allFinite(); }

  template <typename Other>
  State<Other> cast() const {
    return State<Other>(q.template cast<Other>(), p.template cast<Other>());
  }
};

using StateD = State<double>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParameterError : Error {
  using Error::Error;
};

struct InvalidStateError : Error {
  using Error::Error;
};

// A pair (i, j) closer than the collision floor. j == -1 means the anchor at the origin.
struct SingularityError : Error {
  Index i = -1;
  Index j = -1;
  double distance = 0.0;
  SingularityError(Index i_, Index j_, double dist)
      : Error("collision between particles " + std::to_string(i_) + " and " +
              (j_ < 0 ? std::string("origin") : std::to_string(j_)) +
              " at distance " + std::to_string(dist)),
        i(i_), j(j_), distance(dist) {}
};

struct StepRejected : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw InvalidStateError(std::string("non-finite ") + what);
}

}  // namespace rlang
