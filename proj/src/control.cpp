#include "rlang/ergodicity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace rlang {

namespace {

// quintic smoothstep and derivatives on [0, 1]
double smooth(double u) { return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u); }
double smooth1(double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); }
double smooth2(double u) { return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u); }

// theta = 1 on |t| <= 1, 0 on |t| >= 2; only t in [1, 2] is needed here
double theta(double t) { return t <= 1.0 ? 1.0 : t >= 2.0 ? 0.0 : 1.0 - smooth(t - 1.0); }
double theta1(double t) { return (t <= 1.0 || t >= 2.0) ? 0.0 : -smooth1(t - 1.0); }
double theta2(double t) { return (t <= 1.0 || t >= 2.0) ? 0.0 : -smooth2(t - 1.0); }

enum class PieceKind { bleed, blend, leg, rest };

struct Piece {
  PieceKind kind = PieceKind::rest;
  double s0 = 0.0, s1 = 0.0;
  MatrixXr a, b;  // leg endpoints; for rest pieces a is the held configuration
  Index intervals = 1;
};

struct Geometry {
  MatrixXr q0, v0;
  double rho = 0.0;
  double eps = 0.0;
  std::vector<Piece> pieces;
};

struct Kin {
  MatrixXr q, dq, ddq;
};

Kin evaluate(const Geometry& g, const Piece& pc, double s) {
  Kin k;
  const double rho = g.rho;
  switch (pc.kind) {
    case PieceKind::bleed: {
      // g(s) = -(s - rho)^100 / (100 rho^99) + rho/100
      const double u = (s - rho) / rho;
      const double gs = rho * (1.0 - std::pow(u, 100)) / 100.0;
      const double g1 = -std::pow(u, 99);
      const double g2 = -99.0 * std::pow(u, 98) / rho;
      k.q = g.q0 + gs * g.v0;
      k.dq = g1 * g.v0;
      k.ddq = g2 * g.v0;
      break;
    }
    case PieceKind::blend: {
      // theta(s/rho) phi2 + (1 - theta) phi1, with phi2 = q0 + (rho/100) v0 and phi1 = q0 here
      const double t = s / rho;
      k.q = g.q0 + theta(t) * (rho / 100.0) * g.v0;
      k.dq = theta1(t) / 100.0 * g.v0;
      k.ddq = theta2(t) / (100.0 * rho) * g.v0;
      break;
    }
    case PieceKind::leg: {
      const double tau = pc.s1 - pc.s0;
      const double u = std::clamp((s - pc.s0) / tau, 0.0, 1.0);
      const MatrixXr d = pc.b - pc.a;
      k.q = pc.a + smooth(u) * d;
      k.dq = smooth1(u) / tau * d;
      k.ddq = smooth2(u) / (tau * tau) * d;
      break;
    }
    case PieceKind::rest:
      k.q = pc.a;
      k.dq = MatrixXr::Zero(pc.a.rows(), pc.a.cols());
      k.ddq = k.dq;
      break;
  }
  return k;
}

// p = q'/sqrt(1 - eps|q'|^2) row-wise, and its derivative
void momentum_from_velocity(const MatrixXr& w, const MatrixXr& dw, double eps, MatrixXr& p, MatrixXr* dp) {
  p.resize(w.rows(), w.cols());
  if (dp) dp->resize(w.rows(), w.cols());
  for (Index i = 0; i < w.rows(); ++i) {
    const double a = 1.0 - eps * w.row(i).squaredNorm();
    if (!(a > 0.0)) throw Error("construction failed: speed reaches 1/sqrt(eps)");
    const double ra = std::sqrt(a);
    p.row(i) = w.row(i) / ra;
    if (dp) dp->row(i) = dw.row(i) / ra + w.row(i) * (eps * w.row(i).dot(dw.row(i))) / (a * ra);
  }
}

MatrixXr potential_gradient(const ModelSpec& m, const MatrixXr& q) {
  MatrixXr f;
  conservative_force(m, DriftKind::for_model(m), q, f);
  return -f;
}

// min over sigma in [0, 1] of |a + sigma (b - a)|
double segment_distance(const RowVectorXr& a, const RowVectorXr& b) {
  const RowVectorXr d = b - a;
  const double dd = d.squaredNorm();
  const double t = dd > 0.0 ? std::clamp(-a.dot(d) / dd, 0.0, 1.0) : 0.0;
  return (a + t * d).norm();
}

// smallest pair (and anchor) distance along the straight interpolation A -> B
double segment_clearance(const ModelSpec& m, const MatrixXr& A, const MatrixXr& B) {
  double out = kInf;
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = i + 1; j < A.rows(); ++j)
      out = std::min(out, segment_distance(A.row(i) - A.row(j), B.row(i) - B.row(j)));
    if (m.anchored) out = std::min(out, segment_distance(A.row(i), B.row(i)));
  }
  return out;
}

double point_clearance(const ModelSpec& m, const MatrixXr& q) { return segment_clearance(m, q, q); }

struct Router {
  const ModelSpec& m;
  double need;
  Rng& rng;
  int max_depth;
  Index budget = 4000;
  std::vector<MatrixXr> points;

  bool route(const MatrixXr& A, const MatrixXr& B, int depth) {
    if (segment_clearance(m, A, B) >= need) {
      points.push_back(B);
      return true;
    }
    if (depth >= max_depth) return false;
    const double span = 1.0 + (B - A).norm();
    for (int attempt = 0; attempt < 64 && budget > 0; ++attempt, --budget) {
      const double scale = 0.25 * span * (1.0 + attempt / 8.0);
      const MatrixXr W = 0.5 * (A + B) + scale * rng.normal_matrix(A.rows(), A.cols());
      if (point_clearance(m, W) < 2.0 * need) continue;
      const std::size_t mark = points.size();
      if (route(A, W, depth + 1) && route(W, B, depth + 1)) return true;
      points.resize(mark);
    }
    return false;
  }
};

// Fornberg weights for the first derivative at x0 on nodes xs
std::vector<double> first_derivative_weights(double x0, const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::array<double, 2>> c(n, {0.0, 0.0});
  double c1 = 1.0, c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min<std::size_t>(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) c[i][k] = c1 * (double(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - double(k) * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = c[i][1];
  return w;
}

// d/ds of nodal values on one uniform piece [lo, hi], seven-point stencils kept inside the piece
template <typename Get>
MatrixXr piece_derivative(const std::vector<double>& t, Index lo, Index hi, Index k, Get get) {
  const Index len = hi - lo + 1;
  const Index width = std::min<Index>(7, len);
  Index start = std::clamp<Index>(k - width / 2, lo, hi - width + 1);
  std::vector<double> xs;
  for (Index r = 0; r < width; ++r) xs.push_back(t[static_cast<std::size_t>(start + r)] - t[static_cast<std::size_t>(k)]);
  const auto w = first_derivative_weights(0.0, xs);
  MatrixXr out = w[0] * get(start);
  for (Index r = 1; r < width; ++r) out += w[static_cast<std::size_t>(r)] * get(start + r);
  return out;
}

}  // namespace

MatrixXr control_targets(const StateD& x0) {
  const Index n = x0.particles(), d = x0.dim();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x0.q(a, 0) < x0.q(b, 0); });
  MatrixXr t = MatrixXr::Zero(n, d);
  for (Index r = 0; r < n; ++r) t(order[static_cast<std::size_t>(r)], 0) = double(r + 1);
  return t;
}

ControlPath control_path(const ModelSpec& m, const StateD& x0, std::uint64_t seed, const ControlOptions& opt) {
  m.validate();
  if (x0.particles() != m.n || x0.dim() != m.d) throw InvalidStateError("initial state shape does not match model");
  if (!x0.finite()) throw InvalidStateError("non-finite initial state");
  if (!(opt.rho > 0.0)) throw ParameterError("rho must be > 0");
  const bool singular = m.has_singular_terms();
  if (singular) require_collision_free(m, x0.q);

  Geometry g;
  g.eps = m.epsilon;
  g.q0 = x0.q;
  velocity_field(DriftKind::for_model(m), x0.p, g.v0);
  const MatrixXr target = control_targets(x0);
  const double delta0 = singular ? point_clearance(m, x0.q) : kInf;
  const double need = singular ? std::min(opt.clearance * delta0, 0.5) : 0.0;

  // the bleed and blend pieces move along q0 + lambda v0, lambda in [0, rho/100]
  ControlPath path;
  double rho = opt.rho;
  if (singular) {
    while (segment_clearance(m, g.q0, g.q0 + (rho / 100.0) * g.v0) < need) {
      if (path.rho_halvings >= opt.max_rho_halvings)
        throw Error("construction failed: rho could not be shrunk enough to stay collision-free");
      rho *= 0.5;
      ++path.rho_halvings;
    }
  }
  g.rho = rho;

  Rng rng(seed);
  Router router{m, need, rng, opt.max_waypoint_depth, 4000, {}};
  if (!router.route(g.q0, target, 0)) throw Error("construction failed: no collision-free route within budget");
  path.waypoints = static_cast<Index>(router.points.size()) - 1;

  g.pieces.push_back(Piece{PieceKind::bleed, 0.0, rho, {}, {}, opt.nodes_first});
  g.pieces.push_back(Piece{PieceKind::blend, rho, 2.0 * rho, {}, {}, opt.nodes_blend});
  double s = 2.0 * rho;
  MatrixXr at = g.q0;
  for (const MatrixXr& w : router.points) {
    double reach = 0.0;
    for (Index i = 0; i < m.n; ++i) reach = std::max(reach, (w.row(i) - at.row(i)).norm());
    if (reach == 0.0) continue;
    // peak speed of the smoothstep leg is 1.875 reach / tau; keep it below 1/100
    const double tau = 200.0 * reach;
    const Index iv = std::max<Index>(200, static_cast<Index>(std::ceil(tau / opt.leg_spacing)));
    g.pieces.push_back(Piece{PieceKind::leg, s, s + tau, at, w, iv});
    s += tau;
    at = w;
  }
  g.pieces.push_back(Piece{PieceKind::rest, s, s + rho, target, {}, 50});
  g.pieces.push_back(Piece{PieceKind::rest, s + rho, s + 2.0 * rho, target, {}, 50});
  const double T = s + 2.0 * rho;

  // Gauss-Legendre, four points per cell, for the force integral
  static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
  static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};

  MatrixXr integral = MatrixXr::Zero(m.n, m.d);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  auto push = [&](double t, const Kin& k) {
    StateD x(m.n, m.d);
    x.q = k.q;
    momentum_from_velocity(k.dq, k.ddq, g.eps, x.p, nullptr);
    path.controls.push_back(inv_sqrt2 * (x.q - x0.q + x.p - x0.p + integral));
    path.times.push_back(t);
    path.states.push_back(std::move(x));
  };
  for (std::size_t pi = 0; pi < g.pieces.size(); ++pi) {
    const Piece& pc = g.pieces[pi];
    const double h = (pc.s1 - pc.s0) / double(pc.intervals);
    if (pi == 0) push(pc.s0, evaluate(g, pc, pc.s0));
    path.piece_start.push_back(static_cast<Index>(path.times.size()) - 1);
    for (Index c = 0; c < pc.intervals; ++c) {
      const double a = pc.s0 + h * double(c);
      for (int k = 0; k < 4; ++k) {
        const double sk = a + 0.5 * h * (gx[k] + 1.0);
        integral += 0.5 * h * gw[k] * potential_gradient(m, evaluate(g, pc, sk).q);
      }
      const double b = c + 1 == pc.intervals ? pc.s1 : pc.s0 + h * double(c + 1);
      push(b, evaluate(g, pc, b));
    }
  }
  path.piece_start.push_back(static_cast<Index>(path.times.size()) - 1);
  path.target = target;
  path.rho = rho;
  path.epsilon = g.eps;
  path.T = T;
  return path;
}

ControlReport verify_control_path(const ModelSpec& m, const StateD& x0, const ControlPath& path) {
  ControlReport r;
  if (path.states.empty()) return r;
  const StateD& a = path.states.front();
  const StateD& b = path.states.back();
  r.start_q_error = (a.q - x0.q).norm();
  r.start_p_error = (a.p - x0.p).norm();
  r.end_q_error = (b.q - path.target).norm();
  r.end_p_error = b.p.norm();
  const double se = std::sqrt(path.epsilon);
  const DriftKind kind = DriftKind::relativistic(path.epsilon);
  const double sqrt2 = std::sqrt(2.0);
  r.min_distance = kInf;
  const auto& t = path.times;
  for (std::size_t pc = 0; pc + 1 < path.piece_start.size(); ++pc) {
    const Index lo = path.piece_start[pc], hi = path.piece_start[pc + 1];
    for (Index k = lo; k <= hi; ++k) {
      const auto& x = path.states[static_cast<std::size_t>(k)];
      const MatrixXr dq =
          piece_derivative(t, lo, hi, k, [&](Index j) -> const MatrixXr& { return path.states[static_cast<std::size_t>(j)].q; });
      const MatrixXr dp =
          piece_derivative(t, lo, hi, k, [&](Index j) -> const MatrixXr& { return path.states[static_cast<std::size_t>(j)].p; });
      const MatrixXr dU =
          piece_derivative(t, lo, hi, k, [&](Index j) -> const MatrixXr& { return path.controls[static_cast<std::size_t>(j)]; });
      MatrixXr v;
      velocity_field(kind, x.p, v);
      const MatrixXr grad = potential_gradient(m, x.q);
      const MatrixXr res_p = dp + v + grad - sqrt2 * dU;
      const MatrixXr res_q = dq - v;
      for (Index i = 0; i < x.particles(); ++i) {
        r.residual_p = std::max(r.residual_p, res_p.row(i).norm());
        r.residual_q = std::max(r.residual_q, res_q.row(i).norm());
        r.speed_sqrt_eps = std::max(r.speed_sqrt_eps, se * dq.row(i).norm());
      }
      if (m.has_singular_terms()) r.min_distance = std::min(r.min_distance, min_pair_distance(m, x.q).distance);
    }
  }
  r.passed = r.start_q_error <= 1e-9 && r.start_p_error <= 1e-9 && r.end_q_error <= 1e-9 && r.end_p_error <= 1e-9 &&
             r.speed_sqrt_eps < 1.0 && r.residual_p <= 1e-6 && r.residual_q <= 1e-6 &&
             (!m.has_singular_terms() || r.min_distance >= m.collision_floor);
  return r;
}

}  // namespace rlang
