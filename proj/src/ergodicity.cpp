#include "rlang/ergodicity.hpp"
#include "rlang/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>

namespace rlang {

// ---- bumps ---------------------------------------------------------------------------------

namespace {

struct BumpFactor {
  double value = 1.0;
  MatrixXr grad;
  double lap = 0.0;
};

// exp(1 - 1/(1 - u)), u = |x - c|^2 / r^2
BumpFactor bump_factor(const MatrixXr& x, const MatrixXr& c, double r) {
  BumpFactor b;
  b.grad = MatrixXr::Zero(x.rows(), x.cols());
  if (r <= 0.0) return b;
  const MatrixXr dx = x - c;
  const double u = dx.squaredNorm() / (r * r);
  if (u >= 1.0) {
    b.value = 0.0;
    return b;
  }
  const double w = 1.0 / (1.0 - u);
  const double val = std::exp(1.0 - w);
  const double d1 = -val * w * w;
  const double d2 = val * (w * w * w * w - 2.0 * w * w * w);
  const double dim = double(x.size());
  b.value = val;
  b.grad = d1 * (2.0 / (r * r)) * dx;
  b.lap = d2 * 4.0 * dx.squaredNorm() / (r * r * r * r) + d1 * 2.0 * dim / (r * r);
  return b;
}

// product over pairs (and the anchor) of the profile in |r| on (lo, hi): value and q-gradient
double shell_factor(const MatrixXr& q, double lo, double hi, bool anchored, MatrixXr& grad) {
  grad = MatrixXr::Zero(q.rows(), q.cols());
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double value = 1.0;
  MatrixXr logd = MatrixXr::Zero(q.rows(), q.cols());
  auto term = [&](const RowVectorXr& r, Index i, Index j) {
    const double rho = r.norm();
    const double t = (rho - mid) / half;
    const double u = t * t;
    if (u >= 1.0) return false;
    value *= std::exp(1.0 - 1.0 / (1.0 - u));
    const RowVectorXr g = (-2.0 * (rho - mid) / (half * half * (1.0 - u) * (1.0 - u))) * r / rho;
    logd.row(i) += g;
    if (j >= 0) logd.row(j) -= g;
    return true;
  };
  for (Index i = 0; i < q.rows(); ++i) {
    for (Index j = i + 1; j < q.rows(); ++j)
      if (!term(q.row(i) - q.row(j), i, j)) return 0.0;
    if (anchored && !term(q.row(i), i, -1)) return 0.0;
  }
  grad = value * logd;
  return value;
}

}  // namespace

Observable bump_observable(const Bump& b, bool anchored) {
  return Observable::analytic([b, anchored](const StateD& x) {
    const MatrixXr qc = b.q_radius > 0.0 ? b.q_center : MatrixXr::Zero(x.particles(), x.dim());
    const MatrixXr pc = b.p_radius > 0.0 ? b.p_center : MatrixXr::Zero(x.particles(), x.dim());
    BumpFactor fq = bump_factor(x.q, qc, b.q_radius);
    if (b.shell_hi > 0.0 && fq.value != 0.0) {
      MatrixXr gs;
      const double s = shell_factor(x.q, b.shell_lo, b.shell_hi, anchored, gs);
      fq.grad = s * fq.grad + fq.value * gs;
      fq.value *= s;
    }
    const BumpFactor fp = bump_factor(x.p, pc, b.p_radius);
    Jet j;
    j.value = fq.value * fp.value;
    j.gq = fp.value * fq.grad;
    j.gp = fq.value * fp.grad;
    j.lap_p = fq.value * fp.lap;
    return j;
  });
}

std::string bump_support_problem(const ModelSpec& m, const Bump& b) {
  const bool pairs = m.n >= 2, anchor = m.anchored;
  if (!pairs && !anchor) return "";
  if (b.shell_hi > 0.0) {
    if (!(b.shell_lo > 0.0 && b.shell_lo < b.shell_hi)) return "pair shell must satisfy 0 < lo < hi";
    return "";
  }
  if (b.q_radius <= 0.0) return "support unbounded in q and meets the collision set";
  if (b.q_center.rows() != m.n || b.q_center.cols() != m.d) return "q centre has the wrong shape";
  for (Index i = 0; i < m.n; ++i) {
    for (Index j = i + 1; j < m.n; ++j)
      if ((b.q_center.row(i) - b.q_center.row(j)).norm() - std::sqrt(2.0) * b.q_radius <= 0.0)
        return "support meets the collision set of pair (" + std::to_string(i) + "," + std::to_string(j) + ")";
    if (anchor && b.q_center.row(i).norm() - b.q_radius <= 0.0)
      return "support meets the anchor at particle " + std::to_string(i);
  }
  return "";
}

std::vector<Bump> default_bumps(const ModelSpec& m) {
  const Index n = m.n, d = m.d;
  const bool constrained = m.n >= 2 || m.anchored;
  const double rq = 1.5 * std::sqrt(double(n * d)) + 1.0;
  const double rp = 1.5 * std::sqrt(double(n * d)) + 1.0;
  MatrixXr shift = MatrixXr::Zero(n, d);
  shift.col(0).setConstant(0.6);
  MatrixXr qshift = MatrixXr::Zero(n, d);
  qshift.col(d - 1).setConstant(0.5);
  const MatrixXr zero = MatrixXr::Zero(n, d);

  std::vector<Bump> out;
  auto add = [&](std::string name, MatrixXr qc, double qr, MatrixXr pc, double pr, double lo = 0.0, double hi = 0.0) {
    out.push_back(Bump{std::move(qc), qr, std::move(pc), pr, std::move(name), lo, hi});
  };
  if (!constrained) {
    add("p-centred", zero, 0.0, zero, rp);
    add("p-shifted", zero, 0.0, shift, rp);
    add("p-narrow", zero, 0.0, zero, 0.6 * rp);
    add("qp-centred", zero, rq, zero, rp);
    add("qp-shifted", qshift, 0.8 * rq, shift, 0.8 * rp);
  } else {
    add("shell-centred", zero, rq, zero, rp, 0.2, 3.0);
    add("shell-p-shifted", zero, rq, shift, rp, 0.2, 3.0);
    add("shell-narrow", qshift, 0.8 * rq, zero, 0.6 * rp, 0.5, 2.5);
    add("shell-wide", zero, rq, -shift, 0.8 * rp, 0.3, 4.0);
    add("shell-tight", qshift, 0.7 * rq, shift, rp, 0.4, 1.6);
  }
  return out;
}

StationarityReport stationarity_check(const ModelSpec& m, const std::vector<Bump>& bumps,
                                      const StationarySample& sample, int threads) {
  m.validate();
  StationarityReport rep;
  rep.generator_epsilon = m.epsilon;
  rep.sample_epsilon = sample.epsilon;
  rep.all_pass = !bumps.empty();
  const DriftKind kind = DriftKind::for_model(m);
  const Index ns = static_cast<Index>(sample.states.size());
  for (const Bump& b : bumps) {
    StationarityItem item;
    item.name = b.name;
    item.reason = bump_support_problem(m, b);
    if (!item.reason.empty()) {
      item.rejected = true;
      rep.items.push_back(item);
      rep.all_pass = false;
      continue;
    }
    const Observable phi = bump_observable(b, m.anchored);
    std::vector<double> vals(static_cast<std::size_t>(ns), 0.0);
    std::vector<char> hit(static_cast<std::size_t>(ns), 0);
    parallel_for(ns, threads, [&](Index k) {
      const StateD& x = sample.states[static_cast<std::size_t>(k)];
      const Jet j = phi(x);
      if (j.value == 0.0 && j.gq.isZero(0.0) && j.gp.isZero(0.0)) return;
      hit[static_cast<std::size_t>(k)] = 1;
      vals[static_cast<std::size_t>(k)] = generator_from_jet(m, kind, j, x);
    });
    for (char h : hit) item.support_hits += h;
    const ChainMean cm = chain_mean(sample, vals);
    item.mean = cm.mean;
    item.se = cm.se;
    item.z = cm.se > 0.0 ? cm.mean / cm.se : (cm.mean == 0.0 ? 0.0 : kInf);
    if (item.support_hits == 0) {
      item.reason = "no samples in the support";
      item.pass = false;
    } else {
      item.pass = std::abs(cm.mean) <= 3.0 * cm.se;
    }
    rep.all_pass = rep.all_pass && item.pass;
    rep.items.push_back(item);
  }
  return rep;
}

// ---- mixing ------------------------------------------------------------------------------

ScalarFn energy_observable(const ModelSpec& m) {
  return [m](const StateD& x) {
    const double eps = m.epsilon;
    double e = 0.0;
    for (Index i = 0; i < x.particles(); ++i) {
      e += confining_value(m.confining, x.q.row(i)) + m.energy_shift - 1.0;
      const double p2 = x.p.row(i).squaredNorm();
      e += p2 / (std::sqrt(1.0 + eps * p2) + 1.0);  // (sqrt(1 + eps p2) - 1)/eps without cancellation
    }
    e += interaction_energy(m, x.q);
    return std::tanh(e / 4.0);
  };
}

MixingCurve mixing_curve(const ModelSpec& m, const ScalarFn& f, const StateD& x0, const std::vector<double>& t_grid,
                         Index n_ens, std::uint64_t seed, const StationarySample& reference, const Scheme& scheme,
                         int threads) {
  m.validate();
  if (t_grid.empty()) throw ParameterError("empty time grid");
  if (n_ens < 2) throw ParameterError("ensemble needs at least two members");
  std::vector<double> grid = t_grid;
  std::sort(grid.begin(), grid.end());
  if (grid.front() < 0.0) throw ParameterError("negative time in grid");
  const double T = grid.back();

  MixingCurve out;
  std::vector<double> ref_vals;
  ref_vals.reserve(reference.states.size());
  for (const auto& x : reference.states) ref_vals.push_back(f(x));
  const ChainMean ref = chain_mean(reference, ref_vals);
  out.reference = ref.mean;
  out.reference_se = std::isfinite(ref.se) ? ref.se : 0.0;

  const Index G = static_cast<Index>(grid.size());
  MatrixXr vals = MatrixXr::Constant(n_ens, G, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(static_cast<std::size_t>(n_ens), 0);
  SimulateOptions so;
  so.checkpoints = grid;
  so.record_all = false;
  const DriftKind kind = DriftKind::for_model(m);
  parallel_for(n_ens, threads, [&](Index k) {
    try {
      const Trajectory tr = simulate(m, kind, scheme, x0, T, substream_seed(seed, static_cast<std::uint64_t>(k)), so);
      std::size_t pos = 0;
      for (Index g = 0; g < G; ++g) {
        while (pos + 1 < tr.times.size() && tr.times[pos] < grid[static_cast<std::size_t>(g)]) ++pos;
        vals(k, g) = f(tr.states[pos]);
      }
    } catch (const Error&) {
      failed[static_cast<std::size_t>(k)] = 1;
    }
  });
  for (char c : failed) out.failures += c;
  if (out.failures * 2 > n_ens) {
    out.failure = "more than half of the ensemble failed";
    return out;
  }

  for (Index g = 0; g < G; ++g) {
    double s = 0.0, s2 = 0.0, cnt = 0.0;
    for (Index k = 0; k < n_ens; ++k) {
      if (failed[static_cast<std::size_t>(k)]) continue;
      s += vals(k, g);
      cnt += 1.0;
    }
    const double mean = s / cnt;
    for (Index k = 0; k < n_ens; ++k)
      if (!failed[static_cast<std::size_t>(k)]) s2 += (vals(k, g) - mean) * (vals(k, g) - mean);
    MixingPoint pt;
    pt.t = grid[static_cast<std::size_t>(g)];
    pt.mean = mean;
    pt.se = std::sqrt(s2 / std::max(1.0, cnt - 1.0) / cnt);
    pt.distance = std::abs(mean - out.reference);
    pt.se_distance = std::sqrt(pt.se * pt.se + out.reference_se * out.reference_se);
    out.points.push_back(pt);
  }

  // window: leading run of points above three times the noise floor
  for (auto& pt : out.points) {
    if (pt.distance > 3.0 * pt.se_distance) {
      pt.in_window = true;
      ++out.window;
    } else {
      break;
    }
  }
  out.decreasing = true;
  for (std::size_t k = 1; k < out.points.size(); ++k) {
    const auto& a = out.points[k - 1];
    const auto& b = out.points[k];
    const double slack = 2.0 * std::sqrt(a.se_distance * a.se_distance + b.se_distance * b.se_distance);
    if (b.distance > a.distance + slack) out.decreasing = false;
  }

  if (out.window >= 3) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double w = double(out.window);
    for (Index k = 0; k < out.window; ++k) {
      const auto& pt = out.points[static_cast<std::size_t>(k)];
      const double x = std::log1p(pt.t), y = std::log(pt.distance);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double den = w * sxx - sx * sx;
    if (den > 0.0) {
      const double slope = (w * sxy - sx * sy) / den;
      out.r_hat = -slope;
      out.intercept = (sy - slope * sx) / w;
      out.fit_defined = true;
    }
  }
  if (!out.fit_defined) out.failure = "fit undefined: fewer than three points above the noise floor";
  return out;
}

// ---- hypoellipticity ---------------------------------------------------------------------

RankReport hypoellipticity_check(const ModelSpec& m, const StateD& x, bool zero_q_block, double rel_threshold) {
  m.validate();
  if (m.has_singular_terms()) require_collision_free(m, x.q);
  const Index n = m.n, d = m.d, nd = n * d;
  const DriftKind kind = DriftKind::for_model(m);
  // Jacobian of v(p) by central differences, one particle block at a time
  MatrixXr Jv = MatrixXr::Zero(nd, nd);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) {
      const double h = 1e-6 * (1.0 + std::abs(x.p(i, k)));
      MatrixXr pp = x.p, pm = x.p;
      pp(i, k) += h;
      pm(i, k) -= h;
      MatrixXr vp, vm;
      velocity_field(kind, pp, vp);
      velocity_field(kind, pm, vm);
      const MatrixXr col = (vp - vm) / (2.0 * h);
      for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < d; ++b) Jv(a * d + b, i * d + k) = col(a, b);
    }
  }
  // columns: noise directions (0, e) and brackets [d_p, X0] = (J_v e, -J_v e)
  MatrixXr span = MatrixXr::Zero(2 * nd, 2 * nd);
  for (Index c = 0; c < nd; ++c) {
    span(nd + c, c) = 1.0;
    if (!zero_q_block) span.block(0, nd + c, nd, 1) = Jv.col(c);
    span.block(nd, nd + c, nd, 1) = -Jv.col(c);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(span);
  const auto sv = svd.singularValues();
  RankReport r;
  r.expected = 2 * nd;
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  for (Index k = 0; k < sv.size(); ++k) {
    r.singular_values.push_back(sv(k));
    if (sv(k) > rel_threshold * smax) ++r.rank;
  }
  r.full = r.rank == r.expected;
  return r;
}

// ---- pair-distance inequalities -------------------------------------------------------

std::pair<double, double> lemma_a1_sides(const MatrixXr& q, double gamma, double s) {
  const Index n = q.rows(), d = q.cols();
  double lhs = 0.0, rhs = 0.0;
  for (Index i = 0; i < n; ++i) {
    RowVectorXr a = RowVectorXr::Zero(d), b = RowVectorXr::Zero(d);
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const RowVectorXr r = q.row(i) - q.row(j);
      const double dist = r.norm();
      if (!(dist > 0.0)) throw SingularityError(i, j, dist);
      a += r / std::pow(dist, gamma);
      b += r / std::pow(dist, s + 1.0);
      if (j > i) rhs += 2.0 / std::pow(dist, s + gamma - 1.0);
    }
    lhs += a.dot(b);
  }
  return {lhs, rhs};
}

namespace {

MatrixXr random_configuration(Index n, Index d, Rng& rng) {
  const int mode = static_cast<int>(rng.below(3));
  MatrixXr q(n, d);
  if (mode == 0) {
    q = rng.normal_matrix(n, d);
  } else if (mode == 1) {
    q = rng.log_uniform(1e-3, 1e3) * rng.normal_matrix(n, d);
  } else {
    // one tight pair inside an ordinary cloud
    q = rng.normal_matrix(n, d);
    if (n >= 2) {
      const Index i = rng.below(n);
      Index j = rng.below(n - 1);
      if (j >= i) ++j;
      q.row(j) = q.row(i) + rng.log_uniform(1e-6, 1e-1) * rng.unit_vector(d);
    }
  }
  return q;
}

}  // namespace

LemmaCensus lemma_a1_check(Index N, Index d, double gamma, double s, Index n_trials, std::uint64_t seed,
                           int threads) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("gamma must lie in (0, 1]");
  if (!(s >= 0.0)) throw ParameterError("s must be >= 0");
  if (N < 2 || d < 1) throw ParameterError("need N >= 2 and d >= 1");
  LemmaCensus c;
  c.seed = seed;
  c.trials = n_trials;
  std::vector<double> margin(static_cast<std::size_t>(n_trials), kInf), eq(static_cast<std::size_t>(n_trials), 0.0);
  parallel_for(n_trials, threads, [&](Index k) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(k));
    MatrixXr q;
    double dmin = 0.0;
    do {
      q = random_configuration(N, d, rng);
      dmin = kInf;
      for (Index i = 0; i < N; ++i)
        for (Index j = i + 1; j < N; ++j) dmin = std::min(dmin, (q.row(i) - q.row(j)).norm());
    } while (!(dmin > 0.0));
    const auto [lhs, rhs] = lemma_a1_sides(q, gamma, s);
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    margin[static_cast<std::size_t>(k)] = scale > 0.0 ? (lhs - rhs) / scale : 0.0;
    if (N == 2) eq[static_cast<std::size_t>(k)] = scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
  });
  c.worst_margin = kInf;
  for (std::size_t k = 0; k < margin.size(); ++k) {
    c.worst_margin = std::min(c.worst_margin, margin[k]);
    if (margin[k] < -1e-9) ++c.violations;
    c.max_equality_error = std::max(c.max_equality_error, eq[k]);
  }
  if (n_trials == 0) c.worst_margin = 0.0;
  return c;
}

namespace {

struct A2Sample {
  double potential = 0.0;  // sum U + sum G
  double sum_abs = 0.0;    // sum |q_i|
  double sum_log = 0.0;    // sum_{i<j} log |q_ij|
  double max_neglog = 0.0; // max_{i<j} -log |q_ij| (0 without pairs)
};

std::vector<A2Sample> a2_samples(const ModelSpec& m, Index n, std::uint64_t seed, Index* near) {
  std::vector<A2Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  Rng rng(seed);
  Index near_count = 0;
  for (Index k = 0; k < n; ++k) {
    MatrixXr q;
    const int shell = static_cast<int>(k % 4);
    for (int attempt = 0;; ++attempt) {
      if (shell == 0) {
        q = 2.0 * rng.normal_matrix(m.n, m.d);
      } else if (shell == 1) {
        q = rng.log_uniform(1.0, 1e3) * rng.normal_matrix(m.n, m.d);
      } else if (shell == 2) {
        q = rng.normal_matrix(m.n, m.d);
        if (m.n >= 2) {
          const Index i = rng.below(m.n);
          Index j = rng.below(m.n - 1);
          if (j >= i) ++j;
          q.row(j) = q.row(i) + rng.log_uniform(1e-6, 1e-2) * rng.unit_vector(m.d);
        } else if (m.anchored) {
          q.row(0) = rng.log_uniform(1e-6, 1e-2) * rng.unit_vector(m.d);
        }
      } else {
        q = rng.log_uniform(1e-3, 1.0) * rng.normal_matrix(m.n, m.d);
      }
      if (!m.has_singular_terms() || min_pair_distance(m, q).distance >= m.collision_floor) break;
      if (attempt > 1000) throw Error("could not draw a collision-free configuration");
    }
    if (shell == 2 && m.has_singular_terms()) ++near_count;
    A2Sample s;
    s.potential = potential_energy(m, q);
    for (Index i = 0; i < m.n; ++i) s.sum_abs += q.row(i).norm();
    s.max_neglog = m.n >= 2 ? -kInf : 0.0;
    for (Index i = 0; i < m.n; ++i)
      for (Index j = i + 1; j < m.n; ++j) {
        const double l = std::log((q.row(i) - q.row(j)).norm());
        s.sum_log += l;
        s.max_neglog = std::max(s.max_neglog, -l);
      }
    out.push_back(s);
  }
  if (near) *near = near_count;
  return out;
}

double middle(const A2Sample& s, double c) { return s.sum_abs - c * s.sum_log; }
double right(const A2Sample& s, double c) { return c * s.sum_abs + c * s.max_neglog; }

LemmaCensus certify(const std::vector<A2Sample>& ss, double c, double C, std::uint64_t seed) {
  LemmaCensus out;
  out.seed = seed;
  out.trials = static_cast<Index>(ss.size());
  out.worst_margin = kInf;
  for (const auto& s : ss) {
    const double mid = middle(s, c);
    const double l = C * s.potential, r = right(s, c);
    const double m1 = (l - mid) / std::max({std::abs(l), std::abs(mid), 1.0});
    const double m2 = (mid - r) / std::max({std::abs(mid), std::abs(r), 1.0});
    const double mm = std::min(m1, m2);
    out.worst_margin = std::min(out.worst_margin, mm);
    if (mm < -1e-12) ++out.violations;
  }
  if (ss.empty()) out.worst_margin = 0.0;
  return out;
}

}  // namespace

LemmaA2Fit lemma_a2_fit(const ModelSpec& m, Index n_trials, std::uint64_t seed, int threads) {
  (void)threads;
  m.validate();
  if (n_trials < 1) throw ParameterError("n_trials must be >= 1");
  LemmaA2Fit fit;
  const auto ss = a2_samples(m, n_trials, substream_seed(seed, 0), &fit.near_collision_samples);
  for (const auto& s : ss)
    if (!(s.potential > 0.0)) {
      fit.census = certify(ss, 0.0, 0.0, seed);
      return fit;  // sum U + sum G must be positive for any C_G to exist
    }
  // largest c_G on a descending grid for which the right inequality holds everywhere
  for (double c = 0.5; c >= 1e-6; c *= 0.5) {
    bool ok = true;
    double C = 0.0;
    for (const auto& s : ss) {
      if (middle(s, c) < right(s, c) - 1e-12 * std::max(1.0, std::abs(middle(s, c)))) {
        ok = false;
        break;
      }
      C = std::max(C, middle(s, c) / s.potential);
    }
    if (!ok) continue;
    // factor 2 on the empirical sup; the tail of the ratio is only sampled
    C = 2.0 * std::max(C, 1e-12);
    const auto fresh = a2_samples(m, n_trials, substream_seed(seed, 1), nullptr);
    const LemmaCensus cert = certify(fresh, c, C, seed);
    if (cert.violations > 0) continue;
    fit.c_G = c;
    fit.C_G = C;
    fit.census = cert;
    fit.feasible = true;
    return fit;
  }
  fit.census = certify(ss, 0.0, 0.0, seed);
  return fit;
}

LemmaCensus lemma_a2_certify(const ModelSpec& m, double c_G, double C_G, Index n_trials, std::uint64_t seed) {
  m.validate();
  return certify(a2_samples(m, n_trials, seed, nullptr), c_G, C_G, seed);
}

}  // namespace rlang
