#include "rlang/lyapunov.hpp"
#include "rlang/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace rlang {

std::string describe(const LyapunovParams& p) {
  char buf[160];
  if (const auto* a = std::get_if<LyapunovParams1>(&p))
    std::snprintf(buf, sizeof buf, "V1(eps1=%.6g, kappa1=%.6g)", a->eps1, a->kappa1);
  else {
    const auto& b = std::get<LyapunovParamsN>(p);
    std::snprintf(buf, sizeof buf, "VN(A1=%.6g, A2=%.6g, kappaN=%.6g)", b.A1, b.A2, b.kappaN);
  }
  return buf;
}

LyapunovParams default_params(const ModelSpec& m) {
  if (m.n == 1) return LyapunovParams1{};
  return LyapunovParamsN{};
}

double default_alpha(const ModelSpec& m) { return m.n == 1 ? 0.5 : 1.0 / 3.0; }

namespace {

void require_resolved(double kappa) {
  if (std::isnan(kappa)) throw ParameterError("kappa is unresolved; set it or let drift_scan choose it");
}

void require_v_floor(double v) {
  if (!(v >= 1.0)) throw ParameterError("Lyapunov function below 1; increase kappa");
}

void require_g2(const ModelSpec& m) {
  if (!m.singular.g2_compliant())
    throw ParameterError("multi-particle Lyapunov function needs beta1 in (1,2] and beta2 in [0, beta1-1)");
}

double eps1_of(const ModelSpec& m, const LyapunovParams1& p) { return std::isnan(p.eps1) ? m.epsilon : p.eps1; }

}  // namespace

Jet radial_qp_jet(const StateD& x) {
  if (x.particles() != 1) throw ParameterError("radial term is defined for one particle");
  const RowVectorXr q = x.q.row(0), p = x.p.row(0);
  const double r = q.norm();
  if (!(r > 0.0)) throw SingularityError(0, -1, r);
  const double s = q.dot(p);
  Jet j;
  j.value = s / r;
  j.gq = p / r - (s / (r * r * r)) * q;
  j.gp = q / r;
  j.lap_p = 0.0;
  return j;
}

Jet pair_flux_jet(const ModelSpec& m, const StateD& x) {
  const Index n = x.particles(), d = x.dim();
  const double b = m.singular.beta1;
  Jet j = Jet::constant(0.0, n, d);
  for (Index i = 0; i < n; ++i)
    for (Index k = i + 1; k < n; ++k) {
      const RowVectorXr r = x.q.row(i) - x.q.row(k);
      const RowVectorXr pr = x.p.row(i) - x.p.row(k);
      const double len = r.norm();
      if (!(len >= m.collision_floor)) throw SingularityError(i, k, len);
      const double scale = std::pow(len, 1.0 - b);
      const RowVectorXr w = scale * r;
      j.value += 2.0 * w.dot(pr);
      j.gp.row(i) += 2.0 * w;
      j.gp.row(k) -= 2.0 * w;
      const RowVectorXr rh = r / len;
      const RowVectorXr jp = scale * (pr - (b - 1.0) * rh.dot(pr) * rh);
      j.gq.row(i) += 2.0 * jp;
      j.gq.row(k) -= 2.0 * jp;
    }
  return j;
}

namespace {

// The three terms of V (without coefficients) and their coefficients.
std::array<Jet, 3> terms_single(const ModelSpec& m, const StateD& x) {
  const Jet h = hamiltonian_jet(m, x);
  return {power(h, 2.0), qp_jet(x), radial_qp_jet(x)};
}

std::array<Jet, 3> terms_multi(const ModelSpec& m, const StateD& x) {
  const Jet h = hamiltonian_jet(m, x);
  const double eps = m.epsilon;
  return {power(h, 3.0), eps * product(h, qp_jet(x)), (eps * eps) * pair_flux_jet(m, x)};
}

std::array<double, 3> coefficients(const ModelSpec& m, const LyapunovParams& p) {
  if (const auto* a = std::get_if<LyapunovParams1>(&p)) return {1.0, eps1_of(m, *a), -1.0};
  const auto& b = std::get<LyapunovParamsN>(p);
  return {b.A1, 1.0, -b.A2};
}

double kappa_of(const LyapunovParams& p) {
  if (const auto* a = std::get_if<LyapunovParams1>(&p)) return a->kappa1;
  return std::get<LyapunovParamsN>(p).kappaN;
}

void set_kappa(LyapunovParams& p, double k) {
  if (auto* a = std::get_if<LyapunovParams1>(&p))
    a->kappa1 = k;
  else
    std::get<LyapunovParamsN>(p).kappaN = k;
}

void check_family(const ModelSpec& m, const LyapunovParams& p) {
  if (std::holds_alternative<LyapunovParams1>(p)) {
    if (m.n != 1) throw ParameterError("V1 is the single-particle Lyapunov function");
  } else {
    if (m.n < 2) throw ParameterError("VN needs at least two particles");
    require_g2(m);
    const auto& b = std::get<LyapunovParamsN>(p);
    if (!(b.A1 > 0.0 && b.A2 > 0.0)) throw ParameterError("A1 and A2 must be positive");
  }
}

Jet combine(const std::array<Jet, 3>& t, const std::array<double, 3>& c, double kappa) {
  return (c[0] * t[0] + c[1] * t[1] + c[2] * t[2]) + kappa;
}

}  // namespace

Jet v1_jet(const ModelSpec& m, const LyapunovParams1& p, const StateD& x) {
  check_family(m, p);
  require_resolved(p.kappa1);
  const Jet v = combine(terms_single(m, x), coefficients(m, p), p.kappa1);
  require_v_floor(v.value);
  return v;
}

Jet vN_jet(const ModelSpec& m, const LyapunovParamsN& p, const StateD& x) {
  check_family(m, p);
  require_resolved(p.kappaN);
  const Jet v = combine(terms_multi(m, x), coefficients(m, p), p.kappaN);
  require_v_floor(v.value);
  return v;
}

Jet lyapunov_jet(const ModelSpec& m, const LyapunovParams& p, const StateD& x) {
  if (const auto* a = std::get_if<LyapunovParams1>(&p)) return v1_jet(m, *a, x);
  return vN_jet(m, std::get<LyapunovParamsN>(p), x);
}

double v1(const ModelSpec& m, const LyapunovParams1& p, const StateD& x) {
  check_family(m, p);
  require_resolved(p.kappa1);
  const double h = hamiltonian(m, x);
  const RowVectorXr q = x.q.row(0), pp = x.p.row(0);
  const double r = q.norm();
  if (!(r > 0.0)) throw SingularityError(0, -1, r);
  const double s = q.dot(pp);
  const double v = h * h + eps1_of(m, p) * s - s / r + p.kappa1;
  require_v_floor(v);
  return v;
}

double vN(const ModelSpec& m, const LyapunovParamsN& p, const StateD& x) {
  check_family(m, p);
  require_resolved(p.kappaN);
  const double eps = m.epsilon;
  const double h = hamiltonian(m, x);
  const double s = (x.q.array() * x.p.array()).sum();
  double flux = 0.0;
  for (Index i = 0; i < x.particles(); ++i)
    for (Index j = 0; j < x.particles(); ++j) {
      if (i == j) continue;
      const RowVectorXr r = x.q.row(i) - x.q.row(j);
      flux += r.dot(x.p.row(i) - x.p.row(j)) / std::pow(r.norm(), m.singular.beta1 - 1.0);
    }
  const double v = p.A1 * h * h * h + eps * h * s - p.A2 * eps * eps * flux + p.kappaN;
  require_v_floor(v);
  return v;
}

double lyapunov_value(const ModelSpec& m, const LyapunovParams& p, const StateD& x) {
  if (const auto* a = std::get_if<LyapunovParams1>(&p)) return v1(m, *a, x);
  return vN(m, std::get<LyapunovParamsN>(p), x);
}

double generator_on_v(const ModelSpec& m, const LyapunovParams& p, const StateD& x, double n) {
  const Jet v = lyapunov_jet(m, p, x);
  return generator_from_jet(m, DriftKind::for_model(m), power(v, n), x);
}

// ---- sampler ---------------------------------------------------------------------------

StateD RegionSampler::draw(const ModelSpec& m, int shell, Rng& rng) const {
  const Index n = m.n, d = m.d;
  auto gaussian_block = [&](double scale) {
    MatrixXr b(n, d);
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < d; ++k) b(i, k) = scale * rng.normal();
    return b;
  };
  auto far_block = [&]() {
    MatrixXr b(n, d);
    for (Index i = 0; i < n; ++i) b.row(i) = rng.log_uniform(1.0, far_max) * rng.unit_vector(d);
    return b;
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    StateD x(n, d);
    if (shell == 0) {
      x.q = gaussian_block(rng.uniform(0.2, bulk_q));
      x.p = gaussian_block(rng.uniform(0.0, bulk_p));
    } else if (shell == 1) {
      const Index mode = rng.below(3);
      x.q = mode == 1 ? gaussian_block(rng.uniform(0.2, bulk_q)) : far_block();
      x.p = mode == 0 ? gaussian_block(rng.uniform(0.0, bulk_p)) : far_block();
    } else {
      x.q = gaussian_block(rng.uniform(0.2, bulk_q));
      const double delta = rng.log_uniform(near_lo, near_hi);
      if (m.anchored && (n == 1 || rng.below(2) == 0)) {
        const Index i = rng.below(n);
        x.q.row(i) = delta * rng.unit_vector(d);
      } else if (n >= 2) {
        const Index i = rng.below(n);
        Index j = rng.below(n - 1);
        if (j >= i) ++j;
        x.q.row(j) = x.q.row(i) + delta * rng.unit_vector(d);
      } else {
        x.q.row(0) = delta * rng.unit_vector(d);
      }
      x.p = gaussian_block(rng.log_uniform(1e-2, 1e2));
      if (m.has_singular_terms() && min_pair_distance(m, x.q).distance < 0.5 * near_lo) continue;
      return x;
    }
    if (m.has_singular_terms() && min_pair_distance(m, x.q).distance < near_lo) continue;
    return x;
  }
  throw Error("region sampler could not draw a collision-free state");
}

std::string RegionSampler::describe() const {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "stratified by sample index mod 3: bulk (Gaussian, |q| sd <= %.3g, |p| sd <= %.3g); far field "
                "(|q| and/or |p| log-uniform in [1, %.3g]); near collision (one pair or the anchor at distance "
                "log-uniform in [%.3g, %.3g], |p| sd log-uniform in [1e-2, 1e2])",
                bulk_q, bulk_p, far_max, near_lo, near_hi);
  return buf;
}

ScanSet draw_scan_set(const ModelSpec& m, const RegionSampler& sampler, Index count, std::uint64_t seed,
                      int threads) {
  if (count < 1) throw ParameterError("sample count must be >= 1");
  m.validate();
  ScanSet set;
  set.single = m.n == 1;
  if (!set.single) require_g2(m);
  set.sampler = sampler.describe();
  set.seed = seed;
  set.samples.resize(std::size_t(count));
  parallel_for(std::size_t(count), threads, [&](std::size_t k) {
    Rng rng = Rng::substream(seed, k);
    ScanSample& s = set.samples[k];
    s.x = sampler.draw(m, int(k % 3), rng);
    try {
      const std::array<Jet, 3> t = set.single ? terms_single(m, s.x) : terms_multi(m, s.x);
      const DriftKind kind = DriftKind::for_model(m);
      const DriftField<double> b = drift(kind, m, s.x);
      int g = 0;
      for (int a = 0; a < 3; ++a) {
        s.value[a] = t[a].value;
        s.gen[a] = (b.dq.array() * t[a].gq.array()).sum() + (b.dp.array() * t[a].gp.array()).sum() + t[a].lap_p;
        for (int c = a; c < 3; ++c) s.gram[g++] = (t[a].gp.array() * t[c].gp.array()).sum();
      }
      s.ok = std::all_of(s.value.begin(), s.value.end(), [](double v) { return std::isfinite(v); }) &&
             std::all_of(s.gen.begin(), s.gen.end(), [](double v) { return std::isfinite(v); }) &&
             std::all_of(s.gram.begin(), s.gram.end(), [](double v) { return std::isfinite(v); });
    } catch (const SingularityError&) {
      s.ok = false;
    } catch (const InvalidStateError&) {
      s.ok = false;
    }
  });
  return set;
}

namespace {

struct Point {
  double x, y;
  std::size_t k;
};

// Upper convex hull of points sorted by x (ties keep the largest y).
std::vector<Point> upper_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y > b.y;
    return a.k < b.k;
  });
  std::vector<Point> h;
  for (const Point& p : pts) {
    if (!h.empty() && h.back().x == p.x) continue;
    while (h.size() >= 2) {
      const Point& a = h[h.size() - 2];
      const Point& b = h.back();
      // remove b when it lies on or below the chord a -> p
      const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
      if (cross >= 0.0)
        h.pop_back();
      else
        break;
    }
    h.push_back(p);
  }
  return h;
}

}  // namespace

DriftReport drift_scan(const ModelSpec& m, const LyapunovParams& p_in, double n, const ScanSet& set, double alpha) {
  LyapunovParams p = p_in;
  check_family(m, p);
  if (set.single != std::holds_alternative<LyapunovParams1>(p)) throw ParameterError("scan set and params disagree");
  if (!(n >= 1.0)) throw ParameterError("moment order n must be >= 1");
  const double al = std::isnan(alpha) ? default_alpha(m) : alpha;
  if (auto* a = std::get_if<LyapunovParams1>(&p); a && std::isnan(a->eps1)) a->eps1 = m.epsilon;
  const std::array<double, 3> c = coefficients(m, p);

  DriftReport rep;
  rep.n = n;
  rep.alpha = al;
  rep.samples = Index(set.samples.size());
  rep.sampler = set.sampler;
  rep.seed = set.seed;

  if (std::isnan(kappa_of(p))) {
    double lo = kInf;
    for (const auto& s : set.samples)
      if (s.ok) lo = std::min(lo, c[0] * s.value[0] + c[1] * s.value[1] + c[2] * s.value[2]);
    set_kappa(p, 1.0 + std::max(0.0, std::isfinite(lo) ? -lo : 0.0));
  }
  const double kappa = kappa_of(p);
  rep.params = p;

  std::vector<Point> pts;
  pts.reserve(set.samples.size());
  std::vector<double> ys(set.samples.size(), 0.0), xs(set.samples.size(), 0.0);
  rep.min_v = kInf;
  for (std::size_t k = 0; k < set.samples.size(); ++k) {
    const ScanSample& s = set.samples[k];
    if (!s.ok) {
      ++rep.excluded;
      continue;
    }
    const double v = c[0] * s.value[0] + c[1] * s.value[1] + c[2] * s.value[2] + kappa;
    rep.min_v = std::min(rep.min_v, v);
    require_v_floor(v);
    const double lv = c[0] * s.gen[0] + c[1] * s.gen[1] + c[2] * s.gen[2];
    const double g2 = c[0] * c[0] * s.gram[0] + 2 * c[0] * c[1] * s.gram[1] + 2 * c[0] * c[2] * s.gram[2] +
                      c[1] * c[1] * s.gram[3] + 2 * c[1] * c[2] * s.gram[4] + c[2] * c[2] * s.gram[5];
    const double y = n * std::pow(v, n - 1.0) * lv + (n == 1.0 ? 0.0 : n * (n - 1.0) * std::pow(v, n - 2.0) * g2);
    const double x = std::pow(v, n - al);
    if (!std::isfinite(x) || !std::isfinite(y)) {
      ++rep.excluded;
      continue;
    }
    xs[k] = x;
    ys[k] = y;
    if (y < 0.0) ++rep.negative_drift_count;
    pts.push_back({x, y, k});
  }
  rep.evaluated = Index(pts.size());
  if (pts.size() < 2) {
    rep.failure = "fewer than two evaluable samples";
    return rep;
  }
  const std::vector<Point> hull = upper_hull(pts);
  rep.hull_vertices = Index(hull.size());
  if (hull.size() < 2) {
    rep.failure = "degenerate envelope (all samples share one V value)";
    return rep;
  }
  const Point& a = hull[hull.size() - 2];
  const Point& b = hull.back();
  rep.c = -(b.y - a.y) / (b.x - a.x);
  rep.C = std::max(0.0, b.y + rep.c * b.x);

  rep.worst_margin = -kInf;
  std::size_t worst = pts.front().k;
  for (const Point& q : pts) {
    const double margin = q.y + rep.c * q.x - rep.C;
    if (margin > rep.worst_margin) {
      rep.worst_margin = margin;
      worst = q.k;
    }
    const double scale = std::max({std::abs(q.y), std::abs(rep.c) * q.x, rep.C, 1.0});
    if (margin > 1e-9 * scale) ++rep.violations;
  }
  rep.argmax_state = set.samples[worst].x;
  if (!(rep.c > 0.0) || !std::isfinite(rep.c)) {
    rep.failure = "fitted c is not positive: L V^n does not decrease along the largest sampled V";
    return rep;
  }
  if (rep.violations > 0) {
    rep.failure = "envelope violations";
    return rep;
  }
  rep.passed = true;
  return rep;
}

DriftReport drift_scan(const ModelSpec& m, const LyapunovParams& p, double n, const RegionSampler& sampler,
                       Index count, std::uint64_t seed, int threads, double alpha) {
  return drift_scan(m, p, n, draw_scan_set(m, sampler, count, seed, threads), alpha);
}

TuneResult tune_constants(const ModelSpec& m, double n, Index budget, std::uint64_t seed,
                          const RegionSampler& sampler, Index count, int threads) {
  if (budget < 1) throw ParameterError("budget must be >= 1");
  const ScanSet set = draw_scan_set(m, sampler, count, seed, threads);
  std::vector<LyapunovParams> grid;
  if (m.n == 1) {
    grid.push_back(LyapunovParams1{});
    for (double f : {0.5, 2.0, 0.25, 4.0, 0.125, 8.0, 0.0625, 16.0}) grid.push_back(LyapunovParams1{f * m.epsilon, kAuto});
  } else {
    grid.push_back(LyapunovParamsN{});
    const double vals[] = {1.0, 2.0, 4.0, 8.0, 16.0, 0.5};
    for (double a1 : vals)
      for (double a2 : vals)
        if (!(a1 == 1.0 && a2 == 1.0)) grid.push_back(LyapunovParamsN{a1, a2, kAuto});
  }
  TuneResult best;
  for (Index g = 0; g < budget && g < Index(grid.size()); ++g) {
    DriftReport r = drift_scan(m, grid[std::size_t(g)], n, set);
    ++best.evaluated;
    if (g == 0) {
      best.params = r.params;
      best.report = r;
      best.found = r.passed;
      continue;
    }
    if (r.passed && (!best.found || r.c > best.report.c)) {
      best.params = r.params;
      best.report = r;
      best.found = true;
    }
  }
  return best;
}

}  // namespace rlang
