#include "rlang/limits.hpp"
#include "rlang/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace rlang {

void CutoffSpec::validate() const {
  if (!(R > 2.0)) throw ParameterError("cutoff radius R must exceed 2");
}

TruncatedModel truncate_model(const ModelSpec& m, double R, Index probes, std::uint64_t seed) {
  CutoffSpec{R}.validate();
  TruncatedModel t;
  t.relativistic = DriftKind::relativistic_truncated(m.epsilon, R);
  t.langevin = DriftKind::langevin_truncated(R);
  Rng rng(seed);
  MatrixXr fa, fb;
  for (Index k = 0; k < probes; ++k) {
    MatrixXr q(m.n, m.d);
    const double scale = rng.log_uniform(1e-3, 2.0 * (R + 1.0));
    for (Index i = 0; i < m.n; ++i)
      for (Index c = 0; c < m.d; ++c) q(i, c) = scale * rng.normal();
    if (k % 4 == 3 && m.n >= 2) q.row(1) = q.row(0) + rng.log_uniform(1e-4, 1.0) * rng.unit_vector(m.d);
    conservative_force(m, t.langevin, q, fa);
    t.force_bound = std::max(t.force_bound, fa.cwiseAbs().maxCoeff());
    MatrixXr q2 = q;
    const double h = 1e-4 * rng.uniform(0.1, 1.0);
    for (Index i = 0; i < m.n; ++i)
      for (Index c = 0; c < m.d; ++c) q2(i, c) += h * rng.normal();
    conservative_force(m, t.langevin, q2, fb);
    const double dq = (q2 - q).norm();
    if (dq > 0.0) t.lipschitz_estimate = std::max(t.lipschitz_estimate, (fb - fa).norm() / dq);
  }
  return t;
}

void fit_loglog(RateFit& fit) {
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < fit.eps.size(); ++k) {
    if (!(fit.statistic[k] > 0.0)) continue;
    lx.push_back(std::log(fit.eps[k]));
    ly.push_back(std::log(fit.statistic[k]));
  }
  fit.residuals.clear();
  if (lx.size() < 2) {
    fit.ok = false;
    fit.failure = "fewer than two positive statistics";
    return;
  }
  const double nx = double(lx.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= nx;
  my /= nx;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  if (!(sxx > 0.0)) {
    fit.ok = false;
    fit.failure = "epsilon grid has a single distinct value";
    return;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    const double r = ly[k] - (fit.intercept + fit.slope * lx[k]);
    fit.residuals.push_back(r);
    sse += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
}

namespace {

double spans_decades(const std::vector<double>& eps) {
  const auto [lo, hi] = std::minmax_element(eps.begin(), eps.end());
  return std::log10(*hi / *lo);
}

void check_eps_list(const std::vector<double>& eps_list) {
  if (eps_list.empty()) throw ParameterError("epsilon list is empty");
  for (double e : eps_list)
    if (!(e > 0.0 && e <= 1.0)) throw ParameterError("epsilon values must lie in (0, 1]");
}

}  // namespace

std::vector<RateFit> newtonian_rate_experiment(const ModelSpec& m, double R, const StateD& x0, double T,
                                               const std::vector<double>& eps_list, const std::vector<double>& ns,
                                               Index n_seeds, std::uint64_t master_seed, const ExperimentRun& run) {
  check_eps_list(eps_list);
  if (n_seeds < 1) throw ParameterError("n_seeds must be >= 1");
  CutoffSpec{R}.validate();
  const std::size_t ne = eps_list.size();
  // sup moments[e][seed][n]
  std::vector<std::vector<std::vector<double>>> sup(ne);
  std::vector<std::vector<char>> okv(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    sup[e].assign(std::size_t(n_seeds), std::vector<double>(ns.size(), 0.0));
    okv[e].assign(std::size_t(n_seeds), 0);
    const DriftKind ka = DriftKind::relativistic_truncated(eps_list[e], R);
    const DriftKind kb = DriftKind::langevin_truncated(R);
    parallel_for(std::size_t(n_seeds), run.threads, [&](std::size_t k) {
      try {
        const CoupledRun cr = simulate_coupled(m, ka, kb, run.scheme, x0, T, substream_seed(master_seed, k),
                                               CoupledOptions{false});
        for (std::size_t a = 0; a < ns.size(); ++a) sup[e][k][a] = cr.sup_moment(ns[a]);
        okv[e][k] = 1;
      } catch (const Error&) {
        okv[e][k] = 0;
      }
    });
  }
  std::vector<RateFit> fits;
  for (std::size_t a = 0; a < ns.size(); ++a) {
    RateFit f;
    f.n = ns[a];
    f.seeds = n_seeds;
    f.master_seed = master_seed;
    f.eps = eps_list;
    f.ok = true;
    for (std::size_t e = 0; e < ne; ++e) {
      double s = 0, s2 = 0;
      Index ok = 0;
      for (Index k = 0; k < n_seeds; ++k) {
        if (!okv[e][std::size_t(k)]) continue;
        const double v = sup[e][std::size_t(k)][a];
        s += v;
        s2 += v * v;
        ++ok;
      }
      const double mean = ok ? s / double(ok) : 0.0;
      const double var = ok > 1 ? std::max(0.0, (s2 - double(ok) * mean * mean) / double(ok - 1)) : 0.0;
      f.statistic.push_back(mean);
      f.stderr_.push_back(ok ? std::sqrt(var / double(ok)) : 0.0);
      f.n_ok.push_back(ok);
      f.n_failed.push_back(n_seeds - ok);
      if (2 * ok < n_seeds) {
        f.ok = false;
        f.failure = "fewer than half of the seeds survived";
      }
    }
    if (f.ok) {
      fit_loglog(f);
      if (f.ok && spans_decades(eps_list) < 2.0 - 1e-9) {
        f.ok = false;
        f.failure = "epsilon list must span at least two decades";
      }
    }
    fits.push_back(f);
  }
  return fits;
}

RateFit newtonian_rate_experiment(const ModelSpec& m, double R, const StateD& x0, double T,
                                  const std::vector<double>& eps_list, double n, Index n_seeds,
                                  std::uint64_t master_seed, const ExperimentRun& run) {
  return newtonian_rate_experiment(m, R, x0, T, eps_list, std::vector<double>{n}, n_seeds, master_seed, run).front();
}

std::pair<double, double> wilson_interval(Index successes, Index trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double nn = double(trials);
  const double ph = double(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (ph + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn)) / denom;
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return {lo, hi};
}

ProbCurve prob_convergence_experiment(const ModelSpec& m, const StateD& x0, double T, double xi,
                                      const std::vector<double>& eps_list, Index n_seeds, std::uint64_t master_seed,
                                      const ExperimentRun& run) {
  check_eps_list(eps_list);
  if (m.n < 2) throw ParameterError("the probability curve needs at least two particles");
  if (!(xi >= 0.0)) throw ParameterError("xi must be >= 0");
  ProbCurve curve;
  curve.xi = xi;
  for (double eps : eps_list) {
    std::vector<double> sups(std::size_t(n_seeds), 0.0);
    std::vector<char> ok(std::size_t(n_seeds), 0);
    parallel_for(std::size_t(n_seeds), run.threads, [&](std::size_t k) {
      try {
        const CoupledRun cr =
            simulate_coupled(m, run.scheme, x0, T, eps, substream_seed(master_seed, k), CoupledOptions{false});
        sups[k] = cr.sup_distance.back();
        ok[k] = 1;
      } catch (const Error&) {
        ok[k] = 0;
      }
    });
    ProbPoint pt;
    pt.eps = eps;
    for (Index k = 0; k < n_seeds; ++k) {
      if (!ok[std::size_t(k)]) {
        ++pt.n_failed;
        continue;
      }
      ++pt.n_ok;
      if (sups[std::size_t(k)] > xi) ++pt.exceed;
    }
    pt.phat = pt.n_ok ? double(pt.exceed) / double(pt.n_ok) : 0.0;
    std::tie(pt.lo, pt.hi) = wilson_interval(pt.exceed, pt.n_ok);
    if (2 * pt.n_ok < n_seeds) {
      curve.ok = false;
      curve.failure = "fewer than half of the seeds survived";
    }
    curve.points.push_back(pt);
  }
  curve.strictly_decreasing = curve.points.size() >= 2;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    if (curve.points[k].phat < curve.points[k - 1].phat)
      ++curve.consecutive_decreases;
    else
      curve.strictly_decreasing = false;
  }
  if (curve.points.size() >= 2) {
    const ProbPoint& a = curve.points.front();
    const ProbPoint& b = curve.points.back();
    curve.endpoints_separated = a.lo > b.hi || b.lo > a.hi;
  }
  return curve;
}

double gamma1(const ModelSpec& m, const StateD& x) { return potential_energy(m, x.q) + 0.5 * x.p.squaredNorm(); }

double gamma2(const ModelSpec& m, double eps, const StateD& x) {
  const double phi = potential_energy(m, x.q);
  const double p2 = x.p.squaredNorm();
  return 0.5 * eps * phi * phi + phi * std::sqrt(1.0 + eps * p2) + 0.5 * p2;
}

MomentSeries moment_monitor(const ModelSpec& m, const DriftKind& kind, const Trajectory& tr) {
  MomentSeries s;
  s.functional = kind.is_relativistic() ? "gamma2" : "gamma1";
  s.sup = -kInf;
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    double v;
    try {
      v = kind.is_relativistic() ? gamma2(m, kind.epsilon, tr.states[k]) : gamma1(m, tr.states[k]);
    } catch (const Error&) {
      ++s.flagged;
      continue;
    }
    s.times.push_back(tr.times[k]);
    s.values.push_back(v);
    s.sup = std::max(s.sup, v);
  }
  return s;
}

MomentUniformity moment_uniformity_experiment(const ModelSpec& m, const StateD& x0, double T,
                                              const std::vector<double>& eps_list, Index n_seeds,
                                              std::uint64_t master_seed, const ExperimentRun& run) {
  check_eps_list(eps_list);
  MomentUniformity out;
  out.eps = eps_list;
  for (double eps : eps_list) {
    ModelSpec me = m;
    me.epsilon = eps;
    const DriftKind kind = DriftKind::relativistic(eps);
    std::vector<double> sups(std::size_t(n_seeds), 0.0);
    std::vector<char> ok(std::size_t(n_seeds), 0);
    parallel_for(std::size_t(n_seeds), run.threads, [&](std::size_t k) {
      try {
        const Trajectory tr = simulate(me, kind, run.scheme, x0, T, substream_seed(master_seed, k));
        const MomentSeries ms = moment_monitor(me, kind, tr);
        sups[k] = ms.sup;
        ok[k] = ms.flagged == 0;
      } catch (const Error&) {
        ok[k] = 0;
      }
    });
    double s = 0, s2 = 0;
    Index cnt = 0;
    for (Index k = 0; k < n_seeds; ++k) {
      if (!ok[std::size_t(k)]) continue;
      s += sups[std::size_t(k)];
      s2 += sups[std::size_t(k)] * sups[std::size_t(k)];
      ++cnt;
    }
    const double mean = cnt ? s / double(cnt) : 0.0;
    const double var = cnt > 1 ? std::max(0.0, (s2 - double(cnt) * mean * mean) / double(cnt - 1)) : 0.0;
    out.mean_sup.push_back(mean);
    out.stderr_.push_back(cnt ? std::sqrt(var / double(cnt)) : 0.0);
    out.n_ok.push_back(cnt);
  }
  const auto [lo, hi] = std::minmax_element(out.mean_sup.begin(), out.mean_sup.end());
  out.ratio = *lo > 0.0 ? *hi / *lo : kInf;
  return out;
}

}  // namespace rlang
