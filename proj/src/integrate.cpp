#include "rlang/integrate.hpp"
#include "rlang/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rlang {

void Scheme::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("scheme.dt must be positive");
  if (!(policy.c_safe > 0.0 && policy.c_safe <= 1.0)) throw ParameterError("c_safe must lie in (0, 1]");
  if (policy.max_halvings < 1) throw ParameterError("max_halvings must be >= 1");
  if (!(policy.delta_floor > 0.0)) throw ParameterError("delta_floor must be positive");
}

std::string Scheme::name() const { return tag == Tag::euler_maruyama ? "euler-maruyama" : "strang-split"; }

Scheme::Tag Scheme::tag_from(const std::string& s) {
  if (s == "euler-maruyama") return Tag::euler_maruyama;
  if (s == "strang-split") return Tag::strang_split;
  throw ParameterError("unknown scheme '" + s + "'");
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* c = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < bytes; ++k) {
    h ^= c[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string canonical_string(const ModelSpec& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "n=%lld;d=%lld;eps=%.17g;U=%s;lambda=%.17g;G=%s;b1=%.17g;b2=%.17g;a4=%.17g;a5=%.17g;a6=%.17g;"
                "shift=%.17g;anchored=%d;floor=%.17g",
                static_cast<long long>(m.n), static_cast<long long>(m.d), m.epsilon,
                family_name(m.confining.family).c_str(), m.confining.lambda, family_name(m.singular.family).c_str(),
                m.singular.beta1, m.singular.beta2, m.singular.a4, m.singular.a5, m.singular.a6, m.energy_shift,
                int(m.anchored), m.collision_floor);
  return buf;
}

std::uint64_t model_hash(const ModelSpec& m) {
  const std::string s = canonical_string(m);
  return fnv1a(s.data(), s.size());
}

// ---- single step ---------------------------------------------------------------------

namespace {

void check_landing(const ModelSpec& m, const StepPolicy& pol, const StateD& x) {
  if (!x.finite()) throw StepRejected("non-finite state after step");
  const double floor = std::max(pol.delta_floor, m.collision_floor);
  if (m.has_singular_terms() && !(min_pair_distance(m, x.q).distance >= floor))
    throw StepRejected("step left the collision-free set");
}

}  // namespace

StateD step_increment(const Scheme& scheme, const DriftKind& kind, const ModelSpec& m, const StateD& x, double dt,
                      const MatrixXr& dW) {
  if (!(dt > 0.0)) throw ParameterError("step needs dt > 0");
  StateD y;
  MatrixXr f, v;
  const double s2 = std::sqrt(2.0);
  try {
    if (scheme.tag == Scheme::Tag::euler_maruyama) {
      conservative_force(m, kind, x.q, f);
      velocity_field(kind, x.p, v);
      y.q = x.q + dt * v;
      y.p = x.p + dt * f;
      if (scheme.dissipative) {
        y.p -= dt * v;
        y.p += s2 * dW;
      }
    } else {
      conservative_force(m, kind, x.q, f);
      MatrixXr ph = x.p + (0.5 * dt) * f;
      velocity_field(kind, ph, v);
      y.q = x.q + dt * v;
      if (scheme.dissipative) {
        ph -= dt * v;
        ph += s2 * dW;
      }
      conservative_force(m, kind, y.q, f);
      y.p = ph + (0.5 * dt) * f;
    }
  } catch (const SingularityError& e) {
    throw StepRejected(e.what());
  } catch (const InvalidStateError& e) {
    throw StepRejected(e.what());
  }
  check_landing(m, scheme.policy, y);
  return y;
}

StateD step(const Scheme& scheme, const DriftKind& kind, const ModelSpec& m, const StateD& x, double dt,
            const MatrixXr& xi) {
  return step_increment(scheme, kind, m, x, dt, std::sqrt(dt) * xi);
}

double adaptive_dt(const ModelSpec& m, const DriftKind& kind, const StateD& x, double dt_max,
                   const StepPolicy& policy) {
  double dt = dt_max;
  if (m.has_singular_terms()) {
    const double dmin = min_pair_distance(m, x.q).distance;
    if (std::isfinite(dmin)) dt = std::min(dt, policy.c_safe * std::pow(dmin, m.singular.beta1 + 1.0) / m.singular.a4);
  }
  double sup = 0.0;
  try {
    const DriftField<double> b = drift(kind, m, x);
    sup = std::max(b.dq.cwiseAbs().maxCoeff(), b.dp.cwiseAbs().maxCoeff());
  } catch (const SingularityError&) {
    sup = kInf;
  }
  if (!std::isfinite(sup)) sup = std::numeric_limits<double>::max();
  dt = std::min(dt, policy.c_safe / (1.0 + sup));
  // never return zero: the smallest positive step still lets the driver make progress
  return std::max(dt, std::numeric_limits<double>::min());
}

Index Trajectory::total_rejections() const {
  Index s = 0;
  for (Index r : rejections) s += r;
  return s;
}

// ---- adaptive driver ----------------------------------------------------------------------

namespace {

struct Advancer {
  const Scheme& scheme;
  const DriftKind& kind;
  const ModelSpec& m;
  Rng& rng;
  double t0 = 0.0;
  Index rejections = 0;

  // Lévy refinement: a rejected increment is split by a Brownian bridge so the path is kept.
  StateD advance(const StateD& x, double h, const MatrixXr& dW, int depth) {
    try {
      return step_increment(scheme, kind, m, x, h, dW);
    } catch (const StepRejected& e) {
      ++rejections;
      if (depth >= scheme.policy.max_halvings)
        throw IntegrationFailure(std::string("persistent step rejection: ") + e.what(), x, t0, rejections);
    }
    MatrixXr z = rng.normal_matrix(dW.rows(), dW.cols());
    const MatrixXr dW1 = 0.5 * dW + std::sqrt(0.25 * h) * z;
    const MatrixXr dW2 = dW - dW1;
    const StateD mid = advance(x, 0.5 * h, dW1, depth + 1);
    return advance(mid, 0.5 * h, dW2, depth + 1);
  }
};

void record(Trajectory& tr, const ModelSpec& m, double t, const StateD& x, double dt_eff, Index rej) {
  tr.times.push_back(t);
  tr.states.push_back(x);
  double h;
  try {
    h = hamiltonian(m, x);
  } catch (const Error&) {
    h = std::numeric_limits<double>::quiet_NaN();
  }
  tr.hamiltonian.push_back(h);
  tr.delta_min.push_back(min_pair_distance(m, x.q).distance);
  tr.dt_eff.push_back(dt_eff);
  tr.rejections.push_back(rej);
}

}  // namespace

Trajectory simulate(const ModelSpec& m, const DriftKind& kind, const Scheme& scheme, const StateD& x0, double T,
                    std::uint64_t seed, const SimulateOptions& opt) {
  scheme.validate();
  kind.validate();
  if (!(T >= 0.0) || !std::isfinite(T)) throw ParameterError("T must be finite and >= 0");
  if (x0.particles() != m.n || x0.dim() != m.d) throw InvalidStateError("initial state shape does not match model");
  if (!x0.finite()) throw InvalidStateError("non-finite initial state");
  if (m.has_singular_terms()) require_collision_free(m, x0.q);

  Trajectory tr;
  tr.seed = seed;
  tr.model_hash = model_hash(m);
  tr.scheme = scheme.name();
  tr.kind = kind.name();
  tr.dt = scheme.dt;

  std::vector<double> cps;
  for (double c : opt.checkpoints)
    if (c > 0.0 && c < T) cps.push_back(c);
  cps.push_back(T);
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());

  Rng rng(seed);
  Advancer adv{scheme, kind, m, rng};
  StateD x = x0;
  double t = 0.0;
  record(tr, m, t, x, 0.0, 0);
  std::size_t next_cp = 0;
  const double snap = 1e-12 * std::max(T, 1.0);
  while (t < T && next_cp < cps.size()) {
    double h = scheme.adaptive ? adaptive_dt(m, kind, x, scheme.dt, scheme.policy) : scheme.dt;
    const double target = cps[next_cp];
    bool hits = false;
    if (t + h >= target - snap) {
      h = target - t;
      hits = true;
    }
    const MatrixXr dW = std::sqrt(h) * rng.normal_matrix(m.n, m.d);
    adv.t0 = t;
    const Index before = adv.rejections;
    x = adv.advance(x, h, dW, 0);
    t = hits ? target : t + h;
    if (hits) ++next_cp;
    if (opt.record_all || hits) record(tr, m, t, x, h, adv.rejections - before);
  }
  return tr;
}

// ---- coupled runs ------------------------------------------------------------------

double CoupledRun::sup_moment(double n) const {
  double s = 0.0;
  for (std::size_t k = 0; k < dq_norm.size(); ++k) s = std::max(s, std::pow(dq_norm[k], n) + std::pow(dp_norm[k], n));
  return s;
}

CoupledRun simulate_coupled(const ModelSpec& m, const DriftKind& kind_a, const DriftKind& kind_b,
                            const Scheme& scheme, const StateD& x0, double T, std::uint64_t seed,
                            const CoupledOptions& opt) {
  scheme.validate();
  kind_a.validate();
  kind_b.validate();
  if (!(T >= 0.0)) throw ParameterError("T must be >= 0");
  if (m.has_singular_terms()) require_collision_free(m, x0.q);
  const Index steps = T == 0.0 ? 0 : static_cast<Index>(std::ceil(T / scheme.dt - 1e-9));
  const double h = steps == 0 ? 0.0 : T / double(steps);

  CoupledRun run;
  for (Trajectory* tr : {&run.a, &run.b}) {
    tr->seed = seed;
    tr->model_hash = model_hash(m);
    tr->scheme = scheme.name();
    tr->dt = h;
  }
  run.a.kind = kind_a.name();
  run.b.kind = kind_b.name();

  StateD xa = x0, xb = x0;
  auto push = [&](double t) {
    const double dq = (xa.q - xb.q).norm();
    const double dp = (xa.p - xb.p).norm();
    run.dq_norm.push_back(dq);
    run.dp_norm.push_back(dp);
    const double prev = run.sup_distance.empty() ? 0.0 : run.sup_distance.back();
    run.sup_distance.push_back(std::max(prev, dq + dp));
    if (opt.record_states) {
      record(run.a, m, t, xa, h, 0);
      record(run.b, m, t, xb, h, 0);
    } else {
      run.a.times.push_back(t);
      run.b.times.push_back(t);
    }
  };
  push(0.0);
  Rng rng(seed);
  MatrixXr dW(m.n, m.d);
  const double sh = std::sqrt(h);
  for (Index k = 0; k < steps; ++k) {
    for (Index i = 0; i < m.n; ++i)
      for (Index c = 0; c < m.d; ++c) dW(i, c) = sh * rng.normal();
    run.noise_hash_a = fnv1a(dW.data(), sizeof(double) * std::size_t(dW.size()), run.noise_hash_a);
    try {
      xa = step_increment(scheme, kind_a, m, xa, h, dW);
    } catch (const StepRejected& e) {
      throw IntegrationFailure(std::string("coupled leg a rejected: ") + e.what(), xa, double(k) * h, 1);
    }
    run.noise_hash_b = fnv1a(dW.data(), sizeof(double) * std::size_t(dW.size()), run.noise_hash_b);
    try {
      xb = step_increment(scheme, kind_b, m, xb, h, dW);
    } catch (const StepRejected& e) {
      throw IntegrationFailure(std::string("coupled leg b rejected: ") + e.what(), xb, double(k) * h, 1);
    }
    push(k + 1 == steps ? T : double(k + 1) * h);
  }
  return run;
}

CoupledRun simulate_coupled(const ModelSpec& m, const Scheme& scheme, const StateD& x0, double T, double eps,
                            std::uint64_t seed, const CoupledOptions& opt) {
  return simulate_coupled(m, DriftKind::relativistic(eps), DriftKind::langevin(), scheme, x0, T, seed, opt);
}

double pilot_grid_dt(const ModelSpec& m, const DriftKind& kind, const Scheme& scheme, const StateD& x0, double T,
                     std::uint64_t seed) {
  Scheme s = scheme;
  s.adaptive = true;
  const Trajectory tr = simulate(m, kind, s, x0, T, seed);
  double dt = scheme.dt;
  for (std::size_t k = 1; k < tr.size(); ++k) dt = std::min(dt, tr.dt_eff[k]);
  return dt;
}

EnsembleResult simulate_ensemble(const ModelSpec& m, const DriftKind& kind, const Scheme& scheme, const StateD& x0,
                                 double T, Index n_traj, std::uint64_t master_seed, int threads,
                                 const SimulateOptions& opt) {
  if (n_traj < 1) throw ParameterError("n_traj must be >= 1");
  EnsembleResult res;
  res.trajectories.resize(std::size_t(n_traj));
  res.errors.resize(std::size_t(n_traj));
  parallel_for(std::size_t(n_traj), threads, [&](std::size_t k) {
    try {
      res.trajectories[k] = simulate(m, kind, scheme, x0, T, substream_seed(master_seed, k), opt);
    } catch (const Error& e) {
      res.errors[k] = e.what();
    }
  });
  for (const auto& e : res.errors)
    if (!e.empty()) ++res.failures;
  return res;
}

}  // namespace rlang
