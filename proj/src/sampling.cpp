#include "rlang/ergodicity.hpp"
#include "rlang/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace rlang {

namespace {

double sup_log_ratio(double b, double eps) {
  // sup_r [r/b - sqrt(1 + eps r^2)/eps]; attained at r^2 = 1/(b^2 - eps), or at infinity when b^2 = eps
  const double b2 = b * b;
  if (b2 <= eps) return 0.0;
  return -std::sqrt(b2 - eps) / (b * eps);
}

// log acceptance rate up to a constant: -M(b) - d log b
double acceptance_objective(double b, double eps, Index d) { return -sup_log_ratio(b, eps) - double(d) * std::log(b); }

struct Chain {
  std::vector<StateD> states;
  double accept = 0.0;
  double step = 0.0;
  Index p_draws = 0;
  Index p_proposals = 0;
};

double potential_or_inf(const ModelSpec& m, const MatrixXr& q) {
  if (!q.allFinite()) return kInf;
  if (m.has_singular_terms() && !(min_pair_distance(m, q).distance >= m.collision_floor)) return kInf;
  try {
    const double v = potential_energy(m, q);
    return std::isfinite(v) ? v : kInf;
  } catch (const SingularityError&) {
    return kInf;
  }
}

}  // namespace

double momentum_proposal_scale(Index d, double eps) {
  if (!(eps > 0.0)) throw ParameterError("momentum sampler needs epsilon > 0");
  if (d < 1) throw ParameterError("dimension must be >= 1");
  const double lo = std::log(std::sqrt(eps));
  const double hi = lo + 12.0;
  // coarse grid, then golden section around the best cell
  const int n = 240;
  int best = 0;
  double best_val = -kInf;
  for (int k = 0; k <= n; ++k) {
    const double v = acceptance_objective(std::exp(lo + (hi - lo) * k / n), eps, d);
    if (v > best_val) best_val = v, best = k;
  }
  double a = lo + (hi - lo) * std::max(0, best - 1) / n;
  double b = lo + (hi - lo) * std::min(n, best + 1) / n;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double x1 = b - g * (b - a), x2 = a + g * (b - a);
    if (acceptance_objective(std::exp(x1), eps, d) > acceptance_objective(std::exp(x2), eps, d))
      b = x2;
    else
      a = x1;
  }
  const double t = 0.5 * (a + b);
  return std::max(std::exp(t), std::sqrt(eps));
}

Index draw_momentum(Index d, double eps, double scale, Rng& rng, Eigen::Ref<RowVectorXr> out) {
  const double M = sup_log_ratio(scale, eps);
  for (Index tries = 1;; ++tries) {
    const double r = scale * rng.gamma_int(static_cast<int>(d));
    const double log_acc = r / scale - std::sqrt(1.0 + eps * r * r) / eps - M;
    if (std::log(rng.uniform_open()) <= log_acc) {
      out = r * rng.unit_vector(d);
      return tries;
    }
    if (tries > 100000000) throw Error("momentum rejection sampler did not terminate");
  }
}

ChainMean chain_mean(const StationarySample& s, const std::vector<double>& values) {
  if (values.size() != s.states.size()) throw ParameterError("chain_mean: value count does not match sample");
  ChainMean out;
  const std::size_t n = values.size();
  if (n == 0) return out;
  std::vector<double> sum(static_cast<std::size_t>(std::max<Index>(s.chains, 1)), 0.0);
  std::vector<double> cnt(sum.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto c = static_cast<std::size_t>(s.chain.empty() ? 0 : s.chain[k]);
    sum[c] += values[k];
    cnt[c] += 1.0;
    total += values[k];
  }
  out.mean = total / double(n);
  std::vector<double> means;
  for (std::size_t c = 0; c < sum.size(); ++c)
    if (cnt[c] > 0) means.push_back(sum[c] / cnt[c]);
  if (means.size() < 2) {
    out.se = kInf;
    return out;
  }
  double mm = 0.0;
  for (double v : means) mm += v;
  mm /= double(means.size());
  double var = 0.0;
  for (double v : means) var += (v - mm) * (v - mm);
  var /= double(means.size() - 1);
  out.se = std::sqrt(var / double(means.size()));
  return out;
}

StationarySample sample_stationary(const ModelSpec& m, Index n_samples, Index chains, Index burn_in,
                                   std::uint64_t seed, const SamplerOptions& opt) {
  m.validate();
  if (n_samples < 1) throw ParameterError("n_samples must be >= 1");
  if (chains < 1) throw ParameterError("chains must be >= 1");
  if (burn_in < 0) throw ParameterError("burn_in must be >= 0");
  if (opt.thin < 1) throw ParameterError("thin must be >= 1");
  chains = std::min(chains, n_samples);

  const double eps = m.epsilon;
  const double scale = momentum_proposal_scale(m.d, eps);
  const StateD start = default_state(m);
  std::vector<Chain> out(static_cast<std::size_t>(chains));

  parallel_for(chains, opt.threads, [&](Index c) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(c));
    Chain& ch = out[static_cast<std::size_t>(c)];
    const Index keep = n_samples / chains + (c < n_samples % chains ? 1 : 0);
    const DriftKind kind = DriftKind::for_model(m);

    MatrixXr q = start.q;
    q += 0.05 * rng.normal_matrix(m.n, m.d);
    double phi = potential_or_inf(m, q);
    if (!std::isfinite(phi)) {
      q = start.q;
      phi = potential_or_inf(m, q);
    }
    MatrixXr f;
    conservative_force(m, kind, q, f);
    double tau = opt.initial_step;
    Index accepted = 0, proposed = 0;

    auto mala = [&](bool adapt, Index iter) {
      const MatrixXr noise = rng.normal_matrix(m.n, m.d);
      const MatrixXr qn = q + tau * f + std::sqrt(2.0 * tau) * noise;
      const double phin = potential_or_inf(m, qn);
      double acc = 0.0;
      if (std::isfinite(phin)) {
        MatrixXr fn;
        conservative_force(m, kind, qn, fn);
        const double fwd = (qn - q - tau * f).squaredNorm();
        const double bwd = (q - qn - tau * fn).squaredNorm();
        const double log_a = -(phin - phi) - (bwd - fwd) / (4.0 * tau);
        acc = log_a >= 0.0 ? 1.0 : std::exp(log_a);
        if (rng.uniform() < acc) {
          q = qn;
          phi = phin;
          f = std::move(fn);
          if (!adapt) ++accepted;
        }
      } else {
        rng.uniform();
      }
      if (adapt) {
        const double gain = 1.0 / std::pow(double(iter) + 10.0, 0.6);
        tau *= std::exp(gain * (acc - opt.target_accept));
        tau = std::clamp(tau, 1e-10, 10.0);
      } else {
        ++proposed;
      }
    };

    for (Index it = 0; it < burn_in; ++it) mala(true, it);
    ch.states.reserve(static_cast<std::size_t>(keep));
    for (Index k = 0; k < keep; ++k) {
      for (Index t = 0; t < opt.thin; ++t) mala(false, 0);
      StateD x(m.n, m.d);
      x.q = q;
      for (Index i = 0; i < m.n; ++i) {
        ch.p_proposals += draw_momentum(m.d, eps, scale, rng, x.p.row(i));
        ++ch.p_draws;
      }
      ch.states.push_back(std::move(x));
    }
    ch.accept = proposed > 0 ? double(accepted) / double(proposed) : 0.0;
    ch.step = tau;
  });

  StationarySample s;
  s.chains = chains;
  s.epsilon = eps;
  s.seed = seed;
  s.p_proposal_scale = scale;
  Index draws = 0, proposals = 0;
  for (Index c = 0; c < chains; ++c) {
    Chain& ch = out[static_cast<std::size_t>(c)];
    for (auto& x : ch.states) {
      s.states.push_back(std::move(x));
      s.chain.push_back(c);
    }
    s.q_acceptance.push_back(ch.accept);
    s.step_sizes.push_back(ch.step);
    draws += ch.p_draws;
    proposals += ch.p_proposals;
  }
  for (double a : s.q_acceptance) s.q_acceptance_mean += a / double(chains);
  s.p_acceptance = proposals > 0 ? double(draws) / double(proposals) : 0.0;

  std::vector<double> phis;
  phis.reserve(s.states.size());
  for (const auto& x : s.states) phis.push_back(potential_energy(m, x.q));
  const ChainMean cm = chain_mean(s, phis);
  double var = 0.0;
  for (double v : phis) var += (v - cm.mean) * (v - cm.mean);
  var /= std::max<double>(1.0, double(phis.size()) - 1.0);
  s.ess = (std::isfinite(cm.se) && cm.se > 0.0) ? std::min(double(phis.size()), var / (cm.se * cm.se))
                                                 : (var == 0.0 ? double(phis.size()) : 0.0);

  const double ess_floor = std::min(100.0, 0.01 * double(s.states.size()));
  if (s.q_acceptance_mean < 0.01) {
    s.degenerate = true;
    s.warning = "position acceptance below 1%";
  } else if (chains >= 2 && s.ess < ess_floor) {
    s.degenerate = true;
    s.warning = "effective sample size below threshold";
  }
  return s;
}

}  // namespace rlang
