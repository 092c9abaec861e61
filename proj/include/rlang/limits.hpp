#pragma once

#include "rlang/integrate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rlang {

struct CutoffSpec {
  double R = 10.0;
  void validate() const;
  double operator()(double t) const { return cutoff_theta(t, R); }
};

struct TruncatedModel {
  DriftKind relativistic;
  DriftKind langevin;
  double force_bound = 0.0;         // sampled sup of the truncated force
  double lipschitz_estimate = 0.0;  // sampled sup of |f(x) - f(y)| / |x - y|
};

TruncatedModel truncate_model(const ModelSpec& m, double R, Index probes = 4000, std::uint64_t seed = 1);

struct RateFit {
  std::vector<double> eps;
  std::vector<double> statistic;
  std::vector<double> stderr_;
  std::vector<Index> n_ok;
  std::vector<Index> n_failed;
  double n = 1.0;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::vector<double> residuals;
  Index seeds = 0;
  std::uint64_t master_seed = 0;
  bool ok = false;
  std::string failure;
};

// Ordinary least squares of log(statistic) on log(eps); fills slope, intercept, r2, residuals.
void fit_loglog(RateFit& fit);

struct ExperimentRun {
  Scheme scheme;
  int threads = 1;
};

// E sup_[0,T] (|q^eps - q|^n + |p^eps - p|^n) over coupled runs of the truncated pair.
// Seed k is substream_seed(master_seed, k) for every eps, so runs are paired across eps.
std::vector<RateFit> newtonian_rate_experiment(const ModelSpec& m, double R, const StateD& x0, double T,
                                               const std::vector<double>& eps_list, const std::vector<double>& ns,
                                               Index n_seeds, std::uint64_t master_seed, const ExperimentRun& run);
RateFit newtonian_rate_experiment(const ModelSpec& m, double R, const StateD& x0, double T,
                                  const std::vector<double>& eps_list, double n, Index n_seeds,
                                  std::uint64_t master_seed, const ExperimentRun& run);

struct ProbPoint {
  double eps = 0.0;
  double phat = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  Index exceed = 0;
  Index n_ok = 0;
  Index n_failed = 0;
};

struct ProbCurve {
  std::vector<ProbPoint> points;
  double xi = 0.0;
  Index consecutive_decreases = 0;
  bool strictly_decreasing = false;
  bool endpoints_separated = false;  // Wilson intervals of first and last point disjoint
  bool ok = true;
  std::string failure;
};

// 95% Wilson score interval
std::pair<double, double> wilson_interval(Index successes, Index trials, double z = 1.959963984540054);

ProbCurve prob_convergence_experiment(const ModelSpec& m, const StateD& x0, double T, double xi,
                                      const std::vector<double>& eps_list, Index n_seeds, std::uint64_t master_seed,
                                      const ExperimentRun& run);

struct MomentSeries {
  std::string functional;  // "gamma1" or "gamma2"
  std::vector<double> times;
  std::vector<double> values;
  double sup = 0.0;
  Index flagged = 0;  // states where the functional could not be evaluated
};

// gamma1 = sum U + sum_{i<j} G + |p|^2/2 for Langevin kinds;
// gamma2 = (eps/2)(U+G)^2 + (U+G) sqrt(1 + eps|p|^2) + |p|^2/2 for relativistic kinds.
MomentSeries moment_monitor(const ModelSpec& m, const DriftKind& kind, const Trajectory& tr);
double gamma1(const ModelSpec& m, const StateD& x);
double gamma2(const ModelSpec& m, double eps, const StateD& x);

struct MomentUniformity {
  std::vector<double> eps;
  std::vector<double> mean_sup;
  std::vector<double> stderr_;
  std::vector<Index> n_ok;
  double ratio = 0.0;  // max/min of mean_sup
};

MomentUniformity moment_uniformity_experiment(const ModelSpec& m, const StateD& x0, double T,
                                              const std::vector<double>& eps_list, Index n_seeds,
                                              std::uint64_t master_seed, const ExperimentRun& run);

}  // namespace rlang
