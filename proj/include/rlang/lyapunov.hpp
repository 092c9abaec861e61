#pragma once

#include "rlang/dynamics.hpp"
#include "rlang/rng.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace rlang {

inline constexpr double kAuto = std::numeric_limits<double>::quiet_NaN();

// V1 = H^2 + eps1 <q,p> - <q,p>/|q| + kappa1 (single particle, anchored model).
struct LyapunovParams1 {
  double eps1 = kAuto;    // NaN: use the model epsilon
  double kappa1 = kAuto;  // NaN: choose from the scan sample
};

// VN = A1 H^3 + eps H <q,p> - A2 eps^2 sum_{i!=j} <q_ij, p_ij>/|q_ij|^(beta1-1) + kappaN
struct LyapunovParamsN {
  double A1 = 1.0;
  double A2 = 1.0;
  double kappaN = kAuto;
};

using LyapunovParams = std::variant<LyapunovParams1, LyapunovParamsN>;

std::string describe(const LyapunovParams& p);
// Default family for the model: V1 for one particle, VN otherwise.
LyapunovParams default_params(const ModelSpec& m);
double default_alpha(const ModelSpec& m);

double v1(const ModelSpec& m, const LyapunovParams1& p, const StateD& x);
double vN(const ModelSpec& m, const LyapunovParamsN& p, const StateD& x);
double lyapunov_value(const ModelSpec& m, const LyapunovParams& p, const StateD& x);

Jet v1_jet(const ModelSpec& m, const LyapunovParams1& p, const StateD& x);
Jet vN_jet(const ModelSpec& m, const LyapunovParamsN& p, const StateD& x);
Jet lyapunov_jet(const ModelSpec& m, const LyapunovParams& p, const StateD& x);

// Analytic L(V^n) at x, with the relativistic generator of the model.
double generator_on_v(const ModelSpec& m, const LyapunovParams& p, const StateD& x, double n = 1.0);

// Building blocks with hand-coded derivatives.
Jet radial_qp_jet(const StateD& x);  // <q,p>/|q| for one particle
Jet pair_flux_jet(const ModelSpec& m, const StateD& x);  // sum_{i!=j} <q_ij, p_ij>/|q_ij|^(beta1-1)

struct RegionSampler {
  double bulk_q = 3.0;
  double bulk_p = 3.0;
  double far_max = 1e3;
  double near_lo = 1e-4;
  double near_hi = 1e-1;

  // shell 0: bulk, 1: far field, 2: near collision
  StateD draw(const ModelSpec& m, int shell, Rng& rng) const;
  std::string describe() const;
};

struct DriftReport {
  double n = 1.0;
  double alpha = 0.5;
  double c = 0.0;
  double C = 0.0;
  LyapunovParams params;
  Index samples = 0;
  Index evaluated = 0;
  Index excluded = 0;  // non-finite derivatives near the singular set
  Index violations = 0;
  double worst_margin = 0.0;  // max of L V^n + c V^(n-alpha) - C
  StateD argmax_state;
  Index hull_vertices = 0;
  double min_v = 0.0;
  Index negative_drift_count = 0;  // states with L V^n < 0
  std::string sampler;
  std::uint64_t seed = 0;
  bool passed = false;
  std::string failure;
};

// Per-sample pieces of V = sum_k coef_k T_k + kappa, enough to rebuild V, L V and
// |grad_p V|^2 for any coefficients without touching the states again.
struct ScanSample {
  StateD x;
  std::array<double, 3> value{};
  std::array<double, 3> gen{};
  std::array<double, 6> gram{};  // (00, 01, 02, 11, 12, 22) of the p-gradients
  bool ok = true;
};

struct ScanSet {
  std::vector<ScanSample> samples;
  std::string sampler;
  std::uint64_t seed = 0;
  bool single = true;
};

ScanSet draw_scan_set(const ModelSpec& m, const RegionSampler& sampler, Index count, std::uint64_t seed,
                      int threads = 1);

DriftReport drift_scan(const ModelSpec& m, const LyapunovParams& p, double n, const ScanSet& set,
                       double alpha = kAuto);
DriftReport drift_scan(const ModelSpec& m, const LyapunovParams& p, double n, const RegionSampler& sampler,
                       Index count, std::uint64_t seed, int threads = 1, double alpha = kAuto);

struct TuneResult {
  LyapunovParams params;
  DriftReport report;
  bool found = false;
  Index evaluated = 0;
};

TuneResult tune_constants(const ModelSpec& m, double n, Index budget, std::uint64_t seed,
                          const RegionSampler& sampler = {}, Index count = 20000, int threads = 1);

}  // namespace rlang
