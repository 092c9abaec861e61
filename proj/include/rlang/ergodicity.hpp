#pragma once

#include "rlang/integrate.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rlang {

// ---- stationary sampling --------------------------------------------------------------

struct SamplerOptions {
  Index thin = 5;
  double target_accept = 0.574;
  double initial_step = 0.05;
  int threads = 1;
};

struct StationarySample {
  std::vector<StateD> states;  // chain-major: all of chain 0, then chain 1, ...
  std::vector<Index> chain;
  Index chains = 0;
  std::vector<double> q_acceptance;  // per chain, after burn-in
  std::vector<double> step_sizes;    // per chain, frozen after burn-in
  double q_acceptance_mean = 0.0;
  double p_acceptance = 0.0;  // acceptance of the momentum rejection sampler
  double p_proposal_scale = 0.0;
  double ess = 0.0;  // from the potential energy trace, via chain means
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  bool degenerate = false;
  std::string warning;
};

// Positions: MALA chains on exp(-sum U - sum G). Momenta: exact per-particle draws from
// exp(-(1/eps) sqrt(1 + eps |p|^2)) by rejection from a Gamma radial proposal.
StationarySample sample_stationary(const ModelSpec& m, Index n_samples, Index chains, Index burn_in,
                                   std::uint64_t seed, const SamplerOptions& opt = {});

// One exact draw of a d-dimensional momentum; returns the number of proposals used.
Index draw_momentum(Index d, double eps, double scale, Rng& rng, Eigen::Ref<RowVectorXr> out);
// Gamma radial proposal scale that maximizes the acceptance rate.
double momentum_proposal_scale(Index d, double eps);

// Mean and standard error of per-sample values, with the error taken from chain means.
struct ChainMean {
  double mean = 0.0;
  double se = 0.0;
};
ChainMean chain_mean(const StationarySample& s, const std::vector<double>& values);

// ---- stationarity ------------------------------------------------------------------------

// Product of smooth bumps exp(1 - 1/(1 - |x-c|^2/r^2)); a radius of 0 drops that factor.
// With shell_hi > 0 every pair distance (and anchor distance) is also confined to (shell_lo, shell_hi)
// by the same profile, which keeps the support off the collision set.
struct Bump {
  MatrixXr q_center;
  double q_radius = 0.0;
  MatrixXr p_center;
  double p_radius = 0.0;
  std::string name;
  double shell_lo = 0.0;
  double shell_hi = 0.0;
};

Observable bump_observable(const Bump& b, bool anchored = false);
// Empty string when the support avoids the collision set, else the reason.
std::string bump_support_problem(const ModelSpec& m, const Bump& b);

struct StationarityItem {
  std::string name;
  double mean = 0.0;
  double se = 0.0;
  double z = 0.0;
  Index support_hits = 0;
  bool pass = false;
  bool rejected = false;
  std::string reason;
};

struct StationarityReport {
  std::vector<StationarityItem> items;
  double generator_epsilon = 0.0;
  double sample_epsilon = 0.0;
  bool all_pass = false;
};

// Sample mean of L phi per bump; the generator uses the model passed here, so a model whose
// epsilon differs from the sample's gives the mismatched control.
StationarityReport stationarity_check(const ModelSpec& m, const std::vector<Bump>& bumps,
                                      const StationarySample& sample, int threads = 1);

// Five bumps adapted to the model (p-only bumps for a single free particle).
std::vector<Bump> default_bumps(const ModelSpec& m);

// ---- mixing ---------------------------------------------------------------------------------

struct MixingPoint {
  double t = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double distance = 0.0;  // |E f(X_t) - pi(f)|
  double se_distance = 0.0;
  bool in_window = false;
};

struct MixingCurve {
  std::vector<MixingPoint> points;
  double reference = 0.0;
  double reference_se = 0.0;
  double r_hat = 0.0;
  double intercept = 0.0;
  bool fit_defined = false;
  bool decreasing = false;
  Index window = 0;
  Index failures = 0;
  std::string failure;
};

using ScalarFn = std::function<double(const StateD&)>;

MixingCurve mixing_curve(const ModelSpec& m, const ScalarFn& f, const StateD& x0, const std::vector<double>& t_grid,
                         Index n_ens, std::uint64_t seed, const StationarySample& reference, const Scheme& scheme,
                         int threads = 1);

// tanh(E/4) with E = U - 1 + (sqrt(1 + eps|p|^2) - 1)/eps summed over particles: bounded, Lipschitz.
ScalarFn energy_observable(const ModelSpec& m);

// ---- hypoellipticity -------------------------------------------------------------------------

struct RankReport {
  Index rank = 0;
  Index expected = 0;
  std::vector<double> singular_values;
  bool full = false;
};

RankReport hypoellipticity_check(const ModelSpec& m, const StateD& x, bool zero_q_block = false,
                                 double rel_threshold = 1e-8);

// ---- control path ------------------------------------------------------------------------------

struct ControlOptions {
  double rho = 0.1;
  Index nodes_first = 20000;   // on [0, rho]
  Index nodes_blend = 4000;    // on [rho, 2 rho]
  double leg_spacing = 0.05;   // node spacing on the routing legs
  double clearance = 0.5;      // routing keeps pair distances above clearance * initial min distance (capped)
  int max_rho_halvings = 30;
  int max_waypoint_depth = 8;
};

struct ControlPath {
  std::vector<double> times;
  std::vector<StateD> states;  // q(s), p(s)
  std::vector<MatrixXr> controls;  // U_i(s)
  std::vector<Index> piece_start;  // first node of each piece, then the last node; pieces share boundary nodes
  MatrixXr target;
  double rho = 0.0;
  double epsilon = 0.0;
  double T = 0.0;
  Index rho_halvings = 0;
  Index waypoints = 0;
};

struct ControlReport {
  double start_q_error = 0.0;
  double start_p_error = 0.0;
  double end_q_error = 0.0;
  double end_p_error = 0.0;
  double speed_sqrt_eps = 0.0;  // sqrt(eps) sup |q_i'|
  double residual_p = 0.0;      // sup |p' + v(p) + grad U + sum grad G - sqrt(2) U'|
  double residual_q = 0.0;      // sup |q' - v(p)|
  double min_distance = 0.0;
  bool passed = false;
};

// Targets q_i = (rank_i + 1) e1, ranked by the first coordinate of q0.
MatrixXr control_targets(const StateD& x0);

ControlPath control_path(const ModelSpec& m, const StateD& x0, std::uint64_t seed, const ControlOptions& opt = {});
ControlReport verify_control_path(const ModelSpec& m, const StateD& x0, const ControlPath& path);

// ---- pair-distance inequalities ----------------------------------------------------------

struct LemmaCensus {
  Index trials = 0;
  Index violations = 0;
  double worst_margin = 0.0;  // min over trials of (lhs - rhs) / scale
  double max_equality_error = 0.0;  // N = 2 only
  std::uint64_t seed = 0;
};

// lhs = sum_i < sum_{j!=i} q_ij/|q_ij|^gamma, sum_{k!=i} q_ik/|q_ik|^(s+1) >, rhs = 2 sum_{i<j} |q_ij|^-(s+gamma-1)
std::pair<double, double> lemma_a1_sides(const MatrixXr& q, double gamma, double s);
LemmaCensus lemma_a1_check(Index N, Index d, double gamma, double s, Index n_trials, std::uint64_t seed,
                           int threads = 1);

struct LemmaA2Fit {
  double c_G = 0.0;
  double C_G = 0.0;
  bool feasible = false;
  LemmaCensus census;
  Index near_collision_samples = 0;
};

// C_G (sum U + sum G) >= sum |q_i| - c_G sum_{i<j} log|q_ij| >= c_G sum |q_i| + c_G max_{i<j} (-log|q_ij|)
LemmaA2Fit lemma_a2_fit(const ModelSpec& m, Index n_trials, std::uint64_t seed, int threads = 1);
// Re-checks both inequalities for given constants on a fresh sample.
LemmaCensus lemma_a2_certify(const ModelSpec& m, double c_G, double C_G, Index n_trials, std::uint64_t seed);

}  // namespace rlang
