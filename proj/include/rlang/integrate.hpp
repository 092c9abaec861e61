#pragma once

#include "rlang/dynamics.hpp"
#include "rlang/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rlang {

struct StepPolicy {
  double c_safe = 0.1;
  double delta_floor = 1e-10;
  int max_halvings = 40;
};

struct Scheme {
  enum class Tag { euler_maruyama, strang_split };
  Tag tag = Tag::strang_split;
  double dt = 1e-3;
  StepPolicy policy;
  bool adaptive = true;
  // false drops friction and noise, leaving the Hamiltonian flow
  bool dissipative = true;

  void validate() const;
  std::string name() const;
  static Tag tag_from(const std::string& s);
};

struct IntegrationFailure : Error {
  StateD state;
  double t = 0.0;
  Index rejections = 0;
  IntegrationFailure(const std::string& what, StateD x, double t_, Index rej)
      : Error(what), state(std::move(x)), t(t_), rejections(rej) {}
};

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string canonical_string(const ModelSpec& m);
std::uint64_t model_hash(const ModelSpec& m);

// One step driven by standard normals xi; the Brownian increment is sqrt(dt) xi.
StateD step(const Scheme& scheme, const DriftKind& kind, const ModelSpec& m, const StateD& x, double dt,
            const MatrixXr& xi);
// Same step driven by a Brownian increment dW directly. Throws StepRejected when the
// result leaves the collision-free set or is not finite.
StateD step_increment(const Scheme& scheme, const DriftKind& kind, const ModelSpec& m, const StateD& x, double dt,
                      const MatrixXr& dW);

double adaptive_dt(const ModelSpec& m, const DriftKind& kind, const StateD& x, double dt_max, const StepPolicy& policy);

struct Trajectory {
  std::vector<double> times;
  std::vector<StateD> states;
  std::vector<double> hamiltonian;
  std::vector<double> delta_min;
  std::vector<double> dt_eff;
  std::vector<Index> rejections;
  std::uint64_t seed = 0;
  std::uint64_t model_hash = 0;
  std::string scheme;
  std::string kind;
  double dt = 0.0;

  std::size_t size() const { return times.size(); }
  Index total_rejections() const;
};

struct SimulateOptions {
  // Steps are shortened to land on these times; with record_all = false only they are kept.
  std::vector<double> checkpoints;
  bool record_all = true;
};

Trajectory simulate(const ModelSpec& m, const DriftKind& kind, const Scheme& scheme, const StateD& x0, double T,
                    std::uint64_t seed, const SimulateOptions& opt = {});

struct CoupledRun {
  Trajectory a;  // first leg (relativistic in the default pairing)
  Trajectory b;  // second leg (langevin)
  std::vector<double> dq_norm;  // |q^a - q^b| at each node
  std::vector<double> dp_norm;  // |p^a - p^b| at each node
  std::vector<double> sup_distance;  // running sup of dq_norm + dp_norm
  std::uint64_t noise_hash_a = 0;
  std::uint64_t noise_hash_b = 0;

  // sup over the grid of |dq|^n + |dp|^n
  double sup_moment(double n) const;
};

struct CoupledOptions {
  bool record_states = true;
};

// Fixed grid of n = ceil(T/dt) steps, both legs fed the same increments.
CoupledRun simulate_coupled(const ModelSpec& m, const DriftKind& kind_a, const DriftKind& kind_b,
                            const Scheme& scheme, const StateD& x0, double T, std::uint64_t seed,
                            const CoupledOptions& opt = {});
// Relativistic(eps) against the Langevin limit.
CoupledRun simulate_coupled(const ModelSpec& m, const Scheme& scheme, const StateD& x0, double T, double eps,
                            std::uint64_t seed, const CoupledOptions& opt = {});

// Smallest adaptive step seen along a pilot run of the given leg, capped by scheme.dt.
double pilot_grid_dt(const ModelSpec& m, const DriftKind& kind, const Scheme& scheme, const StateD& x0, double T,
                     std::uint64_t seed);

struct EnsembleResult {
  std::vector<std::optional<Trajectory>> trajectories;
  std::vector<std::string> errors;  // empty string for successful members
  Index failures = 0;
};

// Member k uses seed substream_seed(master_seed, k).
EnsembleResult simulate_ensemble(const ModelSpec& m, const DriftKind& kind, const Scheme& scheme, const StateD& x0,
                                 double T, Index n_traj, std::uint64_t master_seed, int threads = 1,
                                 const SimulateOptions& opt = {});

}  // namespace rlang
