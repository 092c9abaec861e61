#include "rlang/cli.hpp"

#include "rlang/ergodicity.hpp"
#include "rlang/io.hpp"
#include "rlang/limits.hpp"
#include "rlang/lyapunov.hpp"
#include "rlang/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>

namespace rlang::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.3.0";

struct Context {
  ExperimentConfig cfg;
  fs::path dir;
  int threads = 1;
  std::string format;
  json artifacts = json::array();
  json gates = json::object();
  json notes = json::object();
  std::ostream* log = nullptr;

  const json& ex(const char* key) const { return cfg.experiment.at(key); }
  double num(const char* key) const { return ex(key).get<double>(); }
  Index count(const char* key) const {
    const double v = num(key);
    if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError(std::string("/experiment/") + key + ": expected a count");
    return static_cast<Index>(v);
  }
  std::vector<double> list(const char* key) const {
    const json& j = ex(key);
    if (!j.is_array()) throw ConfigError(std::string("/experiment/") + key + ": expected an array");
    std::vector<double> out;
    for (const auto& v : j) {
      if (!v.is_number()) throw ConfigError(std::string("/experiment/") + key + ": expected numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  void record(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(data.data(), data.size())));
    artifacts.push_back({{"file", fs::path(path).filename().string()}, {"fnv1a", buf}});
  }
  void write_json(const std::string& name, const json& j) {
    const std::string p = (dir / (name + ".json")).string();
    io::write_json(p, j);
    record(p);
  }
  void write_table(const std::string& name, const io::Table& t) {
    record(io::write_table((dir / name).string(), t, format));
  }
  void write_text(const std::string& name, const std::string& s) {
    const std::string p = (dir / name).string();
    io::write_text(p, s);
    record(p);
  }
  void gate(const std::string& name, bool pass) { gates[name] = pass; }
};

StateD parse_state(const json& j, const ModelSpec& m, const std::string& ptr) {
  if (j.is_null()) return default_state(m);
  if (!j.is_object() || !j.contains("q") || !j.contains("p")) throw ConfigError(ptr + ": expected {\"q\": [[...]], \"p\": [[...]]}");
  StateD x(m.n, m.d);
  for (const char* blk : {"q", "p"}) {
    const json& rows = j[blk];
    MatrixXr& M = std::string(blk) == "q" ? x.q : x.p;
    if (!rows.is_array() || static_cast<Index>(rows.size()) != m.n)
      throw ConfigError(ptr + "/" + blk + ": expected " + std::to_string(m.n) + " rows");
    for (Index i = 0; i < m.n; ++i) {
      const json& r = rows[static_cast<std::size_t>(i)];
      if (!r.is_array() || static_cast<Index>(r.size()) != m.d)
        throw ConfigError(ptr + "/" + blk + "/" + std::to_string(i) + ": expected " + std::to_string(m.d) + " entries");
      for (Index k = 0; k < m.d; ++k) {
        if (!r[static_cast<std::size_t>(k)].is_number()) throw ConfigError(ptr + "/" + blk + ": expected numbers");
        M(i, k) = r[static_cast<std::size_t>(k)].get<double>();
      }
    }
  }
  return x;
}

Scheme parse_scheme(const Context& c) {
  Scheme s;
  try {
    s.tag = Scheme::tag_from(c.ex("scheme").get<std::string>());
  } catch (const Error& e) {
    throw ConfigError(std::string("/experiment/scheme: ") + e.what());
  }
  s.dt = c.num("dt");
  if (c.cfg.experiment.contains("adaptive")) s.adaptive = c.ex("adaptive").get<bool>();
  if (c.cfg.experiment.contains("dissipative")) s.dissipative = c.ex("dissipative").get<bool>();
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("/experiment/dt: ") + e.what());
  }
  return s;
}

std::vector<std::string> state_columns(Index n, Index d, std::vector<const char*> blocks = {"q", "p"}) {
  std::vector<std::string> cols;
  for (const char* blk : blocks)
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < d; ++k) cols.push_back(std::string(blk) + std::to_string(i) + "_" + std::to_string(k));
  return cols;
}

// ---- subcommands ----------------------------------------------------------------------

void cmd_validate(Context& c) {
  ValidationOptions o;
  o.probe_count = c.count("probes");
  o.tolerance = c.num("tolerance");
  o.seed = c.cfg.seed;
  const ValidationReport r = validate_assumptions(c.cfg.model, o);
  c.write_json("validation", io::to_json(r));
  c.gate("assumptions", r.passed);
}

DriftKind parse_kind(const Context& c) {
  const std::string k = c.ex("kind").get<std::string>();
  const double eps = c.cfg.model.epsilon, R = c.num("R");
  if (k == "relativistic") return DriftKind::relativistic(eps);
  if (k == "langevin") return DriftKind::langevin();
  if (k == "relativistic_truncated") return DriftKind::relativistic_truncated(eps, R);
  if (k == "langevin_truncated") return DriftKind::langevin_truncated(R);
  throw ConfigError("/experiment/kind: expected relativistic, langevin, relativistic_truncated or langevin_truncated");
}

void cmd_simulate(Context& c) {
  const ModelSpec& m = c.cfg.model;
  const StateD x0 = parse_state(c.ex("x0"), m, "/experiment/x0");
  const Trajectory tr = simulate(m, parse_kind(c), parse_scheme(c), x0, c.num("T"), c.cfg.seed);
  c.write_text("trajectory.csv", io::trajectory_csv(tr, m));
  c.notes["steps"] = tr.size() - 1;
  c.notes["rejections"] = tr.total_rejections();
}

void cmd_couple(Context& c) {
  const ModelSpec& m = c.cfg.model;
  const StateD x0 = parse_state(c.ex("x0"), m, "/experiment/x0");
  const double eps = c.ex("eps").is_null() ? m.epsilon : c.num("eps");
  const CoupledRun r = simulate_coupled(m, parse_scheme(c), x0, c.num("T"), eps, c.cfg.seed);
  io::Table t{{"t", "dq", "dp", "sup_distance"}, {}};
  for (std::size_t k = 0; k < r.dq_norm.size(); ++k)
    t.rows.push_back({r.a.times[k], r.dq_norm[k], r.dp_norm[k], r.sup_distance[k]});
  c.write_table("coupled", t);
  c.write_text("leg_relativistic.csv", io::trajectory_csv(r.a, m));
  c.write_text("leg_langevin.csv", io::trajectory_csv(r.b, m));
  char ha[20], hb[20];
  std::snprintf(ha, sizeof ha, "%016llx", static_cast<unsigned long long>(r.noise_hash_a));
  std::snprintf(hb, sizeof hb, "%016llx", static_cast<unsigned long long>(r.noise_hash_b));
  c.write_json("noise", {{"noise_hash_a", ha}, {"noise_hash_b", hb}, {"epsilon", eps}});
  c.gate("identical_noise", r.noise_hash_a == r.noise_hash_b);
}

void cmd_newton_rate(Context& c) {
  const ModelSpec& m = c.cfg.model;
  const StateD x0 = parse_state(c.ex("x0"), m, "/experiment/x0");
  ExperimentRun run{parse_scheme(c), c.threads};
  const auto ns = c.list("n_list");
  const auto fits =
      newtonian_rate_experiment(m, c.num("R"), x0, c.num("T"), c.list("eps_list"), ns, c.count("seeds"), c.cfg.seed, run);
  io::Table t{{"epsilon", "n", "statistic", "stderr", "n_ok", "n_failed"}, {}};
  json fj = json::array();
  const double tol = c.num("slope_tolerance");
  for (const auto& f : fits) {
    for (std::size_t e = 0; e < f.eps.size(); ++e)
      t.rows.push_back({f.eps[e], f.n, f.statistic[e], f.stderr_[e], f.n_ok[e], f.n_failed[e]});
    fj.push_back(io::to_json(f));
    char name[48];
    std::snprintf(name, sizeof name, "slope_n%g", f.n);
    c.gate(name, f.ok && std::abs(f.slope - f.n) <= tol * f.n);
  }
  c.write_table("rates", t);
  c.write_json("fit", fj);
}

void cmd_prob_curve(Context& c) {
  const ModelSpec& m = c.cfg.model;
  const StateD x0 = parse_state(c.ex("x0"), m, "/experiment/x0");
  ExperimentRun run{parse_scheme(c), c.threads};
  const ProbCurve pc =
      prob_convergence_experiment(m, x0, c.num("T"), c.num("xi"), c.list("eps_list"), c.count("seeds"), c.cfg.seed, run);
  io::Table t{{"epsilon", "phat", "lo", "hi", "exceed", "n_ok", "n_failed"}, {}};
  for (const auto& p : pc.points) t.rows.push_back({p.eps, p.phat, p.lo, p.hi, p.exceed, p.n_ok, p.n_failed});
  c.write_table("prob_curve", t);
  c.write_json("prob_fit", io::to_json(pc));
  c.gate("strictly_decreasing", pc.ok && pc.strictly_decreasing);
  c.gate("endpoints_separated", pc.ok && pc.endpoints_separated);
}

LyapunovParams parse_params(const Context& c) {
  const ModelSpec& m = c.cfg.model;
  LyapunovParams p = default_params(m);
  const json& j = c.ex("params");
  if (!j.is_object()) throw ConfigError("/experiment/params: expected an object");
  auto get = [&](const std::string& key) {
    if (!j[key].is_number()) throw ConfigError("/experiment/params/" + key + ": expected a number");
    return j[key].get<double>();
  };
  if (auto* a = std::get_if<LyapunovParams1>(&p)) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "eps1") a->eps1 = get("eps1");
      else if (it.key() == "kappa1") a->kappa1 = get("kappa1");
      else throw ConfigError("/experiment/params/" + it.key() + ": unknown key for V1");
    }
  } else {
    auto& b = std::get<LyapunovParamsN>(p);
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "A1") b.A1 = get("A1");
      else if (it.key() == "A2") b.A2 = get("A2");
      else if (it.key() == "kappaN") b.kappaN = get("kappaN");
      else throw ConfigError("/experiment/params/" + it.key() + ": unknown key for VN");
    }
  }
  return p;
}

void cmd_lyapunov_scan(Context& c) {
  const double alpha = c.ex("alpha").is_null() ? kAuto : c.num("alpha");
  const DriftReport r = drift_scan(c.cfg.model, parse_params(c), c.num("n"), RegionSampler{}, c.count("samples"),
                                   c.cfg.seed, c.threads, alpha);
  c.write_json("drift_report", io::to_json(r));
  c.gate("drift_condition", r.passed);
}

void cmd_tune(Context& c) {
  const TuneResult r =
      tune_constants(c.cfg.model, c.num("n"), c.count("budget"), c.cfg.seed, RegionSampler{}, c.count("samples"), c.threads);
  c.write_json("tune", {{"found", r.found}, {"evaluated", r.evaluated}, {"params", io::to_json(r.params)},
                        {"report", io::to_json(r.report)}});
  c.gate("found", r.found);
}

StationarySample sample_for(const Context& c, const ModelSpec& m, Index n, Index chains, Index burn, Index thin,
                            std::uint64_t seed) {
  SamplerOptions so;
  so.thin = thin;
  so.threads = c.threads;
  return sample_stationary(m, n, chains, burn, seed, so);
}

void cmd_sample_pi(Context& c) {
  const ModelSpec& m = c.cfg.model;
  const StationarySample s =
      sample_for(c, m, c.count("samples"), c.count("chains"), c.count("burn_in"), c.count("thin"), c.cfg.seed);
  io::write_sample_csv((c.dir / "samples.csv").string(), s, m);
  c.record((c.dir / "samples.csv").string());
  c.write_json("diagnostics", io::sample_diagnostics(s));
  c.gate("sampler_healthy", !s.degenerate);
}

void cmd_stationarity(Context& c) {
  const ModelSpec& m = c.cfg.model;
  const StationarySample s =
      sample_for(c, m, c.count("samples"), c.count("chains"), c.count("burn_in"), c.count("thin"), c.cfg.seed);
  const auto bumps = default_bumps(m);
  const StationarityReport r = stationarity_check(m, bumps, s, c.threads);
  io::Table t{{"variant", "name", "mean", "se", "z", "support_hits", "pass"}, {}};
  for (const auto& it : r.items) t.rows.push_back({"matched", it.name, it.mean, it.se, it.z, it.support_hits, it.pass});
  json out{{"check", io::to_json(r)}, {"sampler", io::sample_diagnostics(s)}};
  c.gate("bumps_pass", r.all_pass);
  if (c.ex("negative_control").get<bool>()) {
    ModelSpec wrong = m;
    wrong.epsilon = m.epsilon * c.num("mismatch_factor");
    const StationarityReport rc = stationarity_check(wrong, bumps, s, c.threads);
    for (const auto& it : rc.items)
      t.rows.push_back({"mismatched", it.name, it.mean, it.se, it.z, it.support_hits, it.pass});
    out["negative_control"] = io::to_json(rc);
    c.gate("negative_control_detected", !rc.all_pass);
  }
  c.write_table("stationarity", t);
  c.write_json("stationarity", out);
}

void cmd_mixing(Context& c) {
  const ModelSpec& m = c.cfg.model;
  // cold start: displaced starts exchange potential and kinetic energy and the curve plateaus
  const StateD x0 = parse_state(c.ex("x0"), m, "/experiment/x0");
  const StationarySample ref = sample_for(c, m, c.count("reference_samples"), c.count("chains"), c.count("burn_in"), 5,
                                          substream_seed(c.cfg.seed, 1));
  Scheme sch = parse_scheme(c);
  const MixingCurve mc = mixing_curve(m, energy_observable(m), x0, c.list("t_grid"), c.count("ensemble"),
                                      substream_seed(c.cfg.seed, 2), ref, sch, c.threads);
  io::Table t{{"t", "mean", "se", "distance", "se_distance", "in_window"}, {}};
  for (const auto& p : mc.points) t.rows.push_back({p.t, p.mean, p.se, p.distance, p.se_distance, p.in_window});
  c.write_table("mixing_curve", t);
  c.write_json("mixing_fit", io::to_json(mc));
  c.gate("decreasing", !mc.points.empty() && mc.decreasing);
  c.gate("positive_exponent", mc.fit_defined && mc.r_hat > 0.0);
}

StateD random_control_start(const ModelSpec& m, Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    StateD x(m.n, m.d);
    x.q = 1.5 * rng.normal_matrix(m.n, m.d);
    x.p = 1.5 * rng.normal_matrix(m.n, m.d);
    if (!m.has_singular_terms() || min_pair_distance(m, x.q).distance >= 0.2) return x;
  }
  throw Error("could not draw a separated initial condition");
}

void write_control_path(Context& c, const std::string& name, const ControlPath& path, const ModelSpec& m) {
  std::string out = "# rho=" + io::fmt(path.rho) + "\n# T=" + io::fmt(path.T) + "\n# epsilon=" + io::fmt(path.epsilon) + "\n";
  out += "t";
  for (const auto& col : state_columns(m.n, m.d, {"q", "p", "U"})) out += "," + col;
  out += "\n";
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    out += io::fmt(path.times[k]);
    for (const MatrixXr* b : {&path.states[k].q, &path.states[k].p, &path.controls[k]})
      for (Index i = 0; i < b->rows(); ++i)
        for (Index j = 0; j < b->cols(); ++j) out += "," + io::fmt((*b)(i, j));
    out += "\n";
  }
  c.write_text(name, out);
}

void cmd_control_check(Context& c) {
  const ModelSpec& m = c.cfg.model;
  const bool fixed = !c.ex("x0").is_null();
  const Index cases = fixed ? 1 : c.count("cases");
  ControlOptions co;
  co.rho = c.num("rho");
  std::vector<ControlReport> reps(static_cast<std::size_t>(cases));
  std::vector<std::string> errs(static_cast<std::size_t>(cases));
  std::vector<json> meta(static_cast<std::size_t>(cases));
  std::vector<ControlPath> first(1);
  parallel_for(static_cast<std::size_t>(cases), c.threads, [&](std::size_t k) {
    Rng rng = Rng::substream(c.cfg.seed, k);
    const StateD x0 = fixed ? parse_state(c.ex("x0"), m, "/experiment/x0") : random_control_start(m, rng);
    try {
      ControlPath path = control_path(m, x0, substream_seed(c.cfg.seed, 1000000 + k), co);
      reps[k] = verify_control_path(m, x0, path);
      meta[k] = {path.T, path.rho, path.rho_halvings, path.waypoints, static_cast<Index>(path.times.size())};
      if (k == 0) first[0] = std::move(path);
    } catch (const Error& e) {
      errs[k] = e.what();
      meta[k] = {0.0, 0.0, 0, 0, 0};
    }
  });
  io::Table t{{"case", "T", "rho", "rho_halvings", "waypoints", "nodes", "start_q_error", "start_p_error",
               "end_q_error", "end_p_error", "speed_sqrt_eps", "residual_p", "residual_q", "min_distance", "passed",
               "error"},
              {}};
  bool all = true;
  for (Index k = 0; k < cases; ++k) {
    const auto& r = reps[static_cast<std::size_t>(k)];
    const auto& mt = meta[static_cast<std::size_t>(k)];
    const bool pass = errs[static_cast<std::size_t>(k)].empty() && r.passed;
    all = all && pass;
    t.rows.push_back({k, mt[0], mt[1], mt[2], mt[3], mt[4], r.start_q_error, r.start_p_error, r.end_q_error,
                      r.end_p_error, r.speed_sqrt_eps, r.residual_p, r.residual_q,
                      std::isfinite(r.min_distance) ? json(r.min_distance) : json(nullptr), pass,
                      errs[static_cast<std::size_t>(k)]});
  }
  c.write_table("control_cases", t);
  if (c.ex("write_path").get<bool>() && !first[0].times.empty()) write_control_path(c, "control_path_0.csv", first[0], m);
  c.gate("control_invariants", all);
}

void cmd_hypo_check(Context& c) {
  const ModelSpec& m = c.cfg.model;
  const Index n = c.count("states");
  std::vector<RankReport> reps(static_cast<std::size_t>(n));
  std::vector<StateD> xs(static_cast<std::size_t>(n));
  const RegionSampler sampler;
  parallel_for(static_cast<std::size_t>(n), c.threads, [&](std::size_t k) {
    Rng rng = Rng::substream(c.cfg.seed, k);
    StateD x = sampler.draw(m, static_cast<int>(k % 3), rng);
    x.p = rng.uniform(0.0, 3.0) * rng.normal_matrix(m.n, m.d);
    reps[k] = hypoellipticity_check(m, x);
    xs[k] = std::move(x);
  });
  io::Table t{{"state", "rank", "expected", "smallest_relative_sv", "full"}, {}};
  bool all = true;
  for (Index k = 0; k < n; ++k) {
    const auto& r = reps[static_cast<std::size_t>(k)];
    const double rel = r.singular_values.empty() ? 0.0 : r.singular_values.back() / r.singular_values.front();
    t.rows.push_back({k, r.rank, r.expected, rel, r.full});
    all = all && r.full;
  }
  c.write_table("hypo_ranks", t);
  c.gate("full_rank", all);
}

void cmd_lemma_a1(Context& c) {
  const Index N = c.count("N"), d = c.count("d");
  io::Table t{{"N", "d", "gamma", "s", "trials", "violations", "worst_margin", "max_equality_error"}, {}};
  bool all = true;
  std::uint64_t k = 0;
  for (double g : c.list("gamma"))
    for (double s : c.list("s")) {
      const LemmaCensus cen = lemma_a1_check(N, d, g, s, c.count("trials"), substream_seed(c.cfg.seed, k++), c.threads);
      t.rows.push_back({N, d, g, s, cen.trials, cen.violations, cen.worst_margin, cen.max_equality_error});
      all = all && cen.violations == 0 && (N != 2 || cen.max_equality_error <= 1e-12);
    }
  c.write_table("lemma_a1", t);
  c.gate("zero_violations", all);
}

void cmd_lemma_a2(Context& c) {
  const LemmaA2Fit f = lemma_a2_fit(c.cfg.model, c.count("trials"), c.cfg.seed, c.threads);
  c.write_json("lemma_a2", io::to_json(f));
  c.gate("feasible", f.feasible);
}

using Handler = void (*)(Context&);

Handler handler_for(const std::string& sub) {
  if (sub == "validate") return cmd_validate;
  if (sub == "simulate") return cmd_simulate;
  if (sub == "couple") return cmd_couple;
  if (sub == "newton-rate") return cmd_newton_rate;
  if (sub == "prob-curve") return cmd_prob_curve;
  if (sub == "lyapunov-scan") return cmd_lyapunov_scan;
  if (sub == "tune") return cmd_tune;
  if (sub == "sample-pi") return cmd_sample_pi;
  if (sub == "stationarity") return cmd_stationarity;
  if (sub == "mixing") return cmd_mixing;
  if (sub == "control-check") return cmd_control_check;
  if (sub == "hypo-check") return cmd_hypo_check;
  if (sub == "lemma-a1") return cmd_lemma_a1;
  if (sub == "lemma-a2") return cmd_lemma_a2;
  throw ConfigError("unknown subcommand '" + sub + "'");
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

int run(const std::string& sub, const RunOptions& opt, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  Context c;
  c.log = &log;
  Handler h = nullptr;
  try {
    h = handler_for(sub);
    json raw = opt.config_path.empty() ? json::object() : load_config_file(opt.config_path);
    for (const auto& o : opt.overrides) apply_override(raw, o);
    if (opt.seed) raw["seed"] = *opt.seed;
    c.cfg = parse_config(raw, sub);
    if (opt.threads < 1) throw ConfigError("--threads must be >= 1");
    c.threads = opt.threads;
    c.format = c.cfg.output.format;
    fs::path dir = opt.out.empty() ? fs::path(c.cfg.output.dir) : fs::path(opt.out);
    if (dir.is_relative())
      if (const char* root = std::getenv(kOutputRootEnv); root && *root) dir = fs::path(root) / dir;
    c.dir = dir;
    fs::create_directories(c.dir);
    if (c.cfg.auto_shift) c.cfg.model.energy_shift = auto_energy_shift(c.cfg.model, 20000, c.cfg.seed);
  } catch (const Error& e) {
    log << "invalid config: " << e.what() << "\n";
    return invalid_config;
  } catch (const fs::filesystem_error& e) {
    log << "invalid config: " << e.what() << "\n";
    return invalid_config;
  }

  std::string failure;
  try {
    h(c);
  } catch (const ConfigError& e) {
    log << "invalid config: " << e.what() << "\n";
    return invalid_config;
  } catch (const std::exception& e) {
    failure = e.what();
  }

  bool pass = failure.empty();
  for (auto it = c.gates.begin(); it != c.gates.end(); ++it) pass = pass && it.value().get<bool>();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json resolved = c.cfg.resolved;
  resolved["model"] = io::to_json(c.cfg.model);
  json manifest{{"subcommand", sub},
                {"config", resolved},
                {"config_hash", config_hash(resolved)},
                {"seed", c.cfg.seed},
                {"threads", c.threads},
                {"versions",
                 {{"rlab", kVersion},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"compiler", __VERSION__}}},
                {"started_utc", utc_now()},
                {"wall_time_s", wall},
                {"artifacts", c.artifacts},
                {"gates", c.gates},
                {"notes", c.notes},
                {"failure", failure},
                {"exit_code", pass ? ok : experiment_failed}};
  const fs::path mpath = c.dir / "manifest.json";
  try {
    io::write_json(mpath.string(), manifest);
  } catch (const Error& e) {
    log << "could not write manifest: " << e.what() << "\n";
    return experiment_failed;
  }
  if (!pass) {
    if (!failure.empty()) log << sub << " failed: " << failure << "\n";
    for (auto it = c.gates.begin(); it != c.gates.end(); ++it)
      if (!it.value().get<bool>()) log << sub << ": gate " << it.key() << " failed\n";
    log << "census: " << mpath.string() << "\n";
    return experiment_failed;
  }
  log << sub << ": all gates passed (" << mpath.string() << ")\n";
  return ok;
}

int main(int argc, char** argv) {
  CLI::App app{"Relativistic Langevin laboratory"};
  app.require_subcommand(1);
  RunOptions opt;
  std::uint64_t seed = 0;
  for (const auto& name : subcommands()) {
    CLI::App* sc = app.add_subcommand(name);
    sc->add_option("--config", opt.config_path, "JSON configuration file");
    sc->add_option("--seed", seed, "master seed (overrides the config)");
    sc->add_option("--threads", opt.threads, "worker threads; results do not depend on it");
    sc->add_option("--out", opt.out, "output directory (overrides output.dir)");
    sc->add_option("overrides", opt.overrides, "dotted overrides such as model.epsilon=0.05");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : invalid_config;
  }
  const CLI::App* sc = app.get_subcommands().front();
  if (sc->count("--seed")) opt.seed = seed;
  return run(sc->get_name(), opt, std::cerr);
}

}  // namespace rlang::cli
