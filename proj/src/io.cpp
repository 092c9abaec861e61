#include "rlang/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace rlang::io {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

json matrix_json(const MatrixXr& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_cell(const json& v) {
  if (v.is_number_float()) return fmt(v.get<double>());
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return s;
}

void state_columns(std::string& out, Index n, Index d) {
  for (const char* blk : {"q", "p"})
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < d; ++k) out += "," + std::string(blk) + std::to_string(i) + "_" + std::to_string(k);
}

void state_cells(std::string& out, const StateD& x) {
  for (const MatrixXr* blk : {&x.q, &x.p})
    for (Index i = 0; i < blk->rows(); ++i)
      for (Index k = 0; k < blk->cols(); ++k) out += "," + fmt((*blk)(i, k));
}

}  // namespace

json to_json(const ModelSpec& m) {
  return json{{"n", m.n},
              {"d", m.d},
              {"epsilon", m.epsilon},
              {"anchored", m.anchored},
              {"energy_shift", m.energy_shift},
              {"collision_floor", m.collision_floor},
              {"confining",
               {{"family", family_name(m.confining.family)},
                {"lambda", m.confining.lambda},
                {"a1", opt(m.confining.a1)},
                {"a2", opt(m.confining.a2)},
                {"a3", opt(m.confining.a3)}}},
              {"singular",
               {{"family", family_name(m.singular.family)},
                {"beta1", m.singular.beta1},
                {"beta2", m.singular.beta2},
                {"a4", m.singular.a4},
                {"a5", m.singular.a5},
                {"a6", m.singular.a6}}}};
}

json to_json(const StateD& x) { return json{{"q", matrix_json(x.q)}, {"p", matrix_json(x.p)}}; }

json to_json(const ValidationReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name},
                      {"statement", c.statement},
                      {"pass", c.pass},
                      {"worst_residual", c.worst_residual},
                      {"probes", c.probes}});
  return json{{"passed", r.passed},
              {"checks", checks},
              {"constants",
               {{"a1", r.a1}, {"a2", r.a2}, {"a3", r.a3}, {"a4", r.a4}, {"a5", r.a5}, {"a6", r.a6}}},
              {"declared", {{"a1", r.a1_declared}, {"a2", r.a2_declared}, {"a3", r.a3_declared}}},
              {"beta1", r.beta1},
              {"beta2", r.beta2},
              {"g2_compliant", r.g2_compliant},
              {"min_total_potential", r.min_total_potential},
              {"suggested_energy_shift", r.suggested_energy_shift},
              {"tolerance", r.tolerance},
              {"probe_count", r.probe_count},
              {"seed", r.seed},
              {"note", r.note}};
}

json to_json(const LyapunovParams& p) {
  if (const auto* a = std::get_if<LyapunovParams1>(&p))
    return json{{"family", "V1"}, {"eps1", a->eps1}, {"kappa1", a->kappa1}};
  const auto& b = std::get<LyapunovParamsN>(p);
  return json{{"family", "VN"}, {"A1", b.A1}, {"A2", b.A2}, {"kappaN", b.kappaN}};
}

json to_json(const DriftReport& r) {
  return json{{"n", r.n},
              {"alpha", r.alpha},
              {"c", r.c},
              {"C", r.C},
              {"params", to_json(r.params)},
              {"samples", r.samples},
              {"evaluated", r.evaluated},
              {"excluded", r.excluded},
              {"violations", r.violations},
              {"worst_margin", r.worst_margin},
              {"argmax_state", r.argmax_state.q.size() ? to_json(r.argmax_state) : json(nullptr)},
              {"hull_vertices", r.hull_vertices},
              {"min_v", r.min_v},
              {"negative_drift_count", r.negative_drift_count},
              {"sampler", r.sampler},
              {"seed", r.seed},
              {"passed", r.passed},
              {"failure", r.failure}};
}

json to_json(const RateFit& r) {
  return json{{"n", r.n},
              {"slope", r.slope},
              {"intercept", r.intercept},
              {"r2", r.r2},
              {"window", r.eps},
              {"residuals", r.residuals},
              {"seeds", r.seeds},
              {"master_seed", r.master_seed},
              {"ok", r.ok},
              {"failure", r.failure}};
}

json to_json(const ProbCurve& c) {
  json pts = json::array();
  for (const auto& p : c.points)
    pts.push_back({{"epsilon", p.eps},
                   {"phat", p.phat},
                   {"lo", p.lo},
                   {"hi", p.hi},
                   {"exceed", p.exceed},
                   {"n_ok", p.n_ok},
                   {"n_failed", p.n_failed}});
  return json{{"xi", c.xi},
              {"points", pts},
              {"strictly_decreasing", c.strictly_decreasing},
              {"consecutive_decreases", c.consecutive_decreases},
              {"endpoints_separated", c.endpoints_separated},
              {"ok", c.ok},
              {"failure", c.failure}};
}

json to_json(const MomentUniformity& u) {
  return json{{"epsilon", u.eps}, {"mean_sup", u.mean_sup}, {"stderr", u.stderr_}, {"n_ok", u.n_ok}, {"ratio", u.ratio}};
}

json to_json(const StationarityReport& r) {
  json items = json::array();
  for (const auto& it : r.items)
    items.push_back({{"name", it.name},
                     {"mean", it.mean},
                     {"se", it.se},
                     {"z", it.z},
                     {"support_hits", it.support_hits},
                     {"pass", it.pass},
                     {"rejected", it.rejected},
                     {"reason", it.reason}});
  return json{{"items", items},
              {"generator_epsilon", r.generator_epsilon},
              {"sample_epsilon", r.sample_epsilon},
              {"all_pass", r.all_pass}};
}

json to_json(const MixingCurve& c) {
  return json{{"reference", c.reference},
              {"reference_se", c.reference_se},
              {"r_hat", c.r_hat},
              {"intercept", c.intercept},
              {"fit_defined", c.fit_defined},
              {"decreasing", c.decreasing},
              {"window", c.window},
              {"failures", c.failures},
              {"failure", c.failure}};
}

json to_json(const RankReport& r) {
  return json{{"rank", r.rank}, {"expected", r.expected}, {"full", r.full}, {"singular_values", r.singular_values}};
}

json to_json(const ControlReport& r) {
  return json{{"start_q_error", r.start_q_error},
              {"start_p_error", r.start_p_error},
              {"end_q_error", r.end_q_error},
              {"end_p_error", r.end_p_error},
              {"speed_sqrt_eps", r.speed_sqrt_eps},
              {"residual_p", r.residual_p},
              {"residual_q", r.residual_q},
              {"min_distance", r.min_distance},
              {"passed", r.passed}};
}

json to_json(const LemmaCensus& c) {
  return json{{"trials", c.trials},
              {"violations", c.violations},
              {"worst_margin", c.worst_margin},
              {"max_equality_error", c.max_equality_error},
              {"seed", c.seed}};
}

json to_json(const LemmaA2Fit& f) {
  return json{{"c_G", f.c_G},
              {"C_G", f.C_G},
              {"feasible", f.feasible},
              {"census", to_json(f.census)},
              {"near_collision_samples", f.near_collision_samples}};
}

json sample_diagnostics(const StationarySample& s) {
  return json{{"samples", s.states.size()},
              {"chains", s.chains},
              {"q_acceptance", s.q_acceptance},
              {"q_acceptance_mean", s.q_acceptance_mean},
              {"step_sizes", s.step_sizes},
              {"p_acceptance", s.p_acceptance},
              {"p_proposal_scale", s.p_proposal_scale},
              {"ess", s.ess},
              {"epsilon", s.epsilon},
              {"seed", s.seed},
              {"degenerate", s.degenerate},
              {"warning", s.warning}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error("write failed: " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string trajectory_csv(const Trajectory& tr, const ModelSpec& m) {
  std::string out;
  out += "# model_hash=" + hex(tr.model_hash) + "\n";
  out += "# seed=" + std::to_string(tr.seed) + "\n";
  out += "# scheme=" + tr.scheme + "\n";
  out += "# kind=" + tr.kind + "\n";
  out += "# dt=" + fmt(tr.dt) + "\n";
  out += "t";
  state_columns(out, m.n, m.d);
  out += ",H,delta_min,dt_eff,rejections\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    out += fmt(tr.times[k]);
    state_cells(out, tr.states[k]);
    out += "," + fmt(tr.hamiltonian[k]) + "," + fmt(tr.delta_min[k]) + "," + fmt(tr.dt_eff[k]) + "," +
           std::to_string(tr.rejections[k]) + "\n";
  }
  return out;
}

void write_trajectory_csv(const std::string& path, const Trajectory& tr, const ModelSpec& m) {
  write_text(path, trajectory_csv(tr, m));
}

void write_sample_csv(const std::string& path, const StationarySample& s, const ModelSpec& m) {
  std::string out;
  out += "# model_hash=" + hex(model_hash(m)) + "\n";
  out += "# seed=" + std::to_string(s.seed) + "\n";
  out += "# scheme=stationary-sample\n";
  out += "# chains=" + std::to_string(s.chains) + "\n";
  out += "# dt=0\n";
  std::string header;
  state_columns(header, m.n, m.d);
  out += header.substr(1) + ",H,delta_min,dt_eff,rejections\n";
  for (const auto& x : s.states) {
    std::string row;
    state_cells(row, x);
    const double dmin = m.has_singular_terms() ? min_pair_distance(m, x.q).distance : kInf;
    out += row.substr(1) + "," + fmt(hamiltonian(m, x)) + "," + fmt(dmin) + ",0,0\n";
  }
  write_text(path, out);
}

std::string write_table(const std::string& base, const Table& t, const std::string& format) {
  std::string out;
  if (format == "csv") {
    for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + t.columns[c];
    out += "\n";
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + csv_cell(row[c]);
      out += "\n";
    }
  } else if (format == "jsonl") {
    for (const auto& row : t.rows) {
      json o = json::object();
      for (std::size_t c = 0; c < row.size() && c < t.columns.size(); ++c) o[t.columns[c]] = row[c];
      out += o.dump() + "\n";
    }
  } else {
    throw ConfigError("output.format must be csv or jsonl");
  }
  const std::string path = base + "." + format;
  write_text(path, out);
  return path;
}

}  // namespace rlang::io
