#include "rlang/config.hpp"
#include "rlang/integrate.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rlang {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& pointer, const std::string& msg) { throw ConfigError(pointer + ": " + msg); }

double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) fail(ptr, "expected a number");
  return j.get<double>();
}

Index integer(const json& j, const std::string& ptr) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    if (j.is_number_float() && j.get<double>() == std::floor(j.get<double>())) return static_cast<Index>(j.get<double>());
    fail(ptr, "expected an integer");
  }
  return j.get<Index>();
}

std::string string(const json& j, const std::string& ptr) {
  if (!j.is_string()) fail(ptr, "expected a string");
  return j.get<std::string>();
}

void only_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(ptr, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) fail(ptr + "/" + it.key(), "unknown key");
  }
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  if (a.is_null() || b.is_null()) return true;  // null defaults accept anything
  return a.type() == b.type();
}

}  // namespace

std::vector<std::string> subcommands() {
  return {"validate",     "simulate",  "couple",   "newton-rate",   "prob-curve", "lyapunov-scan", "tune",
          "sample-pi",    "stationarity", "mixing", "control-check", "hypo-check", "lemma-a1",      "lemma-a2"};
}

json experiment_defaults(const std::string& sub) {
  const json x0 = nullptr;
  if (sub == "validate") return {{"probes", 10000}, {"tolerance", 1e-9}};
  if (sub == "simulate")
    return {{"T", 1.0}, {"dt", 1e-3}, {"scheme", "strang-split"}, {"adaptive", true}, {"dissipative", true},
            {"kind", "relativistic"}, {"R", 10.0}, {"x0", x0}};
  if (sub == "couple")
    return {{"T", 1.0}, {"dt", 1e-3}, {"scheme", "strang-split"}, {"eps", x0}, {"x0", x0}};
  if (sub == "newton-rate")
    return {{"R", 10.0},      {"T", 1.0},       {"dt", 1e-4}, {"scheme", "strang-split"},
            {"eps_list", {1e-1, 1e-2, 1e-3, 1e-4}}, {"n_list", {1.0, 2.0}}, {"seeds", 200}, {"x0", x0},
            {"slope_tolerance", 0.2}};
  if (sub == "prob-curve")
    return {{"T", 1.0}, {"dt", 1e-3}, {"scheme", "strang-split"}, {"xi", 0.1},
            {"eps_list", {1e-1, 1e-2, 1e-3}}, {"seeds", 400}, {"x0", x0}};
  if (sub == "lyapunov-scan")
    return {{"n", 1.0}, {"alpha", x0}, {"samples", 20000}, {"params", json::object()}};
  if (sub == "tune") return {{"n", 1.0}, {"budget", 40}, {"samples", 20000}};
  if (sub == "sample-pi") return {{"samples", 10000}, {"chains", 16}, {"burn_in", 1000}, {"thin", 5}};
  if (sub == "stationarity")
    return {{"samples", 100000}, {"chains", 64}, {"burn_in", 2000}, {"thin", 5}, {"negative_control", true},
            {"mismatch_factor", 4.0}};
  if (sub == "mixing")
    return {{"t_grid", {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}},
            {"ensemble", 2000},
            {"dt", 5e-3},
            {"scheme", "strang-split"},
            {"x0", x0},
            {"reference_samples", 20000},
            {"chains", 32},
            {"burn_in", 1000}};
  if (sub == "control-check") return {{"cases", 10}, {"rho", 0.1}, {"x0", x0}, {"write_path", true}};
  if (sub == "hypo-check") return {{"states", 1000}};
  if (sub == "lemma-a1")
    return {{"N", 3}, {"d", 2}, {"gamma", {0.25, 0.5, 1.0}}, {"s", {0.0, 1.0, 2.0}}, {"trials", 10000}};
  if (sub == "lemma-a2") return {{"trials", 10000}};
  throw ConfigError("unknown subcommand '" + sub + "'");
}

json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override '" + assignment + "' descends into a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ModelSpec parse_model(const json& j, const std::string& ptr) {
  ModelSpec m;
  if (j.is_null()) return m;
  only_keys(j, ptr, {"n", "d", "epsilon", "anchored", "energy_shift", "collision_floor", "confining", "singular"});
  if (j.contains("n")) m.n = integer(j["n"], ptr + "/n");
  if (j.contains("d")) m.d = integer(j["d"], ptr + "/d");
  if (j.contains("epsilon")) m.epsilon = number(j["epsilon"], ptr + "/epsilon");
  if (j.contains("anchored")) {
    if (!j["anchored"].is_boolean()) fail(ptr + "/anchored", "expected a boolean");
    m.anchored = j["anchored"].get<bool>();
  }
  if (j.contains("energy_shift") && !j["energy_shift"].is_string())
    m.energy_shift = number(j["energy_shift"], ptr + "/energy_shift");
  if (j.contains("energy_shift") && j["energy_shift"].is_string() && j["energy_shift"] != "auto")
    fail(ptr + "/energy_shift", "expected a number or \"auto\"");
  if (j.contains("collision_floor")) m.collision_floor = number(j["collision_floor"], ptr + "/collision_floor");
  if (j.contains("confining")) {
    const json& c = j["confining"];
    const std::string cp = ptr + "/confining";
    only_keys(c, cp, {"family", "lambda", "a1", "a2", "a3"});
    if (c.contains("family")) {
      const std::string f = string(c["family"], cp + "/family");
      if (f != "power") fail(cp + "/family", "only \"power\" is available from a config file");
    }
    if (c.contains("lambda")) m.confining.lambda = number(c["lambda"], cp + "/lambda");
    if (c.contains("a1") && !c["a1"].is_null()) m.confining.a1 = number(c["a1"], cp + "/a1");
    if (c.contains("a2") && !c["a2"].is_null()) m.confining.a2 = number(c["a2"], cp + "/a2");
    if (c.contains("a3") && !c["a3"].is_null()) m.confining.a3 = number(c["a3"], cp + "/a3");
  }
  if (j.contains("singular")) {
    const json& s = j["singular"];
    const std::string sp = ptr + "/singular";
    only_keys(s, sp, {"family", "beta1", "beta2", "a4", "a5", "a6"});
    const std::string fam = s.contains("family") ? string(s["family"], sp + "/family") : "coulomb";
    const double a4 = s.contains("a4") ? number(s["a4"], sp + "/a4") : kInf;
    if (fam == "coulomb") {
      m.singular = SingularSpec::coulomb(std::isfinite(a4) ? a4 : 1.0);
    } else if (fam == "riesz") {
      const double b1 = s.contains("beta1") ? number(s["beta1"], sp + "/beta1") : 1.5;
      m.singular = SingularSpec::riesz(b1, std::isfinite(a4) ? a4 : 1.0);
    } else if (fam == "log") {
      m.singular = SingularSpec::logarithmic(std::isfinite(a4) ? a4 : 1.0);
    } else if (fam == "lennard_jones" || fam == "lennard-jones") {
      m.singular = SingularSpec::lennard_jones(std::isfinite(a4) ? a4 : 48.0);
    } else {
      fail(sp + "/family", "expected one of coulomb, riesz, log, lennard_jones");
    }
    if (s.contains("beta1")) m.singular.beta1 = number(s["beta1"], sp + "/beta1");
    if (s.contains("beta2")) m.singular.beta2 = number(s["beta2"], sp + "/beta2");
    if (s.contains("a5")) m.singular.a5 = number(s["a5"], sp + "/a5");
    if (s.contains("a6")) m.singular.a6 = number(s["a6"], sp + "/a6");
  }
  try {
    m.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(ptr + ": " + e.what());
  }
  return m;
}

ExperimentConfig parse_config(const json& j, const std::string& sub) {
  ExperimentConfig c;
  c.subcommand = sub;
  const json root = j.is_null() ? json::object() : j;
  only_keys(root, "", {"model", "experiment", "output", "seed"});
  c.model = parse_model(root.value("model", json(nullptr)));
  c.auto_shift = root.contains("model") && root["model"].contains("energy_shift") &&
                 root["model"]["energy_shift"].is_string();

  c.experiment = experiment_defaults(sub);
  if (root.contains("experiment")) {
    const json& e = root["experiment"];
    if (!e.is_object()) fail("/experiment", "expected an object");
    for (auto it = e.begin(); it != e.end(); ++it) {
      const std::string p = "/experiment/" + it.key();
      if (!c.experiment.contains(it.key())) fail(p, "unknown key for subcommand " + sub);
      if (!same_kind(c.experiment[it.key()], it.value())) fail(p, "wrong type");
      c.experiment[it.key()] = it.value();
    }
  }
  if (root.contains("output")) {
    const json& o = root["output"];
    only_keys(o, "/output", {"dir", "format"});
    if (o.contains("dir")) c.output.dir = string(o["dir"], "/output/dir");
    if (o.contains("format")) c.output.format = string(o["format"], "/output/format");
  }
  if (c.output.format != "csv" && c.output.format != "jsonl") fail("/output/format", "expected csv or jsonl");
  if (root.contains("seed")) {
    const json& s = root["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) fail("/seed", "expected a u64");
    c.seed = s.get<std::uint64_t>();
  }
  c.resolved = json{{"model", root.value("model", json::object())},
                    {"experiment", c.experiment},
                    {"output", {{"dir", c.output.dir}, {"format", c.output.format}}},
                    {"seed", c.seed}};
  return c;
}

std::string config_hash(const json& resolved) {
  const std::string s = resolved.dump();
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(s.data(), s.size()));
  return buf;
}

}  // namespace rlang
