#pragma once

#include "rlang/ergodicity.hpp"
#include "rlang/limits.hpp"
#include "rlang/lyapunov.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace rlang::io {

using json = nlohmann::json;

// %.17g, so every double round-trips
std::string fmt(double x);

json to_json(const ModelSpec& m);
json to_json(const StateD& x);
json to_json(const ValidationReport& r);
json to_json(const LyapunovParams& p);
json to_json(const DriftReport& r);
json to_json(const RateFit& r);
json to_json(const ProbCurve& c);
json to_json(const MomentUniformity& u);
json to_json(const StationarityReport& r);
json to_json(const MixingCurve& c);
json to_json(const RankReport& r);
json to_json(const ControlReport& r);
json to_json(const LemmaCensus& c);
json to_json(const LemmaA2Fit& f);
json sample_diagnostics(const StationarySample& s);

void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const json& j);

// Header block (model hash, seed, scheme, kind, dt) then
// t, q<i>_<k>..., p<i>_<k>..., H, delta_min, dt_eff, rejections.
std::string trajectory_csv(const Trajectory& tr, const ModelSpec& m);
void write_trajectory_csv(const std::string& path, const Trajectory& tr, const ModelSpec& m);

// Trajectory schema without the t column; dt_eff and rejections are 0. Rows are chain-major.
void write_sample_csv(const std::string& path, const StationarySample& s, const ModelSpec& m);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;  // numbers, strings or booleans
};

// Writes <base>.csv or <base>.jsonl and returns the path.
std::string write_table(const std::string& base, const Table& t, const std::string& format);

}  // namespace rlang::io
