#pragma once

#include "rlang/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rlang::cli {

// Environment variable naming the root that relative output directories resolve against.
inline constexpr const char* kOutputRootEnv = "RLANG_OUTPUT_ROOT";

struct RunOptions {
  std::string config_path;  // empty: defaults only
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out;  // overrides output.dir
  std::vector<std::string> overrides;
};

enum Exit { ok = 0, experiment_failed = 1, invalid_config = 2 };

// Runs one subcommand, writing artifacts and manifest.json into the output directory.
int run(const std::string& subcommand, const RunOptions& opt, std::ostream& log);

// Parses argv with CLI11 and dispatches to run().
int main(int argc, char** argv);

}  // namespace rlang::cli
