#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cvxint/stitcher.hpp"

namespace cvxint {

struct RunConfig {
  std::string name = "run";
  int dim = 1;
  nlohmann::json initial = {{"name", "cosine"}, {"amplitude", 0.6366197723675814}};
  double M = 2.0;
  double lambda_slack = 0.5;
  std::optional<double> delta;  // checked against the selection rule when given
  std::vector<Interval> box;    // empty means the unit box
  int nx = 129, nt = 129;
  double T = 0.25;
  std::vector<ScheduleEntry> schedule = {{0.5, 0.5}, {0.25, 0.25}};
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "out";
  int inverse_trials = 20;
  bool dump_fields = true;
  StitchOptions stitch;

  BoxDomain domain() const;
  GridSpec grid() const;
  // Throws PreconditionError naming the offending key.
  void validate() const;
  nlohmann::json to_json() const;  // every default materialized
  static RunConfig from_json(const nlohmann::json& j);
};

// Reads a config file; relative "file" entries of the initial datum are
// resolved against the config's directory.
RunConfig load_config(const std::string& path);

struct RunResult {
  int exit_code = 0;
  std::string failed_certificate;  // empty on success
  nlohmann::json manifest;
};

// profile -> boundary datum -> iterate per seed; writes manifest.json,
// CSV diagnostics and field dumps under out_dir. exit_code is 0 iff every
// certificate passed; on failure out_dir/failure.json names the first one.
RunResult run_experiment(const RunConfig& cfg);

}  // namespace cvxint
