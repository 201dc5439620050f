#ifndef POLYFLOW_BENCH_HPP
#define POLYFLOW_BENCH_HPP

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyflow/config.hpp"
#include "polyflow/sim.hpp"

namespace polyflow {

/// One-parameter grid over a base run config. `parameter` is a dotted path
/// into the config document ("window.stride", "flow.nfe", "rollout.k_eval",
/// "gains.velocity_ff", ...).
struct SweepSpec {
  std::string parameter;
  std::vector<nlohmann::json> values;
  int seeds_per_cell = 20;
  nlohmann::json base_config;
  std::string name = "sweep";
  int workers = 1;
};

SweepSpec sweep_spec_from_json(const nlohmann::json& j);

struct CellResult {
  nlohmann::json value;
  bool ok = true;
  std::string error;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;
  std::string config_hash;
  int seeds = 0;
};

/// Assign a value at a dotted path inside a config document.
void set_config_value(nlohmann::json& config, const std::string& path,
                      const nlohmann::json& value);

/// Metrics of one seeded end-to-end run under a config: generate the demo
/// corpus, build targets, train if the config asks for steps, roll out.
std::map<std::string, double> run_experiment(const RunConfig& cfg,
                                             std::uint64_t rollout_seed);

/// One row per grid cell, cells independent and merged in grid order;
/// failures are recorded in-row and the sweep continues. Writes
/// <name>_results.csv and <name>_summary.json under out_dir.
std::vector<CellResult> run_sweep(const SweepSpec& spec,
                                  const std::filesystem::path& out_dir);

struct LatencyReport {
  double per_call_ms_mean = 0.0;
  double per_call_ms_median = 0.0;
  double per_call_ms_p95 = 0.0;
  double per_episode_ms = 0.0;
  double amortized_ms_per_step = 0.0;
  long calls = 0;
};

/// Aggregates the inference spans recorded by rollouts; plant stepping is
/// never part of the measured window.
LatencyReport latency_report(std::span<const RolloutRecord> records);

nlohmann::json latency_to_json(const LatencyReport& r);

}  // namespace polyflow

#endif
