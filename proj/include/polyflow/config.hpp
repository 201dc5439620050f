#ifndef POLYFLOW_CONFIG_HPP
#define POLYFLOW_CONFIG_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyflow/flow.hpp"
#include "polyflow/model.hpp"
#include "polyflow/pipeline.hpp"
#include "polyflow/sim.hpp"
#include "polyflow/window.hpp"

namespace polyflow {

/// Every tunable of a run in one versioned document. Construction validates
/// the schema: unknown keys are rejected, missing keys fall back to
/// defaults. A run is fully determined by (config, seed); the canonical
/// hash is embedded in every output artifact.
struct RunConfig {
  int degree = 6;
  FitWindowConfig window;
  int history_len = 4;
  double ridge_weight = 0.1;
  FlowConfig flow;

  std::vector<int> hidden = {256, 256, 256};
  int tau_embed_dim = 8;

  long train_steps = 5000;
  int batch = 64;
  TrainConfig optimizer;
  long checkpoint_every = 1000;
  long log_every = 50;
  double holdout_fraction = 0.1;

  TaskKind task = TaskKind::min_jerk_p2p;
  TaskParams task_params;
  int demos = 100;

  long episode_steps = 0;  // 0 -> longest supported by the demo
  double k_eval = 0.0;     // 0 -> training stride
  long cadence = 0;
  double control_hz = 1000.0;
  int rollout_seeds = 20;
  PolicySource rollout_source = PolicySource::model;

  double plant_inertia = 1.0;
  double plant_damping = 5.0;
  double plant_dt = 1e-3;
  double kp = 400.0;
  double kd = 40.0;
  bool velocity_ff = true;

  std::uint64_t seed = 1;
  std::string out_dir = "out";

  static RunConfig defaults();
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  std::string hash() const;

  /// Output root, honoring the POLYFLOW_OUT_ROOT environment override.
  std::filesystem::path out_root() const;

  ModelSpec model_spec(int cond_dim) const;
  TrainOptions train_options() const;
  PlantParams plant(int dims) const;
  ControllerGains gains(int dims) const;
  void validate() const;
};

std::string to_string(PriorMode mode);
PriorMode prior_mode_from_string(const std::string& name);
std::string to_string(PolicySource source);
PolicySource policy_source_from_string(const std::string& name);

}  // namespace polyflow

#endif
