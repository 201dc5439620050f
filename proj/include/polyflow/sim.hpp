#ifndef POLYFLOW_SIM_HPP
#define POLYFLOW_SIM_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "polyflow/codec.hpp"
#include "polyflow/flow.hpp"
#include "polyflow/model.hpp"
#include "polyflow/rng.hpp"
#include "polyflow/trajectory.hpp"

namespace polyflow {

struct PlantState {
  Eigen::VectorXd q;     // joint positions, rad
  Eigen::VectorXd qdot;  // joint velocities, rad/s
  double t = 0.0;
};

/// Decoupled inertia-damper joints driven by torque at a fixed timestep.
struct PlantParams {
  Eigen::VectorXd inertia;  // kg m^2, > 0
  Eigen::VectorXd damping;  // N m s / rad, >= 0
  double dt = 1e-3;

  static PlantParams uniform(int dims, double inertia_val = 1.0,
                             double damping_val = 5.0, double dt_val = 1e-3);
  void validate() const;
};

struct ControllerGains {
  Eigen::VectorXd kp;
  Eigen::VectorXd kd;
  bool velocity_ff = true;

  static ControllerGains uniform(int dims, double kp_val = 400.0,
                                 double kd_val = 40.0, bool ff = true);
};

enum class TaskKind { min_jerk_p2p, sinusoid_sweep, via_points };

TaskKind task_kind_from_string(const std::string& name);
std::string to_string(TaskKind kind);

struct TaskParams {
  int dims = 7;
  double hz = 50.0;
  double duration = 6.0;  // seconds per demo (per segment for via_points)
  double start_lo = -1.0, start_hi = 1.0;
  double goal_lo = -1.0, goal_hi = 1.0;
  double amp_lo = 0.3, amp_hi = 0.8;    // sinusoid amplitude range, rad
  double freq_lo = 0.2, freq_hi = 0.6;  // sinusoid frequency range, Hz
  int via_count = 3;                    // interior via points
};

/// Expert recording plus the task descriptor a policy conditions on
/// (goal waypoint, or sinusoid parameters).
struct Demo {
  Trajectory traj;
  Eigen::VectorXd descriptor;
};

Demo gen_demo(TaskKind kind, const TaskParams& params, Rng& rng);
Trajectory gen_expert(TaskKind kind, const TaskParams& params, Rng& rng);

/// PD with optional velocity feed-forward:
///   torque = kp (q_des - q) + kd (qdot_des - qdot),
/// with qdot_des forced to zero when the feed-forward flag is off.
Eigen::VectorXd controller_torque(const PlantState& state,
                                  const Eigen::VectorXd& q_des,
                                  const Eigen::VectorXd& qdot_des,
                                  const ControllerGains& gains);

/// Semi-implicit Euler: qddot = (torque - damping qdot) / inertia.
PlantState plant_step(const PlantState& state, const Eigen::VectorXd& torque,
                      const PlantParams& params);

/// [flat(history) | descriptor | phase]; fixed length across a run.
Eigen::VectorXd make_conditioning(const Eigen::MatrixXd& history,
                                  const Eigen::VectorXd& descriptor,
                                  double phase);

enum class PolicySource {
  model,               // euler_infer on the trained field
  oracle_corrected,    // decode the expert's own corrected chain
  oracle_uncorrected,  // independent plain fits, no anchors
};

struct Policy {
  const VelocityFieldModel* model = nullptr;
  const ScaleNormalizer* normalizer = nullptr;
  FitWindowConfig window;
  int degree = 6;
  int history_len = 4;
  double ridge_weight = 0.1;
};

struct RolloutConfig {
  long episode_steps = 0;  // expert steps to execute
  double k_eval = 0.0;     // 0 -> training stride
  long cadence = 0;        // expert steps between replans; 0 -> full slice
  PriorMode prior = PriorMode::history;
  int nfe = 1;
  double control_hz = 1000.0;
  PolicySource source = PolicySource::model;
};

struct RolloutRecord {
  Eigen::VectorXd time;
  Eigen::MatrixXd q_des, q, qdot_des, err;  // one row per controller tick
  std::vector<long> slice_starts;           // first tick row of each call
  Eigen::VectorXd junction_pos_gap;         // per interior call boundary
  Eigen::VectorXd junction_vel_gap;
  Eigen::VectorXd call_ms;  // inference span per call
  long calls = 0;
  double dt = 0.0;
  long episode_steps = 0;
};

/// First anchor with full history and window coverage.
long rollout_initial_anchor(const FitWindowConfig& cfg, int history_len);

/// Largest whole-cadence episode the recording supports from t0.
long max_rollout_steps(const Trajectory& expert, const FitWindowConfig& cfg,
                       long t0, long cadence = 0);

/// Closed loop: fit measured history, infer coefficients, decode the
/// execution slice and drive the torque-controlled plant at the controller
/// rate, replanning every cadence expert steps.
RolloutRecord rollout(const Policy& policy, const Demo& demo,
                      const RolloutConfig& cfg, const ControllerGains& gains,
                      const PlantParams& plant, Rng& rng);

/// Pure-controller floor: track the raw expert recording directly
/// (linear interpolation, finite-difference velocities).
RolloutRecord rollout_reference(const Trajectory& expert, long episode_steps,
                                const ControllerGains& gains,
                                const PlantParams& plant, double control_hz,
                                int history_len);

struct RolloutMetrics {
  Eigen::VectorXd mae_per_joint;
  double mae_total = 0.0;
  double iae = 0.0;  // integral of summed |error| over time
  double peak_error = 0.0;
  double max_junction_pos_gap = 0.0;
  double max_junction_vel_gap = 0.0;
  double grid_pos_bound = 0.0;  // max in-slice tick-to-tick command delta
  double grid_vel_bound = 0.0;
  long calls = 0;
  double mean_call_ms = 0.0;
};

RolloutMetrics compute_metrics(const RolloutRecord& record);

}  // namespace polyflow

#endif
