#ifndef POLYFLOW_PIPELINE_HPP
#define POLYFLOW_PIPELINE_HPP

#include <functional>
#include <span>
#include <vector>

#include "polyflow/codec.hpp"
#include "polyflow/flow.hpp"
#include "polyflow/model.hpp"
#include "polyflow/sim.hpp"

namespace polyflow {

/// One supervised pair: the raw history fit, the raw corrected future fit,
/// and the conditioning the model sees at that anchor.
struct TrainingExample {
  Eigen::MatrixXd source_raw;
  Eigen::MatrixXd target_raw;
  Eigen::VectorXd cond;
  long anchor = 0;
  int demo_index = 0;
};

struct Dataset {
  std::vector<TrainingExample> examples;
  ScaleNormalizer normalizer;
  FitWindowConfig window;
  int degree = 6;
  int history_len = 4;
  double ridge_weight = 0.1;
  int dims = 0;
  int cond_dim = 0;

  std::size_t size() const { return examples.size(); }
};

/// Chain-fit every demo into corrected targets plus history fits, then
/// freeze the per-order normalizer over the corrected corpus.
Dataset build_dataset(std::span<const Demo> demos, const FitWindowConfig& cfg,
                      int degree, int history_len, double ridge_weight);

/// Deterministic holdout split; both halves share the frozen normalizer.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data,
                                          double holdout_fraction, Rng& rng);

/// Normalized FlowSamples for the given example indices. Draws tau, the
/// history noise (one shared draw per sample) and, in gaussian mode, the
/// source itself from `rng`.
std::vector<FlowSample> assemble_batch(const Dataset& data,
                                       std::span<const std::size_t> indices,
                                       const FlowConfig& flow, Rng& rng);

struct TrainOptions {
  long steps = 5000;
  int batch = 64;
  TrainConfig optimizer;
  FlowConfig flow;
};

struct TrainLogEntry {
  long step = 0;
  double fm = 0.0;
  double cons = 0.0;
  double total = 0.0;
  double wall_ms = 0.0;
};

/// Runs steps [start_step, end_step). Each step's draws are keyed on
/// (seed, step), so a resumed run continues the identical trajectory.
void run_training(
    VelocityFieldModel& model, AdamState& opt, const Dataset& data,
    const TrainOptions& options, std::uint64_t seed, long start_step,
    long end_step,
    const std::function<void(const TrainLogEntry&)>& on_step = nullptr);

/// Convenience: init + train from scratch.
VelocityFieldModel train_model(const Dataset& data, const ModelSpec& spec,
                               const TrainOptions& options, std::uint64_t seed,
                               std::vector<TrainLogEntry>* log = nullptr);

/// Held-out one-step quality. `one_step_err` and `prior_gap` are Frobenius
/// norms in normalized space; traj_mse compares decoded execution slices in
/// raw units.
struct EvalStats {
  double one_step_err = 0.0;
  double prior_gap = 0.0;
  double traj_mse = 0.0;
  std::size_t count = 0;
};

EvalStats evaluate_one_step(const Dataset& data, const VelocityFieldModel& model,
                            PriorMode prior, int nfe, Rng& rng);

/// Model spec matching a dataset's shapes.
ModelSpec spec_for_dataset(const Dataset& data,
                           const std::vector<int>& hidden = {256, 256, 256},
                           int tau_embed_dim = 8);

}  // namespace polyflow

#endif
