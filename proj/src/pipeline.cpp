#include "polyflow/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace polyflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Dataset build_dataset(std::span<const Demo> demos, const FitWindowConfig& cfg,
                      int degree, int history_len, double ridge_weight) {
  if (demos.empty()) throw ContractError("no demonstrations");
  cfg.validate(degree);
  if (history_len < 2) throw ParamError("history length must be >= 2");

  Dataset data;
  data.window = cfg;
  data.degree = degree;
  data.history_len = history_len;
  data.ridge_weight = ridge_weight;
  data.dims = demos.front().traj.dims();

  std::vector<CoeffMatrix> corpus;
  const long t0_base = rollout_initial_anchor(cfg, history_len);
  for (int di = 0; di < static_cast<int>(demos.size()); ++di) {
    const Demo& demo = demos[di];
    if (demo.traj.dims() != data.dims)
      throw ContractError("demo dimensionality differs across corpus");
    const long n_steps = max_rollout_steps(demo.traj, cfg, t0_base);
    if (n_steps <= 0)
      throw InsufficientDataError("demo too short for one fitting window");

    const CoeffMatrix* prev = nullptr;
    CoeffMatrix prev_store;
    for (long t = t0_base; t <= t0_base + n_steps - cfg.exec_expert_steps();
         t += cfg.exec_expert_steps()) {
      CoeffMatrix target = fit_window(demo.traj, cfg, degree, t, prev);
      prev_store = target;
      prev = &prev_store;

      Trajectory hist;
      hist.samples = demo.traj.samples.middleRows(t - history_len + 1,
                                                  history_len);
      hist.frequency = demo.traj.frequency;
      hist.start_step = t - history_len + 1;
      const CoeffMatrix source =
          fit_history(hist, degree, ridge_weight, cfg);

      TrainingExample ex;
      ex.source_raw = source.values;
      ex.target_raw = target.values;
      const double phase = static_cast<double>(t) / demo.traj.steps();
      ex.cond = make_conditioning(hist.samples, demo.descriptor, phase);
      ex.anchor = t;
      ex.demo_index = di;
      data.examples.push_back(std::move(ex));
      // Both flow endpoints go into the scale corpus: history fits can
      // carry energy in orders the corrected targets barely use, and the
      // flow only stays well-scaled if both ends normalize to O(1).
      corpus.push_back(std::move(target));
      corpus.push_back(std::move(source));
    }
  }
  if (data.examples.empty())
    throw InsufficientDataError("corpus produced no fitting windows");
  data.cond_dim = static_cast<int>(data.examples.front().cond.size());
  data.normalizer = fit_normalizer(corpus);
  return data;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data,
                                          double holdout_fraction, Rng& rng) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ParamError("holdout fraction must be in (0,1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  const std::size_t held = std::max<std::size_t>(
      1, static_cast<std::size_t>(holdout_fraction * data.size()));
  Dataset train = data, hold = data;
  train.examples.clear();
  hold.examples.clear();
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < held ? hold : train).examples.push_back(data.examples[order[i]]);
  if (train.examples.empty()) throw ParamError("holdout leaves no train data");
  return {train, hold};
}

namespace {

MatrixXd normalized(const Dataset& data, const MatrixXd& raw) {
  return raw.array().colwise() / data.normalizer.scales.array();
}

}  // namespace

std::vector<FlowSample> assemble_batch(const Dataset& data,
                                       std::span<const std::size_t> indices,
                                       const FlowConfig& flow, Rng& rng) {
  flow.validate();
  std::vector<FlowSample> batch;
  batch.reserve(indices.size());
  for (std::size_t idx : indices) {
    const TrainingExample& ex = data.examples.at(idx);
    FlowSample s;
    s.target = normalized(data, ex.target_raw);
    if (flow.prior == PriorMode::history) {
      s.source = inject_history_noise(normalized(data, ex.source_raw),
                                      flow.history_noise_std, rng);
    } else {
      s.source = rng.normal_matrix(ex.target_raw.rows(), ex.target_raw.cols());
    }
    s.tau = rng.uniform();
    s.cond = ex.cond;
    batch.push_back(std::move(s));
  }
  return batch;
}

void run_training(VelocityFieldModel& model, AdamState& opt,
                  const Dataset& data, const TrainOptions& options,
                  std::uint64_t seed, long start_step, long end_step,
                  const std::function<void(const TrainLogEntry&)>& on_step) {
  if (data.examples.empty()) throw ContractError("empty dataset");
  if (options.batch < 1) throw ParamError("batch size must be >= 1");
  const Rng root(seed);

  for (long step = start_step; step < end_step; ++step) {
    const auto tic = std::chrono::steady_clock::now();
    Rng draw = root.split(static_cast<std::uint64_t>(step) + 1);
    std::vector<std::size_t> idx(options.batch);
    for (auto& i : idx) i = draw.below(data.size());
    const std::vector<FlowSample> batch =
        assemble_batch(data, idx, options.flow, draw);
    const LossRecord rec = train_step(model, batch, opt, options.optimizer,
                                      options.flow.consistency_weight);
    if (on_step) {
      TrainLogEntry entry;
      entry.step = step;
      entry.fm = rec.fm;
      entry.cons = rec.cons;
      entry.total = rec.total;
      entry.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - tic)
                          .count();
      on_step(entry);
    }
  }
}

VelocityFieldModel train_model(const Dataset& data, const ModelSpec& spec,
                               const TrainOptions& options, std::uint64_t seed,
                               std::vector<TrainLogEntry>* log) {
  Rng init_rng(seed, /*stream=*/0xC0FFEE);
  VelocityFieldModel model = VelocityFieldModel::init(spec, init_rng);
  AdamState opt = AdamState::zeros(model.param_count());
  std::function<void(const TrainLogEntry&)> on_step;
  if (log) on_step = [log](const TrainLogEntry& e) { log->push_back(e); };
  run_training(model, opt, data, options, seed, 0, options.steps, on_step);
  return model;
}

EvalStats evaluate_one_step(const Dataset& data,
                            const VelocityFieldModel& model, PriorMode prior,
                            int nfe, Rng& rng) {
  if (data.examples.empty()) throw ContractError("empty dataset");
  EvalStats stats;
  const int exec_points = 50;
  for (const TrainingExample& ex : data.examples) {
    const MatrixXd target_n = normalized(data, ex.target_raw);
    const MatrixXd source_n = normalized(data, ex.source_raw);
    const MatrixXd start =
        prior == PriorMode::history
            ? source_n
            : rng.normal_matrix(target_n.rows(), target_n.cols()).eval();
    const MatrixXd predicted_n = euler_infer(model, start, ex.cond, nfe);
    // Errors and gaps in raw coefficient units.
    const MatrixXd predicted_raw =
        predicted_n.array().colwise() * data.normalizer.scales.array();
    stats.one_step_err += (predicted_raw - ex.target_raw).norm();
    stats.prior_gap += (ex.source_raw - ex.target_raw).norm();

    CoeffMatrix pred{predicted_n, data.window, true};
    CoeffMatrix truth{target_n, data.window, true};
    const CoeffMatrix pred_raw = data.normalizer.denormalize(pred);
    const CoeffMatrix truth_raw = data.normalizer.denormalize(truth);
    const VectorXd grid = VectorXd::LinSpaced(
        exec_points, data.window.s_front(), data.window.s_rear());
    const double span = data.window.span_seconds(data.window.stride);
    const auto [pos_p, vel_p] = decode(pred_raw, grid, span);
    const auto [pos_t, vel_t] = decode(truth_raw, grid, span);
    stats.traj_mse += (pos_p.samples - pos_t.samples).squaredNorm() /
                      pos_t.samples.size();
  }
  const double n = static_cast<double>(data.examples.size());
  stats.one_step_err /= n;
  stats.prior_gap /= n;
  stats.traj_mse /= n;
  stats.count = data.examples.size();
  return stats;
}

ModelSpec spec_for_dataset(const Dataset& data, const std::vector<int>& hidden,
                           int tau_embed_dim) {
  ModelSpec spec;
  spec.coeff_rows = data.degree + 1;
  spec.coeff_cols = data.dims;
  spec.cond_dim = data.cond_dim;
  spec.hidden = hidden;
  spec.tau_embed_dim = tau_embed_dim;
  return spec;
}

}  // namespace polyflow
