#include "polyflow/sim.hpp"

#include <chrono>
#include <cmath>
#include <deque>

namespace polyflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

PlantParams PlantParams::uniform(int dims, double inertia_val,
                                 double damping_val, double dt_val) {
  PlantParams p;
  p.inertia = VectorXd::Constant(dims, inertia_val);
  p.damping = VectorXd::Constant(dims, damping_val);
  p.dt = dt_val;
  p.validate();
  return p;
}

void PlantParams::validate() const {
  if (inertia.size() == 0 || inertia.size() != damping.size())
    throw ContractError("plant parameter shapes differ");
  if ((inertia.array() <= 0.0).any()) throw ParamError("inertia must be > 0");
  if ((damping.array() < 0.0).any()) throw ParamError("damping must be >= 0");
  if (!(dt > 0.0)) throw ParamError("dt must be > 0");
}

ControllerGains ControllerGains::uniform(int dims, double kp_val,
                                         double kd_val, bool ff) {
  ControllerGains g;
  g.kp = VectorXd::Constant(dims, kp_val);
  g.kd = VectorXd::Constant(dims, kd_val);
  g.velocity_ff = ff;
  return g;
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "min_jerk_p2p") return TaskKind::min_jerk_p2p;
  if (name == "sinusoid_sweep") return TaskKind::sinusoid_sweep;
  if (name == "via_points") return TaskKind::via_points;
  throw ParamError("unknown task kind: " + name);
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::min_jerk_p2p:
      return "min_jerk_p2p";
    case TaskKind::sinusoid_sweep:
      return "sinusoid_sweep";
    case TaskKind::via_points:
      return "via_points";
  }
  throw ParamError("unknown task kind");
}

namespace {

/// Quintic profile with zero boundary velocity and acceleration.
double min_jerk_blend(double u) {
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

MatrixXd min_jerk_segment(const VectorXd& from, const VectorXd& to,
                          long steps, double hz, double duration) {
  MatrixXd out(steps, from.size());
  for (long i = 0; i < steps; ++i) {
    const double u = std::min(1.0, (i / hz) / duration);
    out.row(i) = (from + (to - from) * min_jerk_blend(u)).transpose();
  }
  return out;
}

}  // namespace

Demo gen_demo(TaskKind kind, const TaskParams& params, Rng& rng) {
  if (params.dims < 1) throw ParamError("task needs at least one joint");
  if (!(params.hz > 0.0) || !(params.duration > 0.0))
    throw ParamError("task rate and duration must be positive");
  const int d = params.dims;
  const long seg_steps =
      static_cast<long>(std::lround(params.duration * params.hz)) + 1;
  if (seg_steps < 2) throw ParamError("task duration too short to sample");

  Demo demo;
  demo.traj.frequency = params.hz;
  demo.traj.start_step = 0;

  switch (kind) {
    case TaskKind::min_jerk_p2p: {
      VectorXd q0(d), q1(d);
      for (int j = 0; j < d; ++j) {
        q0(j) = rng.uniform(params.start_lo, params.start_hi);
        q1(j) = rng.uniform(params.goal_lo, params.goal_hi);
      }
      demo.traj.samples =
          min_jerk_segment(q0, q1, seg_steps, params.hz, params.duration);
      demo.descriptor = q1;
      break;
    }
    case TaskKind::sinusoid_sweep: {
      VectorXd amp(d), omega(d), phase(d), mid(d);
      for (int j = 0; j < d; ++j) {
        amp(j) = rng.uniform(params.amp_lo, params.amp_hi);
        omega(j) = 2.0 * M_PI * rng.uniform(params.freq_lo, params.freq_hi);
        phase(j) = rng.uniform(0.0, 2.0 * M_PI);
        mid(j) = rng.uniform(params.start_lo, params.start_hi);
      }
      demo.traj.samples.resize(seg_steps, d);
      for (long i = 0; i < seg_steps; ++i) {
        const double t = i / params.hz;
        demo.traj.samples.row(i) =
            (mid.array() + amp.array() * (omega.array() * t + phase.array()).sin())
                .transpose();
      }
      demo.descriptor.resize(3 * d);
      demo.descriptor << amp, omega, phase;
      break;
    }
    case TaskKind::via_points: {
      if (params.via_count < 1)
        throw ParamError("via_points task needs at least one via");
      const int segments = params.via_count + 1;
      std::vector<VectorXd> pts;
      pts.reserve(segments + 1);
      for (int v = 0; v <= segments; ++v) {
        VectorXd p(d);
        for (int j = 0; j < d; ++j)
          p(j) = rng.uniform(params.start_lo, params.start_hi);
        pts.push_back(p);
      }
      // Segments share via samples, so junctions keep zero vel/acc (C2).
      demo.traj.samples.resize(1 + segments * (seg_steps - 1), d);
      demo.traj.samples.row(0) = pts[0].transpose();
      long at = 1;
      for (int v = 0; v < segments; ++v) {
        const MatrixXd seg = min_jerk_segment(pts[v], pts[v + 1], seg_steps,
                                              params.hz, params.duration);
        demo.traj.samples.middleRows(at, seg_steps - 1) =
            seg.bottomRows(seg_steps - 1);
        at += seg_steps - 1;
      }
      demo.descriptor = pts.back();
      break;
    }
  }
  demo.traj.validate();
  return demo;
}

Trajectory gen_expert(TaskKind kind, const TaskParams& params, Rng& rng) {
  return gen_demo(kind, params, rng).traj;
}

VectorXd controller_torque(const PlantState& state, const VectorXd& q_des,
                           const VectorXd& qdot_des,
                           const ControllerGains& gains) {
  if (q_des.size() != state.q.size() || qdot_des.size() != state.q.size())
    throw ContractError("command shape does not match plant state");
  const VectorXd vel_cmd =
      gains.velocity_ff ? qdot_des : VectorXd::Zero(qdot_des.size());
  return gains.kp.cwiseProduct(q_des - state.q) +
         gains.kd.cwiseProduct(vel_cmd - state.qdot);
}

PlantState plant_step(const PlantState& state, const VectorXd& torque,
                      const PlantParams& params) {
  if (torque.size() != state.q.size())
    throw ContractError("torque shape does not match plant state");
  PlantState next;
  const VectorXd qddot =
      (torque - params.damping.cwiseProduct(state.qdot))
          .cwiseQuotient(params.inertia);
  next.qdot = state.qdot + qddot * params.dt;
  next.q = state.q + next.qdot * params.dt;
  next.t = state.t + params.dt;
  if (!next.q.allFinite() || !next.qdot.allFinite())
    throw DivergenceError("plant state diverged at t=" +
                          std::to_string(state.t));
  return next;
}

VectorXd make_conditioning(const MatrixXd& history, const VectorXd& descriptor,
                           double phase) {
  VectorXd e(history.size() + descriptor.size() + 1);
  e.segment(0, history.size()) =
      Eigen::Map<const VectorXd>(history.data(), history.size());
  e.segment(history.size(), descriptor.size()) = descriptor;
  e(e.size() - 1) = phase;
  return e;
}

long rollout_initial_anchor(const FitWindowConfig& cfg, int history_len) {
  const long hist_ready = history_len - 1;
  const long window_ready =
      static_cast<long>(cfg.stride) * (cfg.fit_padding + cfg.overlap_pre) - 1;
  return std::max<long>({hist_ready, window_ready, 1});
}

long max_rollout_steps(const Trajectory& expert, const FitWindowConfig& cfg,
                       long t0, long cadence) {
  if (cadence <= 0) cadence = cfg.exec_expert_steps();
  const long last = expert.start_step + expert.steps() - 1;
  // Rear of the fitting window plus one step for the finite-difference
  // velocity target at the rear anchor.
  const long tail = 1 +
                    static_cast<long>(cfg.stride) *
                        (cfg.exec_steps + cfg.overlap_post + cfg.fit_padding - 1) +
                    1;
  const long t_max = last - tail;
  if (t_max < t0) return 0;
  const long calls = (t_max - t0) / cadence + 1;
  return calls * cadence;
}

namespace {

struct HistoryBuffer {
  std::deque<VectorXd> rows;
  std::size_t capacity;

  explicit HistoryBuffer(std::size_t cap) : capacity(cap) {}
  void push(const VectorXd& q) {
    rows.push_back(q);
    if (rows.size() > capacity) rows.pop_front();
  }
  MatrixXd matrix() const {
    MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      m.row(i) = rows[i].transpose();
    return m;
  }
};

}  // namespace

RolloutRecord rollout(const Policy& policy, const Demo& demo,
                      const RolloutConfig& cfg, const ControllerGains& gains,
                      const PlantParams& plant, Rng& rng) {
  const Trajectory& expert = demo.traj;
  expert.validate();
  const FitWindowConfig& win = policy.window;
  win.validate(policy.degree);
  plant.validate();
  if (policy.history_len < 2) throw ParamError("history length must be >= 2");
  if (cfg.episode_steps < 1) throw ParamError("episode has no steps");
  if (cfg.source == PolicySource::model &&
      (policy.model == nullptr || policy.normalizer == nullptr))
    throw ContractError("model rollout needs a model and a normalizer");

  const double k_eval = cfg.k_eval > 0.0 ? cfg.k_eval : win.stride;
  const long exec_steps = win.exec_expert_steps();
  const long cadence = cfg.cadence > 0 ? cfg.cadence : exec_steps;
  if (cadence > exec_steps)
    throw ParamError("replanning cadence exceeds executable steps");

  const long t0 = rollout_initial_anchor(win, policy.history_len);
  if (max_rollout_steps(expert, win, t0, cadence) < cfg.episode_steps)
    throw InsufficientDataError("expert recording too short for episode");

  const long calls = (cfg.episode_steps + cadence - 1) / cadence;
  const double span = win.span_seconds(k_eval);
  const double duration = (win.s_rear() - win.s_front()) * span;
  const long full_ticks = std::max<long>(
      1, std::lround(duration * cfg.control_hz));
  const double dt = duration / full_ticks;
  const auto ticks_for = [&](long steps) {
    return std::max<long>(
        1, std::lround(static_cast<double>(full_ticks) * steps / exec_steps));
  };
  const long ticks_cad = ticks_for(cadence);
  const long last_steps = cfg.episode_steps - (calls - 1) * cadence;
  const long total_ticks = (calls - 1) * ticks_cad + ticks_for(last_steps);

  RolloutRecord rec;
  rec.dt = dt;
  rec.calls = calls;
  rec.episode_steps = cfg.episode_steps;
  rec.time.resize(total_ticks);
  rec.q_des.resize(total_ticks, expert.dims());
  rec.q.resize(total_ticks, expert.dims());
  rec.qdot_des.resize(total_ticks, expert.dims());
  rec.err.resize(total_ticks, expert.dims());
  rec.junction_pos_gap = VectorXd::Zero(std::max<long>(0, calls - 1));
  rec.junction_vel_gap = VectorXd::Zero(std::max<long>(0, calls - 1));
  rec.call_ms.resize(calls);

  HistoryBuffer history(policy.history_len);
  for (long s = t0 - policy.history_len + 1; s <= t0; ++s)
    history.push(expert.samples.row(s - expert.start_step).transpose());

  PlantState state;
  state.q = expert.samples.row(t0 - expert.start_step).transpose();
  state.qdot = VectorXd::Zero(expert.dims());

  PlantParams stepper = plant;
  stepper.dt = dt;

  CoeffMatrix prev_fit;
  bool have_prev = false;
  RowVectorXd last_cmd_q, last_cmd_v;
  long row = 0;

  for (long c = 0; c < calls; ++c) {
    const long t = t0 + c * cadence;
    const auto tic = std::chrono::steady_clock::now();

    CoeffMatrix coeffs;
    switch (cfg.source) {
      case PolicySource::model: {
        Trajectory hist;
        hist.samples = history.matrix();
        hist.frequency = expert.frequency;
        hist.start_step = t - policy.history_len + 1;
        const CoeffMatrix fit =
            fit_history(hist, policy.degree, policy.ridge_weight, win);
        const CoeffMatrix fit_n = policy.normalizer->normalize(fit);
        const double phase = static_cast<double>(t) / expert.steps();
        const VectorXd cond =
            make_conditioning(hist.samples, demo.descriptor, phase);
        const MatrixXd start =
            cfg.prior == PriorMode::history
                ? fit_n.values
                : rng.normal_matrix(policy.degree + 1, expert.dims());
        CoeffMatrix predicted;
        predicted.values = euler_infer(*policy.model, start, cond, cfg.nfe);
        predicted.window = win;
        predicted.normalized = true;
        coeffs = policy.normalizer->denormalize(predicted);
        break;
      }
      case PolicySource::oracle_corrected:
        coeffs = fit_window(expert, win, policy.degree, t,
                            have_prev ? &prev_fit : nullptr);
        prev_fit = coeffs;
        have_prev = true;
        break;
      case PolicySource::oracle_uncorrected:
        coeffs = fit_window(expert, win, policy.degree, t, nullptr,
                            /*apply_kkt=*/false);
        break;
    }
    const auto [pos, vel] = execution_slice(coeffs, k_eval, cfg.control_hz);
    rec.call_ms(c) =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - tic)
            .count();

    if (pos.steps() != full_ticks + 1)
      throw ContractError("slice grid does not match tick schedule");
    if (c > 0) {
      rec.junction_pos_gap(c - 1) =
          (pos.samples.row(0) - last_cmd_q).cwiseAbs().maxCoeff();
      rec.junction_vel_gap(c - 1) =
          (vel.samples.row(0) - last_cmd_v).cwiseAbs().maxCoeff();
    }

    const long steps_this = (c == calls - 1) ? last_steps : cadence;
    const long ticks_this = ticks_for(steps_this);
    rec.slice_starts.push_back(row);

    long next_measure = 1;  // expert step offset whose tick we sample next
    for (long i = 1; i <= ticks_this; ++i) {
      const VectorXd q_cmd = pos.samples.row(i).transpose();
      const VectorXd v_cmd = vel.samples.row(i).transpose();
      const VectorXd torque = controller_torque(state, q_cmd, v_cmd, gains);
      state = plant_step(state, torque, stepper);

      rec.time(row) = state.t;
      rec.q_des.row(row) = q_cmd.transpose();
      rec.q.row(row) = state.q.transpose();
      rec.qdot_des.row(row) = v_cmd.transpose();
      rec.err.row(row) = (q_cmd - state.q).transpose();
      ++row;

      while (next_measure <= steps_this &&
             i == ticks_for(next_measure)) {
        history.push(state.q);
        ++next_measure;
      }
    }
    last_cmd_q = pos.samples.row(ticks_this);
    last_cmd_v = vel.samples.row(ticks_this);
  }
  return rec;
}

RolloutRecord rollout_reference(const Trajectory& expert, long episode_steps,
                                const ControllerGains& gains,
                                const PlantParams& plant, double control_hz,
                                int history_len) {
  expert.validate();
  if (episode_steps < 1) throw ParamError("episode has no steps");
  const long t0 = std::max<long>(history_len - 1, 1);
  if (t0 + episode_steps + 1 > expert.steps() - 1)
    throw InsufficientDataError("expert recording too short for episode");

  const double total = episode_steps / expert.frequency;
  const long ticks =
      std::max<long>(1, std::lround(total * control_hz));
  const double dt = total / ticks;

  RolloutRecord rec;
  rec.dt = dt;
  rec.calls = 1;
  rec.episode_steps = episode_steps;
  rec.slice_starts.push_back(0);
  rec.call_ms = VectorXd::Zero(1);
  rec.time.resize(ticks);
  rec.q_des.resize(ticks, expert.dims());
  rec.q.resize(ticks, expert.dims());
  rec.qdot_des.resize(ticks, expert.dims());
  rec.err.resize(ticks, expert.dims());

  PlantState state;
  state.q = expert.samples.row(t0).transpose();
  state.qdot = VectorXd::Zero(expert.dims());
  PlantParams stepper = plant;
  stepper.dt = dt;

  for (long i = 1; i <= ticks; ++i) {
    const double u = t0 + static_cast<double>(i) * episode_steps / ticks;
    const long lo = static_cast<long>(u);
    const double frac = u - lo;
    const VectorXd q_cmd =
        ((1.0 - frac) * expert.samples.row(lo) +
         frac * expert.samples.row(std::min<long>(lo + 1, expert.steps() - 1)))
            .transpose();
    const VectorXd v_cmd =
        (expert.samples.row(std::min<long>(lo + 1, expert.steps() - 1)) -
         expert.samples.row(lo))
            .transpose() *
        expert.frequency;
    const VectorXd torque = controller_torque(state, q_cmd, v_cmd, gains);
    state = plant_step(state, torque, stepper);
    rec.time(i - 1) = state.t;
    rec.q_des.row(i - 1) = q_cmd.transpose();
    rec.q.row(i - 1) = state.q.transpose();
    rec.qdot_des.row(i - 1) = v_cmd.transpose();
    rec.err.row(i - 1) = (q_cmd - state.q).transpose();
  }
  return rec;
}

RolloutMetrics compute_metrics(const RolloutRecord& record) {
  if (record.err.rows() == 0) throw ContractError("empty rollout record");
  RolloutMetrics m;
  m.mae_per_joint = record.err.cwiseAbs().colwise().mean().transpose();
  m.mae_total = record.err.cwiseAbs().mean();

  const VectorXd summed = record.err.cwiseAbs().rowwise().sum();
  m.peak_error = summed.maxCoeff();
  // Trapezoid over the uniform tick grid.
  m.iae = record.dt *
          (summed.sum() - 0.5 * (summed(0) + summed(summed.size() - 1)));

  m.max_junction_pos_gap = record.junction_pos_gap.size() > 0
                               ? record.junction_pos_gap.maxCoeff()
                               : 0.0;
  m.max_junction_vel_gap = record.junction_vel_gap.size() > 0
                               ? record.junction_vel_gap.maxCoeff()
                               : 0.0;

  for (std::size_t s = 0; s < record.slice_starts.size(); ++s) {
    const long begin = record.slice_starts[s];
    const long end = (s + 1 < record.slice_starts.size())
                         ? record.slice_starts[s + 1]
                         : record.q_des.rows();
    for (long r = begin + 1; r < end; ++r) {
      m.grid_pos_bound = std::max(
          m.grid_pos_bound,
          (record.q_des.row(r) - record.q_des.row(r - 1)).cwiseAbs().maxCoeff());
      m.grid_vel_bound = std::max(
          m.grid_vel_bound, (record.qdot_des.row(r) - record.qdot_des.row(r - 1))
                                .cwiseAbs()
                                .maxCoeff());
    }
  }

  m.calls = record.calls;
  m.mean_call_ms = record.call_ms.size() > 0 ? record.call_ms.mean() : 0.0;
  return m;
}

}  // namespace polyflow
