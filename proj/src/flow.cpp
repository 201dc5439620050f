#include "polyflow/flow.hpp"

#include <cmath>
#include <string>

namespace polyflow {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_pair(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractError("source/target coefficient shapes differ");
}

/// Kahan-compensated sum; keeps batch reductions order-insensitive.
struct CompensatedSum {
  double total = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = total + y;
    carry = (t - total) - y;
    total = t;
  }
};

Eigen::Map<const VectorXd> flat(const MatrixXd& m) {
  return {m.data(), m.size()};
}

/// Squared-error loss of a batched model evaluation against per-sample flat
/// targets; residual(Y_i) = Y_i - target_i (+ offset_i for the one-step
/// form). Shared by both loss terms.
double batched_mse(const VelocityFieldModel& model, const MatrixXd& X,
                   const MatrixXd& residual_offset, VectorXd* grad,
                   const char* what) {
  const Index n = X.rows();
  VelocityFieldModel::Workspace ws;
  const MatrixXd y = model.forward_batch(X, grad ? &ws : nullptr);
  for (Index i = 0; i < n; ++i)
    if (!y.row(i).allFinite())
      throw DivergenceError(std::string(what) +
                            ": non-finite model output at batch index " +
                            std::to_string(i));
  const MatrixXd r = y + residual_offset;
  CompensatedSum acc;
  for (Index i = 0; i < n; ++i) acc.add(r.row(i).squaredNorm());
  const double loss = acc.total / n;
  if (grad) *grad = model.backward_batch(ws, (2.0 / n) * r);
  return loss;
}

MatrixXd pack_batch(const VelocityFieldModel& model,
                    std::span<const FlowSample> batch, bool at_interpolant) {
  if (batch.empty()) throw ContractError("empty batch");
  MatrixXd X(batch.size(), model.spec().input_dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const FlowSample& s = batch[i];
    check_pair(s.source, s.target);
    if (at_interpolant) {
      if (!(s.tau >= 0.0 && s.tau <= 1.0))
        throw ContractError("flow time outside [0,1]");
      const auto [c_tau, v] = interpolate(s.source, s.target, s.tau);
      X.row(i) = model.pack_input(c_tau, s.tau, s.cond);
    } else {
      X.row(i) = model.pack_input(s.source, 0.0, s.cond);
    }
  }
  return X;
}

}  // namespace

std::pair<MatrixXd, MatrixXd> interpolate(const MatrixXd& source,
                                          const MatrixXd& target, double tau) {
  check_pair(source, target);
  if (!(tau >= 0.0 && tau <= 1.0))
    throw ContractError("flow time outside [0,1]");
  return {(1.0 - tau) * source + tau * target, target - source};
}

MatrixXd inject_history_noise(const MatrixXd& source, double std, Rng& rng) {
  if (std < 0.0) throw ParamError("noise std must be >= 0");
  if (std == 0.0) return source;
  return source + rng.normal_matrix(source.rows(), source.cols(), std);
}

double fm_loss(const VelocityFieldModel& model,
               std::span<const FlowSample> batch, VectorXd* grad) {
  const MatrixXd X = pack_batch(model, batch, /*at_interpolant=*/true);
  MatrixXd offset(batch.size(), model.spec().output_dim());
  for (std::size_t i = 0; i < batch.size(); ++i)
    offset.row(i) = -(flat(batch[i].target) - flat(batch[i].source));
  return batched_mse(model, X, offset, grad, "flow matching");
}

double consistency_loss(const VelocityFieldModel& model,
                        std::span<const FlowSample> batch, VectorXd* grad) {
  const MatrixXd X = pack_batch(model, batch, /*at_interpolant=*/false);
  MatrixXd offset(batch.size(), model.spec().output_dim());
  for (std::size_t i = 0; i < batch.size(); ++i)
    offset.row(i) = flat(batch[i].source) - flat(batch[i].target);
  return batched_mse(model, X, offset, grad, "consistency");
}

LossRecord total_loss(const VelocityFieldModel& model,
                      std::span<const FlowSample> batch,
                      double consistency_weight, VectorXd* grad) {
  if (consistency_weight < 0.0)
    throw ParamError("consistency weight must be >= 0");
  LossRecord rec;
  if (grad) {
    VectorXd g_fm, g_cons;
    rec.fm = fm_loss(model, batch, &g_fm);
    if (consistency_weight > 0.0) {
      rec.cons = consistency_loss(model, batch, &g_cons);
      *grad = g_fm + consistency_weight * g_cons;
    } else {
      rec.cons = consistency_loss(model, batch, nullptr);
      *grad = std::move(g_fm);
    }
  } else {
    rec.fm = fm_loss(model, batch, nullptr);
    rec.cons = consistency_loss(model, batch, nullptr);
  }
  rec.total = rec.fm + consistency_weight * rec.cons;
  return rec;
}

MatrixXd euler_infer(const VelocityFieldModel& model, const MatrixXd& start,
                     const VectorXd& cond, int nfe) {
  if (nfe < 1) throw ParamError("nfe must be >= 1");
  MatrixXd c = start;
  const double dt = 1.0 / nfe;
  for (int i = 0; i < nfe; ++i) {
    const double tau = static_cast<double>(i) / nfe;
    c += dt * model.forward(c, tau, cond);
    if (!c.allFinite())
      throw DivergenceError("non-finite state at integration step " +
                            std::to_string(i));
  }
  return c;
}

LossRecord train_step(VelocityFieldModel& model,
                      std::span<const FlowSample> batch, AdamState& state,
                      const TrainConfig& cfg, double consistency_weight) {
  VectorXd grad;
  const LossRecord rec = total_loss(model, batch, consistency_weight, &grad);
  if (!std::isfinite(rec.total))
    throw DivergenceError("non-finite training loss");
  adam_apply(model, grad, state, cfg);
  return rec;
}

}  // namespace polyflow
