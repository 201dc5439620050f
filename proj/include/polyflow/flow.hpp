#ifndef POLYFLOW_FLOW_HPP
#define POLYFLOW_FLOW_HPP

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "polyflow/model.hpp"
#include "polyflow/rng.hpp"

namespace polyflow {

enum class PriorMode { history, gaussian };

/// One training tuple in normalized coefficient space. `source` is the
/// (noised) prior fit and `target` the corrected future fit; both share
/// shape (degree+1) x dims.
struct FlowSample {
  Eigen::MatrixXd source;
  Eigen::MatrixXd target;
  double tau = 0.0;
  Eigen::VectorXd cond;
};

struct FlowConfig {
  double history_noise_std = 0.5;
  double consistency_weight = 1.0;
  int nfe = 1;
  PriorMode prior = PriorMode::history;

  void validate() const {
    if (history_noise_std < 0.0) throw ParamError("noise std must be >= 0");
    if (consistency_weight < 0.0)
      throw ParamError("consistency weight must be >= 0");
    if (nfe < 1) throw ParamError("nfe must be >= 1");
  }
};

/// Straight-line interpolant and its constant transport velocity.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> interpolate(
    const Eigen::MatrixXd& source, const Eigen::MatrixXd& target, double tau);

/// source + eps, eps ~ N(0, std^2 I) elementwise. Training-time only;
/// inference always starts from the clean fit.
Eigen::MatrixXd inject_history_noise(const Eigen::MatrixXd& source, double std,
                                     Rng& rng);

struct LossRecord {
  double fm = 0.0;
  double cons = 0.0;
  double total = 0.0;
};

/// Mean squared error of the field against the constant transport velocity
/// along the interpolant. Fills `grad` with parameter gradients when given.
double fm_loss(const VelocityFieldModel& model,
               std::span<const FlowSample> batch,
               Eigen::VectorXd* grad = nullptr);

/// Mean squared one-step transport error at tau = 0.
double consistency_loss(const VelocityFieldModel& model,
                        std::span<const FlowSample> batch,
                        Eigen::VectorXd* grad = nullptr);

/// fm + weight * cons; weight 0 degenerates to pure flow matching.
LossRecord total_loss(const VelocityFieldModel& model,
                      std::span<const FlowSample> batch,
                      double consistency_weight,
                      Eigen::VectorXd* grad = nullptr);

/// nfe uniform Euler steps from tau=0 to 1; nfe=1 is the single-step map
/// start + f(start, 0, cond).
Eigen::MatrixXd euler_infer(const VelocityFieldModel& model,
                            const Eigen::MatrixXd& start,
                            const Eigen::VectorXd& cond, int nfe);

/// One optimizer update on the batch; throws DivergenceError on a
/// non-finite loss without touching the parameters.
LossRecord train_step(VelocityFieldModel& model,
                      std::span<const FlowSample> batch, AdamState& state,
                      const TrainConfig& cfg, double consistency_weight);

}  // namespace polyflow

#endif
