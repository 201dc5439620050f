#ifndef POLYFLOW_MODEL_HPP
#define POLYFLOW_MODEL_HPP

#include <Eigen/Dense>
#include <vector>

#include "polyflow/errors.hpp"
#include "polyflow/rng.hpp"

namespace polyflow {

/// Input layout of the regressor: [flat(coeffs) | tau embedding | cond].
/// The output dimensionality is coeff_rows * coeff_cols regardless of how
/// many physical steps the decoded window covers.
struct ModelSpec {
  int coeff_rows = 7;
  int coeff_cols = 7;
  int cond_dim = 0;
  std::vector<int> hidden = {256, 256, 256};
  int tau_embed_dim = 8;

  int coeff_dim() const { return coeff_rows * coeff_cols; }
  int input_dim() const { return coeff_dim() + tau_embed_dim + cond_dim; }
  int output_dim() const { return coeff_dim(); }
};

/// Fully-connected tanh network with explicit reverse-mode gradients.
class VelocityFieldModel {
 public:
  /// Scaled-uniform fan-in init for hidden layers; the final layer starts
  /// at zero so the untrained one-step map is the identity transport.
  static VelocityFieldModel init(const ModelSpec& spec, Rng& rng);

  const ModelSpec& spec() const { return spec_; }
  int layer_count() const { return static_cast<int>(weights_.size()); }
  long param_count() const;

  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& theta);

  /// Sinusoidal features of the flow time, dim/2 frequency octaves.
  static Eigen::VectorXd tau_embedding(double tau, int dim);

  /// Row vector [flat(coeffs) | tau embedding | cond] for one sample.
  Eigen::RowVectorXd pack_input(const Eigen::MatrixXd& coeffs, double tau,
                                const Eigen::VectorXd& cond) const;

  /// Activations cached by forward_batch for the matching backward pass.
  struct Workspace {
    std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, one per layer
  };

  /// X: n x input_dim -> n x output_dim.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X,
                                Workspace* ws = nullptr) const;

  /// Predicted velocity coefficients for one sample.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& coeffs, double tau,
                          const Eigen::VectorXd& cond) const;

  /// Parameter gradient for upstream dL/dY; requires the workspace of the
  /// forward pass that produced Y.
  Eigen::VectorXd backward_batch(const Workspace& ws,
                                 const Eigen::MatrixXd& upstream) const;

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  void set_layer(int l, const Eigen::MatrixXd& w, const Eigen::VectorXd& b);

 private:
  explicit VelocityFieldModel(const ModelSpec& spec) : spec_(spec) {}

  ModelSpec spec_;
  std::vector<Eigen::MatrixXd> weights_;  // out x in
  std::vector<Eigen::VectorXd> biases_;
};

/// Bias-corrected adaptive-moment optimizer state.
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  static AdamState zeros(long n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 10.0;
};

/// One adaptive-moment update with global gradient-norm clipping.
void adam_apply(VelocityFieldModel& model, const Eigen::VectorXd& grad,
                AdamState& state, const TrainConfig& cfg);

}  // namespace polyflow

#endif
