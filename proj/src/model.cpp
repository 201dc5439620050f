#include "polyflow/model.hpp"

#include <cmath>

namespace polyflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

VelocityFieldModel VelocityFieldModel::init(const ModelSpec& spec, Rng& rng) {
  if (spec.coeff_rows < 1 || spec.coeff_cols < 1)
    throw ContractError("coefficient shape must be positive");
  if (spec.tau_embed_dim < 2 || spec.tau_embed_dim % 2 != 0)
    throw ContractError("tau embedding dim must be even and >= 2");
  VelocityFieldModel model(spec);
  int in = spec.input_dim();
  for (int width : spec.hidden) {
    const double bound = std::sqrt(3.0 / in);
    MatrixXd w(width, in);
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
    model.weights_.push_back(std::move(w));
    model.biases_.push_back(VectorXd::Zero(width));
    in = width;
  }
  model.weights_.push_back(MatrixXd::Zero(spec.output_dim(), in));
  model.biases_.push_back(VectorXd::Zero(spec.output_dim()));
  return model;
}

long VelocityFieldModel::param_count() const {
  long n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += weights_[l].size() + biases_[l].size();
  return n;
}

VectorXd VelocityFieldModel::params() const {
  VectorXd theta(param_count());
  Index at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    theta.segment(at, weights_[l].size()) =
        Eigen::Map<const VectorXd>(weights_[l].data(), weights_[l].size());
    at += weights_[l].size();
    theta.segment(at, biases_[l].size()) = biases_[l];
    at += biases_[l].size();
  }
  return theta;
}

void VelocityFieldModel::set_params(const VectorXd& theta) {
  if (theta.size() != param_count())
    throw ContractError("parameter vector length mismatch");
  Index at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<VectorXd>(weights_[l].data(), weights_[l].size()) =
        theta.segment(at, weights_[l].size());
    at += weights_[l].size();
    biases_[l] = theta.segment(at, biases_[l].size());
    at += biases_[l].size();
  }
}

VectorXd VelocityFieldModel::tau_embedding(double tau, int dim) {
  VectorXd e(dim);
  double freq = M_PI;
  for (int j = 0; j < dim / 2; ++j) {
    e(2 * j) = std::sin(freq * tau);
    e(2 * j + 1) = std::cos(freq * tau);
    freq *= 2.0;
  }
  return e;
}

RowVectorXd VelocityFieldModel::pack_input(const MatrixXd& coeffs, double tau,
                                           const VectorXd& cond) const {
  if (coeffs.rows() != spec_.coeff_rows || coeffs.cols() != spec_.coeff_cols)
    throw ContractError("coefficient shape does not match model layout");
  if (cond.size() != spec_.cond_dim)
    throw ContractError("conditioning length does not match model layout");
  RowVectorXd x(spec_.input_dim());
  x.segment(0, spec_.coeff_dim()) =
      Eigen::Map<const VectorXd>(coeffs.data(), coeffs.size());
  x.segment(spec_.coeff_dim(), spec_.tau_embed_dim) =
      tau_embedding(tau, spec_.tau_embed_dim);
  x.segment(spec_.coeff_dim() + spec_.tau_embed_dim, spec_.cond_dim) = cond;
  return x;
}

MatrixXd VelocityFieldModel::forward_batch(const MatrixXd& X,
                                           Workspace* ws) const {
  if (X.cols() != spec_.input_dim())
    throw ContractError("input width does not match model layout");
  if (ws) {
    ws->acts.clear();
    ws->acts.push_back(X);
  }
  MatrixXd h = X;
  const int last = layer_count() - 1;
  for (int l = 0; l < last; ++l) {
    h = ((h * weights_[l].transpose()).rowwise() + biases_[l].transpose())
            .array()
            .tanh();
    if (ws) ws->acts.push_back(h);
  }
  return (h * weights_[last].transpose()).rowwise() +
         biases_[last].transpose();
}

MatrixXd VelocityFieldModel::forward(const MatrixXd& coeffs, double tau,
                                     const VectorXd& cond) const {
  const RowVectorXd y = forward_batch(pack_input(coeffs, tau, cond));
  return Eigen::Map<const MatrixXd>(y.data(), spec_.coeff_rows,
                                    spec_.coeff_cols);
}

VectorXd VelocityFieldModel::backward_batch(const Workspace& ws,
                                            const MatrixXd& upstream) const {
  const int layers = layer_count();
  if (static_cast<int>(ws.acts.size()) != layers)
    throw ContractError("workspace does not match a forward pass");

  std::vector<MatrixXd> dw(layers);
  std::vector<VectorXd> db(layers);
  MatrixXd g = upstream;  // dL/d(pre-activation output of current layer)
  for (int l = layers - 1; l >= 0; --l) {
    dw[l] = g.transpose() * ws.acts[l];
    db[l] = g.colwise().sum().transpose();
    if (l > 0) {
      // tanh' = 1 - h^2 with h the cached activation of the layer below.
      g = (g * weights_[l]).cwiseProduct(
          (1.0 - ws.acts[l].array().square()).matrix());
    }
  }

  VectorXd grad(param_count());
  Index at = 0;
  for (int l = 0; l < layers; ++l) {
    grad.segment(at, dw[l].size()) =
        Eigen::Map<const VectorXd>(dw[l].data(), dw[l].size());
    at += dw[l].size();
    grad.segment(at, db[l].size()) = db[l];
    at += db[l].size();
  }
  return grad;
}

void VelocityFieldModel::set_layer(int l, const MatrixXd& w,
                                   const VectorXd& b) {
  if (l < 0 || l >= layer_count()) throw ContractError("layer index");
  if (w.rows() != weights_[l].rows() || w.cols() != weights_[l].cols() ||
      b.size() != biases_[l].size())
    throw ContractError("layer shape mismatch");
  weights_[l] = w;
  biases_[l] = b;
}

void adam_apply(VelocityFieldModel& model, const VectorXd& grad,
                AdamState& state, const TrainConfig& cfg) {
  if (grad.size() != model.param_count())
    throw ContractError("gradient length mismatch");
  if (!grad.allFinite()) throw DivergenceError("non-finite gradient");

  VectorXd g = grad;
  const double norm = g.norm();
  if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm)
    g *= cfg.clip_norm / norm;

  state.step += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const double mc = 1.0 - std::pow(cfg.beta1, state.step);
  const double vc = 1.0 - std::pow(cfg.beta2, state.step);

  VectorXd theta = model.params();
  theta.array() -= cfg.learning_rate * (state.m.array() / mc) /
                   ((state.v.array() / vc).sqrt() + cfg.epsilon);
  if (!theta.allFinite())
    throw DivergenceError("non-finite parameters after update");
  model.set_params(theta);
}

}  // namespace polyflow
