#include "polyflow/codec.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace polyflow {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kMaxCondition = 1e12;

/// Condition estimate of a symmetric PSD matrix from its eigenvalues.
double sym_condition(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

Index expert_row(const Trajectory& expert, long step) {
  const long row = step - expert.start_step;
  if (row < 0 || row >= expert.steps())
    throw InsufficientDataError("expert step " + std::to_string(step) +
                                " outside recording");
  return static_cast<Index>(row);
}

/// Central finite difference of the expert at an absolute step, order 1 or 2,
/// in physical units (per second, per second^2).
VectorXd expert_fd(const Trajectory& expert, long step, int order) {
  const Index i = expert_row(expert, step);
  if (i < 1 || i + 1 >= expert.steps())
    throw InsufficientDataError("finite difference needs interior step");
  const double hz = expert.frequency;
  if (order == 1)
    return (expert.samples.row(i + 1) - expert.samples.row(i - 1)).transpose() *
           (0.5 * hz);
  if (order == 2)
    return (expert.samples.row(i + 1) - 2.0 * expert.samples.row(i) +
            expert.samples.row(i - 1))
               .transpose() *
           (hz * hz);
  throw ContractError("expert finite differences support order 1 and 2 only");
}

}  // namespace

long window_first_step(const FitWindowConfig& cfg, long t) {
  return t + 1 - static_cast<long>(cfg.stride) *
                     (cfg.fit_padding + cfg.overlap_pre);
}

Trajectory extract_sparse_nodes(const Trajectory& expert,
                                const FitWindowConfig& cfg, long t) {
  expert.validate();
  const int h = cfg.horizon();
  const long first = window_first_step(cfg, t);
  const long last = first + static_cast<long>(cfg.stride) * (h - 1);
  if (first < expert.start_step ||
      last > expert.start_step + expert.steps() - 1)
    throw InsufficientDataError(
        "fitting window [" + std::to_string(first) + ", " +
        std::to_string(last) + "] exceeds recording bounds");

  Trajectory nodes;
  nodes.samples.resize(h, expert.dims());
  for (int i = 0; i < h; ++i)
    nodes.samples.row(i) =
        expert.samples.row(expert_row(expert, first + cfg.stride * i));
  nodes.frequency = expert.frequency / cfg.stride;
  nodes.start_step = first;
  return nodes;
}

CoeffMatrix ols_fit(const Trajectory& nodes, const BasisMatrix& S,
                    const FitWindowConfig& cfg) {
  if (S.rows() != nodes.steps())
    throw ContractError("basis rows must match node count");
  if (S.rows() < S.degree + 1)
    throw UnderdeterminedError("fewer nodes than coefficients");
  const MatrixXd gram = S.values.transpose() * S.values;
  const double cond = sym_condition(gram);
  if (!(cond < kMaxCondition))
    throw SingularFitError("rank-deficient normal equations", cond);
  Eigen::LDLT<MatrixXd> ldlt(gram);
  CoeffMatrix out;
  out.values = ldlt.solve(S.values.transpose() * nodes.samples);
  out.window = cfg;
  return out;
}

AnchorConstraints build_anchor_constraints(const Trajectory& expert,
                                           const FitWindowConfig& cfg,
                                           int degree, long t,
                                           const CoeffMatrix* prev) {
  const int r = cfg.continuity_order;
  if (2 * (r + 1) > degree + 1)
    throw InfeasibleConstraintError("continuity order " + std::to_string(r) +
                                    " infeasible for degree " +
                                    std::to_string(degree));
  if (r > 2 && prev == nullptr)
    throw ContractError("expert differences provide orders <= 2 only");
  if (!cfg.anchors_in_window())
    throw ParamError("anchors fall outside the fitting window");

  AnchorConstraints ac;
  ac.s_front = cfg.s_front();
  ac.s_rear = cfg.s_rear();

  const long front_step = t + 1;
  const long rear_step = t + 1 + cfg.exec_expert_steps();
  const double span = cfg.node_span_seconds();

  const MatrixXd rows_front = eval_basis_derivatives(ac.s_front, degree, r);
  const MatrixXd rows_rear = eval_basis_derivatives(ac.s_rear, degree, r);

  ac.A.resize(2 * (r + 1), degree + 1);
  ac.b.resize(2 * (r + 1), expert.dims());
  for (int m = 0; m <= r; ++m) {
    ac.A.row(m) = rows_front.row(m);
    ac.A.row(r + 1 + m) = rows_rear.row(m);
    if (m == 0) {
      ac.b.row(0) = expert.samples.row(expert_row(expert, front_step));
      ac.b.row(r + 1) = expert.samples.row(expert_row(expert, rear_step));
      continue;
    }
    // Derivative targets on the normalized axis: physical targets pick up a
    // factor span^m. Chaining to the previous corrected segment keeps the
    // junction exact because both windows share the same span.
    if (prev != nullptr) {
      const MatrixXd prev_rows =
          eval_basis_derivatives(prev->window.s_rear(), prev->degree(), r);
      ac.b.row(m) = prev_rows.row(m) * prev->values;
    } else {
      ac.b.row(m) =
          expert_fd(expert, front_step, m).transpose() * std::pow(span, m);
    }
    ac.b.row(r + 1 + m) =
        expert_fd(expert, rear_step, m).transpose() * std::pow(span, m);
  }

  Eigen::ColPivHouseholderQR<MatrixXd> qr(ac.A.transpose());
  if (qr.rank() < ac.A.rows())
    throw DegenerateAnchorError("anchor constraint rows are rank deficient");
  return ac;
}

CoeffMatrix kkt_correct(const CoeffMatrix& fit, const BasisMatrix& S,
                        const AnchorConstraints& ac) {
  if (ac.A.cols() != fit.values.rows())
    throw ContractError("constraint width must match coefficient rows");
  if (ac.b.cols() != fit.values.cols())
    throw ContractError("constraint targets must match action dims");
  if (fit.normalized)
    throw ContractError("KKT correction operates on raw coefficients");

  const MatrixXd gram = S.values.transpose() * S.values;
  const double cond = sym_condition(gram);
  if (!(cond < kMaxCondition))
    throw SingularFitError("rank-deficient normal equations", cond);
  Eigen::LDLT<MatrixXd> ldlt(gram);

  const MatrixXd w = ldlt.solve(ac.A.transpose());  // (K+1) x m
  const MatrixXd g = ac.A * w;                      // m x m
  const double gcond = sym_condition(g);
  if (!(gcond < kMaxCondition))
    throw DegenerateAnchorError("anchors coincide or duplicate");
  const MatrixXd residual = ac.A * fit.values - ac.b;

  CoeffMatrix out = fit;
  out.values = fit.values - w * Eigen::LDLT<MatrixXd>(g).solve(residual);
  return out;
}

CoeffMatrix fit_history(const Trajectory& history, int degree,
                        double ridge_weight, const FitWindowConfig& window) {
  history.validate();
  if (history.steps() < 2)
    throw InsufficientDataError("history fit needs at least 2 samples");
  if (!(ridge_weight > 0.0))
    throw ParamError("ridge weight must be strictly positive");

  const BasisMatrix S = basis_matrix(unit_grid(history.steps()), degree);
  MatrixXd gram = S.values.transpose() * S.values;
  gram.diagonal().array() += ridge_weight;
  CoeffMatrix out;
  out.values =
      Eigen::LDLT<MatrixXd>(gram).solve(S.values.transpose() * history.samples);
  out.window = window;
  return out;
}

CoeffMatrix fit_window(const Trajectory& expert, const FitWindowConfig& cfg,
                       int degree, long t, const CoeffMatrix* prev,
                       bool apply_kkt) {
  cfg.validate(degree);
  const Trajectory nodes = extract_sparse_nodes(expert, cfg, t);
  const BasisMatrix S =
      basis_matrix(unit_grid(cfg.horizon()), degree, /*for_fitting=*/true);
  CoeffMatrix fit = ols_fit(nodes, S, cfg);
  if (!apply_kkt) return fit;
  const AnchorConstraints ac =
      build_anchor_constraints(expert, cfg, degree, t, prev);
  return kkt_correct(fit, S, ac);
}

std::vector<CoeffMatrix> fit_chain(const Trajectory& expert,
                                   const FitWindowConfig& cfg, int degree,
                                   long t0, int n_segments) {
  std::vector<CoeffMatrix> chain;
  chain.reserve(n_segments);
  const CoeffMatrix* prev = nullptr;
  for (int i = 0; i < n_segments; ++i) {
    const long t = t0 + static_cast<long>(i) * cfg.exec_expert_steps();
    chain.push_back(fit_window(expert, cfg, degree, t, prev));
    prev = &chain.back();
  }
  return chain;
}

CoeffMatrix ScaleNormalizer::normalize(const CoeffMatrix& c) const {
  if (scales.size() != c.values.rows())
    throw ContractError("normalizer rows must match coefficient rows");
  if (c.normalized) throw ContractError("coefficients already normalized");
  CoeffMatrix out = c;
  out.values.array().colwise() /= scales.array();
  out.normalized = true;
  return out;
}

CoeffMatrix ScaleNormalizer::denormalize(const CoeffMatrix& c) const {
  if (scales.size() != c.values.rows())
    throw ContractError("normalizer rows must match coefficient rows");
  if (!c.normalized) throw ContractError("coefficients are not normalized");
  CoeffMatrix out = c;
  out.values.array().colwise() *= scales.array();
  out.normalized = false;
  return out;
}

ScaleNormalizer fit_normalizer(const std::vector<CoeffMatrix>& corpus) {
  if (corpus.empty()) throw ContractError("empty normalizer corpus");
  const Index rows = corpus.front().values.rows();
  ScaleNormalizer out;
  out.scales.resize(rows);
  for (Index j = 0; j < rows; ++j) {
    double sum = 0.0;
    long n = 0;
    for (const CoeffMatrix& c : corpus) {
      if (c.values.rows() != rows)
        throw ContractError("corpus coefficient shapes differ");
      sum += c.values.row(j).sum();
      n += c.values.cols();
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const CoeffMatrix& c : corpus)
      ss += (c.values.row(j).array() - mean).square().sum();
    out.scales(j) = std::max(std::sqrt(ss / n), 1e-6);
  }
  return out;
}

std::pair<Trajectory, Trajectory> decode(const CoeffMatrix& c,
                                         const Eigen::VectorXd& s_grid,
                                         double span_seconds) {
  if (c.normalized)
    throw ContractError("denormalize coefficients before decoding");
  if (!(span_seconds > 0.0)) throw ParamError("span must be positive");
  if (s_grid.size() == 0) throw ContractError("empty decode grid");
  if (!c.values.allFinite()) throw ContractError("non-finite coefficients");

  const Index n = s_grid.size();
  const int degree = c.degree();
  MatrixXd basis(n, degree + 1), dbasis(n, degree + 1);
  for (Index i = 0; i < n; ++i) {
    const MatrixXd rows = eval_basis_derivatives(s_grid(i), degree, 1);
    basis.row(i) = rows.row(0);
    dbasis.row(i) = rows.row(1);
  }

  Trajectory pos, vel;
  pos.samples = basis * c.values;
  vel.samples = (dbasis * c.values) / span_seconds;
  const double spread = s_grid(n - 1) - s_grid(0);
  const double freq =
      (n >= 2 && spread > 0.0) ? (n - 1) / (spread * span_seconds)
                               : 1.0 / span_seconds;
  pos.frequency = vel.frequency = freq;
  return {pos, vel};
}

std::pair<Trajectory, Trajectory> execution_slice(const CoeffMatrix& c,
                                                  double k_eval,
                                                  double control_hz) {
  if (!(k_eval > 0.0)) throw ParamError("evaluation stride must be positive");
  if (!(control_hz > 0.0)) throw ParamError("controller rate must be positive");
  const FitWindowConfig& cfg = c.window;
  if (!cfg.anchors_in_window())
    throw ParamError("window has no execution subinterval to slice");

  const double span = cfg.span_seconds(k_eval);
  const double duration = (cfg.s_rear() - cfg.s_front()) * span;
  const Index n =
      std::max<Index>(2, static_cast<Index>(std::lround(duration * control_hz)) + 1);
  const VectorXd grid = VectorXd::LinSpaced(n, cfg.s_front(), cfg.s_rear());
  return decode(c, grid, span);
}

}  // namespace polyflow
