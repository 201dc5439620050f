#ifndef POLYFLOW_CODEC_HPP
#define POLYFLOW_CODEC_HPP

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "polyflow/basis.hpp"
#include "polyflow/trajectory.hpp"
#include "polyflow/window.hpp"

namespace polyflow {

/// Legendre coefficients of one trajectory segment: row j holds the
/// coefficient vector of basis order j, one column per action dimension.
struct CoeffMatrix {
  Eigen::MatrixXd values;  // (degree+1) x dims
  FitWindowConfig window;
  bool normalized = false;

  int degree() const { return static_cast<int>(values.rows()) - 1; }
  int dims() const { return static_cast<int>(values.cols()); }
};

/// Equality constraints A C = b pinning segment kinematics at the two
/// anchor nodes; rows stack position then derivative rows per anchor.
struct AnchorConstraints {
  Eigen::MatrixXd A;  // 2(r+1) x (degree+1)
  Eigen::MatrixXd b;  // 2(r+1) x dims
  double s_front = 0.0;
  double s_rear = 1.0;
};

/// Sparse fitting nodes: horizon() expert samples taken every `stride`
/// steps so that node index padding+overlap_pre lands on expert step t+1.
/// The returned node trajectory runs at expert_hz/stride.
Trajectory extract_sparse_nodes(const Trajectory& expert,
                                const FitWindowConfig& cfg, long t);

/// First expert step of the fitting window anchored at t.
long window_first_step(const FitWindowConfig& cfg, long t);

/// Ordinary least squares through an LDLT factorization of the Gram matrix;
/// raises SingularFitError (with the condition estimate) past 1e12.
CoeffMatrix ols_fit(const Trajectory& nodes, const BasisMatrix& S,
                    const FitWindowConfig& cfg);

/// Anchor rows at the execution boundaries. Position targets come from the
/// expert; derivative targets come from the previous corrected segment's
/// analytic derivative when `prev` is given (exact junction continuity),
/// else from central differences of the expert. Derivative targets of
/// order m are scaled by T^m to live on the normalized axis.
AnchorConstraints build_anchor_constraints(const Trajectory& expert,
                                           const FitWindowConfig& cfg,
                                           int degree, long t,
                                           const CoeffMatrix* prev = nullptr);

/// Closed-form projection of an unconstrained fit onto the constraint
/// manifold {C : A C = b}, optimal in the ||S C - Q|| metric.
CoeffMatrix kkt_correct(const CoeffMatrix& fit, const BasisMatrix& S,
                        const AnchorConstraints& ac);

/// Ridge fit of a short action history on its own uniform [0,1] grid.
/// The Tikhonov term keeps coefficients bounded on near-degenerate grids.
CoeffMatrix fit_history(const Trajectory& history, int degree,
                        double ridge_weight, const FitWindowConfig& window);

/// extract -> OLS -> anchors -> KKT in one call. apply_kkt=false stops after
/// the plain fit (the uncorrected ablation).
CoeffMatrix fit_window(const Trajectory& expert, const FitWindowConfig& cfg,
                       int degree, long t, const CoeffMatrix* prev = nullptr,
                       bool apply_kkt = true);

/// Corrected fits for n consecutive segments, each chained to the previous
/// one through shared junction anchors. Segment i is anchored at
/// t0 + i * stride * exec_steps.
std::vector<CoeffMatrix> fit_chain(const Trajectory& expert,
                                   const FitWindowConfig& cfg, int degree,
                                   long t0, int n_segments);

/// Per-order scales frozen over a training corpus; rows of near-zero
/// variance are floored so normalization stays invertible.
struct ScaleNormalizer {
  Eigen::VectorXd scales;  // degree+1, all > 0

  CoeffMatrix normalize(const CoeffMatrix& c) const;
  CoeffMatrix denormalize(const CoeffMatrix& c) const;
};

ScaleNormalizer fit_normalizer(const std::vector<CoeffMatrix>& corpus);

/// Positions and analytic velocities on an s-grid. `span_seconds` is the
/// physical playback time of the whole [0,1] axis; velocities carry 1/span.
std::pair<Trajectory, Trajectory> decode(const CoeffMatrix& c,
                                         const Eigen::VectorXd& s_grid,
                                         double span_seconds);

/// Decode only the execution subinterval [s_front, s_rear] on a dense grid
/// at the controller rate. The playback span scales with k_eval, so
/// positions at matched s are unchanged while velocities scale by
/// stride/k_eval relative to training pace.
std::pair<Trajectory, Trajectory> execution_slice(const CoeffMatrix& c,
                                                  double k_eval,
                                                  double control_hz);

}  // namespace polyflow

#endif
