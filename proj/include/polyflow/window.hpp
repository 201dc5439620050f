#ifndef POLYFLOW_WINDOW_HPP
#define POLYFLOW_WINDOW_HPP

#include "polyflow/errors.hpp"

namespace polyflow {

/// Two-tier fitting window geometry. One polynomial is regressed over
///
///   [ padding | overlap_pre | exec_steps | overlap_post | padding ]
///
/// node steps, each node `stride` expert steps apart. Only the exec_steps
/// interior is executed; the overlaps are supervised and discarded, the
/// padding only stabilizes the regression near the anchors. Anchors sit at
/// the exec boundaries, i.e. node indices padding+overlap_pre and
/// padding+overlap_pre+exec_steps.
struct FitWindowConfig {
  int exec_steps = 8;        // executed node steps per inference
  int overlap_pre = 2;       // supervised overlap before the exec interval
  int overlap_post = 2;      // supervised overlap after it
  int fit_padding = 1;       // regression-only steps appended on both sides
  int stride = 4;            // expert steps between consecutive nodes
  double expert_hz = 50.0;   // sampling frequency of the expert recording
  int continuity_order = 1;  // junction continuity: 0 position, 1 velocity...

  /// Total node count of the regression window.
  int horizon() const {
    return 2 * fit_padding + overlap_pre + exec_steps + overlap_post;
  }

  /// Expert steps notionally covered by one window at evaluation stride k.
  long coverage_steps(double k_eval) const {
    return static_cast<long>(k_eval * horizon());
  }

  /// Physical playback span of the full window at evaluation stride k_eval.
  double span_seconds(double k_eval) const {
    return k_eval * horizon() / expert_hz;
  }

  /// Span of the node grid itself: horizon()-1 inter-node gaps of `stride`
  /// expert steps each. This is the time axis the regression nodes live on;
  /// expert derivatives map onto the normalized axis through it.
  double node_span_seconds() const {
    return static_cast<double>(stride) * (horizon() - 1) / expert_hz;
  }

  double s_front() const {
    return static_cast<double>(fit_padding + overlap_pre) / (horizon() - 1);
  }
  double s_rear() const {
    return static_cast<double>(fit_padding + overlap_pre + exec_steps) /
           (horizon() - 1);
  }

  /// Expert steps consumed per inference when executing at training stride.
  long exec_expert_steps() const {
    return static_cast<long>(stride) * exec_steps;
  }

  void validate(int degree) const {
    if (exec_steps < 1) throw ParamError("exec_steps must be >= 1");
    if (overlap_pre < 0 || overlap_post < 0 || fit_padding < 0)
      throw ParamError("overlap and padding must be >= 0");
    if (stride < 1) throw ParamError("stride must be >= 1");
    if (!(expert_hz > 0.0)) throw ParamError("expert_hz must be positive");
    if (continuity_order < 0) throw ParamError("continuity order must be >= 0");
    if (horizon() < degree + 2)
      throw ParamError("window horizon must be at least degree+2");
    if (2 * (continuity_order + 1) > degree + 1)
      throw InfeasibleConstraintError(
          "anchor constraints exceed basis dimension");
  }

  /// True when both anchors lie on the node grid; required for KKT
  /// correction but not for plain (uncorrected) chunk fitting.
  bool anchors_in_window() const { return fit_padding + overlap_post >= 1; }
};

}  // namespace polyflow

#endif
