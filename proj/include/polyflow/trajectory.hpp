#ifndef POLYFLOW_TRAJECTORY_HPP
#define POLYFLOW_TRAJECTORY_HPP

#include <Eigen/Dense>

#include "polyflow/errors.hpp"

namespace polyflow {

/// Dense time-indexed action matrix: one row per step, one column per joint.
struct Trajectory {
  Eigen::MatrixXd samples;  // steps x dims
  double frequency = 0.0;   // Hz
  long start_step = 0;      // absolute index of row 0

  long steps() const { return samples.rows(); }
  int dims() const { return static_cast<int>(samples.cols()); }
  double span_seconds() const {
    return static_cast<double>(steps() - 1) / frequency;
  }

  void validate() const {
    if (steps() < 1) throw ContractError("trajectory needs at least 1 sample");
    if (!(frequency > 0.0)) throw ContractError("frequency must be positive");
    if (!samples.allFinite()) throw ContractError("non-finite samples");
  }
};

}  // namespace polyflow

#endif
