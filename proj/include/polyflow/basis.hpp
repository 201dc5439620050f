#ifndef POLYFLOW_BASIS_HPP
#define POLYFLOW_BASIS_HPP

#include <Eigen/Dense>

#include "polyflow/errors.hpp"

namespace polyflow {

/// Shifted Legendre basis on s in [0,1]: Phi_j(s) = P_j(2s-1), generated by
/// the Bonnet recurrence (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}.
///
/// Evaluation is strictly confined to [0,1]; Legendre polynomials grow
/// without bound off the interval, so out-of-range s raises DomainError
/// instead of extrapolating.

namespace detail {

template <typename Scalar>
void check_unit_interval(Scalar s) {
  if (!(s >= Scalar(0) && s <= Scalar(1)))
    throw DomainError("normalized time outside [0,1]");
}

inline void check_degree(int degree) {
  if (degree < 1) throw ContractError("basis degree must be >= 1");
  if (degree > 16) throw ContractError("basis degree above 16 unsupported");
}

}  // namespace detail

/// [P_0(x), ..., P_K(x)] at x = 2s-1.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> eval_basis(Scalar s, int degree) {
  detail::check_unit_interval(s);
  detail::check_degree(degree);
  const Scalar x = Scalar(2) * s - Scalar(1);
  Eigen::Vector<Scalar, Eigen::Dynamic> p(degree + 1);
  p(0) = Scalar(1);
  p(1) = x;
  for (int n = 1; n < degree; ++n)
    p(n + 1) = (Scalar(2 * n + 1) * x * p(n) - Scalar(n) * p(n - 1)) /
               Scalar(n + 1);
  return p;
}

/// Values and derivatives d^m Phi_j / ds^m for m = 0..order, one row per m.
/// Derivatives follow from differentiating the Bonnet recurrence m times:
/// (n+1) P^(m)_{n+1} = (2n+1) (m P^(m-1)_n + x P^(m)_n) - n P^(m-1)_{n-1},
/// then scaled by (ds -> dx) = 2 per order.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> eval_basis_derivatives(
    Scalar s, int degree, int order) {
  detail::check_unit_interval(s);
  detail::check_degree(degree);
  if (order < 0) throw ContractError("derivative order must be >= 0");
  const Scalar x = Scalar(2) * s - Scalar(1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(order + 1,
                                                                  degree + 1);
  d(0, 0) = Scalar(1);
  d(0, 1) = x;
  if (order >= 1) d(1, 1) = Scalar(1);
  for (int n = 1; n < degree; ++n) {
    d(0, n + 1) = (Scalar(2 * n + 1) * x * d(0, n) - Scalar(n) * d(0, n - 1)) /
                  Scalar(n + 1);
    for (int m = 1; m <= order; ++m)
      d(m, n + 1) =
          (Scalar(2 * n + 1) * (Scalar(m) * d(m - 1, n) + x * d(m, n)) -
           Scalar(n) * d(m, n - 1)) /
          Scalar(n + 1);
  }
  Scalar scale(1);
  for (int m = 1; m <= order; ++m) {
    scale *= Scalar(2);
    d.row(m) *= scale;
  }
  return d;
}

/// dPhi_j/ds at s; equals 2 dP_j/dx at x = 2s-1.
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> eval_basis_derivative(Scalar s,
                                                            int degree) {
  return eval_basis_derivatives(s, degree, 1).row(1).transpose();
}

/// Stacked basis rows Phi_j(s_i) over a node grid, plus the grid itself.
struct BasisMatrix {
  Eigen::MatrixXd values;  // rows x (degree+1)
  Eigen::VectorXd nodes;   // strictly increasing, in [0,1]
  int degree = 0;

  Eigen::Index rows() const { return values.rows(); }
};

/// Nodes must be strictly increasing within [0,1]. When the matrix is meant
/// for fitting, fewer than degree+1 nodes leaves the normal equations
/// underdetermined and is rejected.
inline BasisMatrix basis_matrix(const Eigen::VectorXd& nodes, int degree,
                                bool for_fitting = false) {
  detail::check_degree(degree);
  if (nodes.size() == 0) throw ContractError("empty node grid");
  for (Eigen::Index i = 1; i < nodes.size(); ++i)
    if (!(nodes(i) > nodes(i - 1)))
      throw ContractError("node grid must be strictly increasing");
  if (for_fitting && nodes.size() < degree + 1)
    throw UnderdeterminedError("need at least degree+1 nodes to fit");
  BasisMatrix out;
  out.degree = degree;
  out.nodes = nodes;
  out.values.resize(nodes.size(), degree + 1);
  for (Eigen::Index i = 0; i < nodes.size(); ++i)
    out.values.row(i) = eval_basis(nodes(i), degree).transpose();
  return out;
}

/// Uniform grid of n nodes spanning [0,1].
inline Eigen::VectorXd unit_grid(Eigen::Index n) {
  if (n < 2) throw ContractError("grid needs at least 2 nodes");
  return Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
}

}  // namespace polyflow

#endif
