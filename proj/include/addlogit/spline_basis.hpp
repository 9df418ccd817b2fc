#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace addlogit {

// Evenly spaced knots for K order-m B-splines on [lo, hi].  The interior
// spacing is (hi - lo) / (K - m + 1); the sequence is extended beyond the
// domain with the same spacing (no coincident boundary knots) and carries one
// extra padding knot at each end, K + m + 2 knots in total.
struct KnotVector {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> knots;
  int order = 4;
  int num_basis = 10;

  double spacing() const { return (hi - lo) / static_cast<double>(num_basis - order + 1); }
};

class BSplineBasis {
 public:
  BSplineBasis(double lo, double hi, int num_basis, int order);

  const KnotVector& knot_vector() const { return knots_; }
  int num_basis() const { return knots_.num_basis; }
  int order() const { return knots_.order; }
  double lo() const { return knots_.lo; }
  double hi() const { return knots_.hi; }

  // All K basis values at x (clamped to [lo, hi]).
  Eigen::VectorXd eval(double x) const;

  // The at most `order` nonzero values at x; returns the index of the first
  // one.  `values` must hold order() entries.
  int eval_nonzero(double x, std::span<double> values) const;

 private:
  KnotVector knots_;
};

BSplineBasis build_basis(double lo, double hi, int num_basis, int order);

// Row i holds the basis at xs[i]; throws non-finite-input on NaN/inf.
Eigen::MatrixXd eval_basis_matrix(const BSplineBasis& basis, std::span<const double> xs);
Eigen::MatrixXd eval_basis_matrix(const BSplineBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& xs);

// P = D^T D with D the order-d difference operator on K coefficients.
struct PenaltyMatrix {
  int dim = 0;
  int order = 1;
  Eigen::MatrixXd entries;

  double quadratic_form(const Eigen::Ref<const Eigen::VectorXd>& beta) const {
    return beta.dot(entries * beta);
  }
};

Eigen::MatrixXd difference_operator(int dim, int order);
PenaltyMatrix difference_penalty(int dim, int order);

}  // namespace addlogit
