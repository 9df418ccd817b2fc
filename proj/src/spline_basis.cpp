#include "addlogit/spline_basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "addlogit/error.hpp"

namespace addlogit {

BSplineBasis::BSplineBasis(double lo, double hi, int num_basis, int order) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw Error(ErrorCode::invalid_domain, "basis domain requires lo < hi");
  }
  if (order < 1 || num_basis < order) {
    throw Error(ErrorCode::too_few_basis,
                "need K >= m >= 1, got K=" + std::to_string(num_basis) + ", m=" + std::to_string(order));
  }
  knots_.lo = lo;
  knots_.hi = hi;
  knots_.order = order;
  knots_.num_basis = num_basis;
  const double h = knots_.spacing();
  const int total = num_basis + order + 2;
  knots_.knots.resize(total);
  // knots[1 + m - 1] == lo and knots[1 + K] == hi; index 0 and the last
  // entry are the padding knots.
  for (int i = 0; i < total; ++i) {
    knots_.knots[i] = lo + static_cast<double>(i - order) * h;
  }
  knots_.knots[order] = lo;
  knots_.knots[num_basis + 1] = hi;
}

int BSplineBasis::eval_nonzero(double x, std::span<double> values) const {
  const int m = knots_.order;
  const int K = knots_.num_basis;
  const double h = knots_.spacing();
  // Active knots t_j = knots[j + 1], j = 0..K+m-1; the domain is [t_{m-1}, t_K].
  auto t = [&](int j) { return knots_.knots[j + 1]; };
  x = std::clamp(x, knots_.lo, knots_.hi);
  int span = m - 1 + static_cast<int>(std::floor((x - knots_.lo) / h));
  span = std::clamp(span, m - 1, K - 1);
  while (span > m - 1 && x < t(span)) --span;
  while (span < K - 1 && x >= t(span + 1)) ++span;

  // Cox-de Boor, triangular form: values[r] is B_{span-m+1+r} at x.
  std::fill(values.begin(), values.begin() + m, 0.0);
  values[0] = 1.0;
  std::vector<double> left(m), right(m);
  for (int j = 1; j < m; ++j) {
    left[j] = x - t(span + 1 - j);
    right[j] = t(span + j) - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }
  return span - m + 1;
}

Eigen::VectorXd BSplineBasis::eval(double x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(knots_.num_basis);
  std::vector<double> vals(knots_.order);
  const int first = eval_nonzero(x, vals);
  for (int r = 0; r < knots_.order; ++r) out[first + r] = vals[r];
  return out;
}

BSplineBasis build_basis(double lo, double hi, int num_basis, int order) {
  return BSplineBasis(lo, hi, num_basis, order);
}

Eigen::MatrixXd eval_basis_matrix(const BSplineBasis& basis, std::span<const double> xs) {
  const int m = basis.order();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xs.size()), basis.num_basis());
  std::vector<double> vals(m);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) {
      throw Error(ErrorCode::non_finite_input, "basis evaluation at row " + std::to_string(i));
    }
    const int first = basis.eval_nonzero(xs[i], vals);
    for (int r = 0; r < m; ++r) out(static_cast<Eigen::Index>(i), first + r) = vals[r];
  }
  return out;
}

Eigen::MatrixXd eval_basis_matrix(const BSplineBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& xs) {
  return eval_basis_matrix(basis, std::span<const double>(xs.data(), static_cast<std::size_t>(xs.size())));
}

Eigen::MatrixXd difference_operator(int dim, int order) {
  if (order < 1 || order > 2) {
    throw Error(ErrorCode::dimension_too_small, "difference order must be 1 or 2");
  }
  if (dim < order + 1) {
    throw Error(ErrorCode::dimension_too_small,
                "difference penalty of order " + std::to_string(order) + " needs K >= " + std::to_string(order + 1));
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(dim, dim);
  for (int k = 0; k < order; ++k) {
    const Eigen::Index rows = d.rows();
    d = (d.bottomRows(rows - 1) - d.topRows(rows - 1)).eval();
  }
  return d;
}

PenaltyMatrix difference_penalty(int dim, int order) {
  const Eigen::MatrixXd d = difference_operator(dim, order);
  return PenaltyMatrix{dim, order, d.transpose() * d};
}

}  // namespace addlogit
