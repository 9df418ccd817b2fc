#include "addlogit/gamboost.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "addlogit/error.hpp"

namespace addlogit {

Vector boost_candidate_update(const Matrix& basis_matrix, const Vector& y, const Vector& mu_hat, double lambda,
                              const PenaltyMatrix& penalty, UpdateForm form, bool* ridge_used) {
  if (basis_matrix.rows() != y.size() || mu_hat.size() != y.size() || basis_matrix.cols() != penalty.dim) {
    throw Error(ErrorCode::shape_mismatch, "boost update: inconsistent shapes");
  }
  // For the logit link h'(eta) = mu (1 - mu) = var(y), so D = Sigma.
  const Vector d = (mu_hat.array() * (1.0 - mu_hat.array())).matrix();
  const Vector w = d;  // D Sigma^{-1} D
  Matrix lhs = basis_matrix.transpose() * w.asDiagonal() * basis_matrix + lambda * penalty.entries;
  Vector rhs;
  if (form == UpdateForm::simplified) {
    rhs = basis_matrix.transpose() * (y - mu_hat);
  } else {
    const Vector sigma = d;
    const Vector weight = (d.array() * d.array() / sigma.array()).matrix();
    rhs = basis_matrix.transpose() * (weight.array() * (y - mu_hat).array() / d.array()).matrix();
  }
  Eigen::LLT<Matrix> llt(lhs);
  bool ridge = false;
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
    ridge = true;
    lhs.diagonal().array() += 1e-8;
    llt.compute(lhs);
  }
  if (ridge_used != nullptr) *ridge_used = ridge;
  return llt.solve(rhs);
}

BoostSelection boost_select(const std::vector<Vector>& candidate_etas, const Vector& eta_hat, const Vector& y) {
  if (candidate_etas.empty()) {
    throw Error(ErrorCode::empty_input, "boost_select needs at least one candidate");
  }
  const double base = bernoulli_deviance_eta(y, eta_hat);
  BoostSelection sel;
  for (std::size_t j = 0; j < candidate_etas.size(); ++j) {
    const double reduction = base - bernoulli_deviance_eta(y, candidate_etas[j]);
    if (j == 0 || reduction > sel.reduction) {
      sel.index = static_cast<int>(j);
      sel.reduction = reduction;
    }
  }
  sel.improved = sel.reduction >= 0.0;
  return sel;
}

double calibrate_boost_lambda(const std::vector<Matrix>& basis_matrices, const Vector& y,
                              const PenaltyMatrix& penalty, double target_df) {
  // First step from the intercept-only model: W = w0 I and H0 = 11^T / n, so
  // the df increment of feature j is w0 tr(A^{-1} B^T (I - 11^T/n) B).
  const double ybar = y.mean();
  const double w0 = ybar * (1.0 - ybar);
  const auto n = static_cast<double>(y.size());
  std::vector<Matrix> grams;
  std::vector<Matrix> centered;
  for (const auto& B : basis_matrices) {
    const Vector colsum = B.colwise().sum().transpose();
    const Matrix gram = B.transpose() * B;
    grams.push_back(w0 * gram);
    centered.push_back(w0 * (gram - colsum * colsum.transpose() / n));
  }
  auto increment = [&](double log_lambda) {
    const double lam = std::pow(10.0, log_lambda);
    double total = 0.0;
    for (std::size_t j = 0; j < grams.size(); ++j) {
      Matrix lhs = grams[j] + lam * penalty.entries;
      lhs.diagonal().array() += 1e-10;
      total += Eigen::LDLT<Matrix>(lhs).solve(centered[j]).trace();
    }
    return total / static_cast<double>(grams.size());
  };
  double lo = -6.0;
  double hi = 10.0;
  if (increment(lo) <= target_df) return std::pow(10.0, lo);
  if (increment(hi) >= target_df) return std::pow(10.0, hi);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (increment(mid) > target_df) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::pow(10.0, 0.5 * (lo + hi));
}

namespace {

Vector clipped_mu(const Vector& eta, double clip) {
  return sigmoid(eta).array().max(clip).min(1.0 - clip).matrix();
}

}  // namespace

BoostFit boost_fit(const Matrix& X, const Vector& y, const BoostOptions& opts) {
  if (X.rows() != y.size()) {
    throw Error(ErrorCode::shape_mismatch, "boost_fit: design rows must match y");
  }
  if (opts.max_steps < 0) {
    throw Error(ErrorCode::invalid_range, "max_steps must be nonnegative");
  }
  require_two_classes(y);
  if (!X.allFinite()) {
    throw Error(ErrorCode::non_finite_input, "design matrix contains non-finite values");
  }
  const Eigen::Index n = X.rows();
  const auto p = static_cast<std::size_t>(X.cols());
  const PenaltyMatrix penalty = difference_penalty(opts.num_basis, opts.penalty_order);

  BoostFit fit;
  fit.num_features = static_cast<int>(p);
  std::vector<Matrix> B;
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = X.col(static_cast<Eigen::Index>(j));
    double lo = col.minCoeff();
    double hi = col.maxCoeff();
    if (!(lo < hi)) {
      lo -= 0.5;
      hi += 0.5;
    }
    fit.bases.emplace_back(lo, hi, opts.num_basis, opts.order);
    B.push_back(eval_basis_matrix(fit.bases.back(), col));
    fit.component_coefs.push_back(Vector::Zero(opts.num_basis));
  }
  fit.lambda = opts.lambda ? *opts.lambda : calibrate_boost_lambda(B, y, penalty, opts.calibration_df);

  const double ybar = y.mean();
  fit.initial_alpha = std::log(ybar / (1.0 - ybar));
  fit.alpha = fit.initial_alpha;
  Vector eta = Vector::Constant(n, fit.alpha);
  double dev = bernoulli_deviance_eta(y, eta);

  Matrix hat;
  double edf = 1.0;
  if (opts.track_hat) hat = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  fit.trajectory.push_back({dev, edf, dev + 2.0 * edf, true});

  for (int k = 0; k < opts.max_steps && p > 0; ++k) {
    const Vector mu = clipped_mu(eta, opts.mu_clip);
    std::vector<Vector> deltas;
    std::vector<Vector> candidates;
    for (std::size_t j = 0; j < p; ++j) {
      bool ridge = false;
      deltas.push_back(boost_candidate_update(B[j], y, mu, fit.lambda, penalty, UpdateForm::simplified, &ridge));
      fit.ridge_fallback = fit.ridge_fallback || ridge;
      candidates.push_back(eta + B[j] * deltas.back());
    }
    const BoostSelection sel = boost_select(candidates, eta, y);
    const auto s = static_cast<std::size_t>(sel.index);

    if (opts.track_hat) {
      // H <- H + M (I - H), M = W B (B^T W B + lambda P)^{-1} B^T
      const Vector w = (mu.array() * (1.0 - mu.array())).matrix();
      Matrix lhs = B[s].transpose() * w.asDiagonal() * B[s] + fit.lambda * penalty.entries;
      Eigen::LDLT<Matrix> ldlt(lhs);
      const Matrix resid_op = B[s].transpose() - B[s].transpose() * hat;  // B^T (I - H)
      hat.noalias() += (w.asDiagonal() * B[s]) * ldlt.solve(resid_op);
    }

    BoostStep step;
    step.feature = sel.index;
    step.delta = deltas[s];
    fit.component_coefs[s] += deltas[s];
    eta = candidates[s];

    // one Newton step on the intercept, halved if it would raise the deviance
    const Vector mu_new = sigmoid(eta);
    const Vector w_new = (mu_new.array() * (1.0 - mu_new.array())).max(kWeightFloor).matrix();
    double delta_alpha = (y - mu_new).sum() / w_new.sum();
    const double dev_before = bernoulli_deviance_eta(y, eta);
    for (int h = 0; h < 10; ++h) {
      if (bernoulli_deviance_eta(y, (eta.array() + delta_alpha).matrix()) <= dev_before) break;
      delta_alpha *= 0.5;
    }
    if (!(bernoulli_deviance_eta(y, (eta.array() + delta_alpha).matrix()) <= dev_before)) delta_alpha = 0.0;
    eta.array() += delta_alpha;
    fit.alpha += delta_alpha;
    step.delta_alpha = delta_alpha;

    if (opts.track_hat && delta_alpha != 0.0) {
      const double wsum = w_new.sum();
      const Eigen::RowVectorXd resid_row = Eigen::RowVectorXd::Ones(n) - hat.colwise().sum();
      hat.noalias() += (w_new / wsum) * resid_row;
    }
    if (opts.track_hat) edf = hat.trace();

    dev = bernoulli_deviance_eta(y, eta);
    fit.steps.push_back(std::move(step));
    fit.selected_sequence.push_back(sel.index);
    fit.trajectory.push_back({dev, edf, dev + 2.0 * edf, sel.improved});
    fit.steps_taken = k + 1;
  }

  fit.chosen_step = 0;
  for (std::size_t k = 1; k < fit.trajectory.size(); ++k) {
    if (fit.trajectory[k].aic < fit.trajectory[static_cast<std::size_t>(fit.chosen_step)].aic) {
      fit.chosen_step = static_cast<int>(k);
    }
  }
  return fit;
}

Vector predict_boost(const BoostFit& fit, const Matrix& X_new, std::optional<int> at_step) {
  const int step = at_step.value_or(fit.chosen_step);
  if (step < 0 || step > fit.steps_taken) {
    throw Error(ErrorCode::step_out_of_range,
                "step " + std::to_string(step) + " outside [0, " + std::to_string(fit.steps_taken) + "]");
  }
  if (X_new.cols() != fit.num_features) {
    throw Error(ErrorCode::shape_mismatch, "boost fit expects " + std::to_string(fit.num_features) + " columns");
  }
  double alpha = fit.initial_alpha;
  std::vector<Vector> coefs(fit.bases.size());
  for (std::size_t j = 0; j < coefs.size(); ++j) coefs[j] = Vector::Zero(fit.bases[j].num_basis());
  for (int k = 0; k < step; ++k) {
    const BoostStep& s = fit.steps[static_cast<std::size_t>(k)];
    coefs[static_cast<std::size_t>(s.feature)] += s.delta;
    alpha += s.delta_alpha;
  }
  Vector eta = Vector::Constant(X_new.rows(), alpha);
  for (std::size_t j = 0; j < coefs.size(); ++j) {
    if (coefs[j].isZero(0.0)) continue;
    eta += eval_basis_matrix(fit.bases[j], X_new.col(static_cast<Eigen::Index>(j))) * coefs[j];
  }
  return eta;
}

}  // namespace addlogit
