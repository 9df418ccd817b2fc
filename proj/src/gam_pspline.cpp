#include "addlogit/gam_pspline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "addlogit/error.hpp"

namespace addlogit {

namespace {

BSplineBasis feature_basis(const Eigen::Ref<const Vector>& x, const PsplineOptions& opts) {
  double lo = x.minCoeff();
  double hi = x.maxCoeff();
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return BSplineBasis(lo, hi, opts.num_basis, opts.order);
}

// Orthonormal basis (K x K-1) of { beta : c^T beta = 0 }.
Matrix null_space_of(const Vector& c) {
  const Eigen::HouseholderQR<Matrix> qr{Matrix(c)};
  const Matrix q = qr.householderQ() * Matrix::Identity(c.size(), c.size());
  return q.rightCols(c.size() - 1);
}

struct Problem {
  Matrix design;   // [1, B_1 Z_1, ..., B_p Z_p]
  Matrix penalty;  // block diagonal, zero for the intercept
  std::vector<Matrix> constraints;
  std::vector<Eigen::Index> offsets;
};

}  // namespace

double penalized_loglik(const std::vector<Vector>& beta, double alpha, const std::vector<Matrix>& bases,
                        const Vector& y, const std::vector<double>& lambdas, const PenaltyMatrix& penalty) {
  if (beta.size() != bases.size() || lambdas.size() != bases.size()) {
    throw Error(ErrorCode::shape_mismatch, "penalized_loglik: need one beta block and lambda per basis");
  }
  Vector eta = Vector::Constant(y.size(), alpha);
  double pen = 0.0;
  for (std::size_t j = 0; j < bases.size(); ++j) {
    if (bases[j].rows() != y.size() || bases[j].cols() != beta[j].size() || beta[j].size() != penalty.dim) {
      throw Error(ErrorCode::shape_mismatch, "penalized_loglik: block " + std::to_string(j) + " has wrong shape");
    }
    if (lambdas[j] < 0.0) {
      throw Error(ErrorCode::invalid_range, "smoothing parameters must be nonnegative");
    }
    eta += bases[j] * beta[j];
    pen += lambdas[j] * penalty.quadratic_form(beta[j]);
  }
  return -0.5 * bernoulli_deviance_eta(y, eta) - 0.5 * pen;
}

Vector penalized_gradient(const std::vector<Vector>& beta, double alpha, const std::vector<Matrix>& bases,
                          const Vector& y, const std::vector<double>& lambdas, const PenaltyMatrix& penalty) {
  Vector eta = Vector::Constant(y.size(), alpha);
  for (std::size_t j = 0; j < bases.size(); ++j) eta += bases[j] * beta[j];
  const Vector resid = y - sigmoid(eta);
  Vector grad(1 + static_cast<Eigen::Index>(bases.size()) * penalty.dim);
  grad[0] = resid.sum();
  for (std::size_t j = 0; j < bases.size(); ++j) {
    grad.segment(1 + static_cast<Eigen::Index>(j) * penalty.dim, penalty.dim) =
        bases[j].transpose() * resid - lambdas[j] * (penalty.entries * beta[j]);
  }
  return grad;
}

Vector PsplineFit::predict(const Matrix& X) const {
  if (X.cols() != static_cast<Eigen::Index>(bases.size())) {
    throw Error(ErrorCode::shape_mismatch, "pspline fit expects " + std::to_string(bases.size()) + " columns");
  }
  Vector eta = Vector::Constant(X.rows(), alpha);
  for (std::size_t j = 0; j < bases.size(); ++j) {
    eta += eval_basis_matrix(bases[j], X.col(static_cast<Eigen::Index>(j))) * beta[j];
  }
  return eta;
}

double PsplineFit::component(int j, double x) const {
  return bases[static_cast<std::size_t>(j)].eval(x).dot(beta[static_cast<std::size_t>(j)]);
}

PsplineFit fit_pspline(const Matrix& X, const Vector& y, const std::vector<double>& lambdas,
                       const PsplineOptions& opts) {
  if (X.rows() != y.size()) {
    throw Error(ErrorCode::shape_mismatch, "fit_pspline: design rows must match y");
  }
  if (static_cast<Eigen::Index>(lambdas.size()) != X.cols()) {
    throw Error(ErrorCode::shape_mismatch, "fit_pspline: need one lambda per feature");
  }
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw Error(ErrorCode::invalid_range, "smoothing parameters must be nonnegative");
  }
  require_two_classes(y);
  if (!X.allFinite()) {
    throw Error(ErrorCode::non_finite_input, "design matrix contains non-finite values");
  }

  const Eigen::Index n = X.rows();
  const auto p = static_cast<std::size_t>(X.cols());
  const int K = opts.num_basis;

  PsplineFit fit;
  fit.lambdas = lambdas;
  fit.penalty = difference_penalty(K, opts.penalty_order);

  Problem prob;
  const Eigen::Index cols = 1 + static_cast<Eigen::Index>(p) * (K - 1);
  prob.design.resize(n, cols);
  prob.penalty = Matrix::Zero(cols, cols);
  prob.design.col(0).setOnes();
  for (std::size_t j = 0; j < p; ++j) {
    fit.bases.push_back(feature_basis(X.col(static_cast<Eigen::Index>(j)), opts));
    const Matrix B = eval_basis_matrix(fit.bases.back(), X.col(static_cast<Eigen::Index>(j)));
    const Matrix Z = null_space_of(B.colwise().sum().transpose());
    const Eigen::Index off = 1 + static_cast<Eigen::Index>(j) * (K - 1);
    prob.design.middleCols(off, K - 1) = B * Z;
    prob.penalty.block(off, off, K - 1, K - 1) = lambdas[j] * (Z.transpose() * fit.penalty.entries * Z);
    prob.constraints.push_back(Z);
    prob.offsets.push_back(off);
  }

  const Matrix& A = prob.design;
  const Matrix& S = prob.penalty;
  Vector theta = Vector::Zero(cols);
  const double ybar = y.mean();
  theta[0] = std::log(ybar / (1.0 - ybar));
  Vector eta = A * theta;
  auto objective = [&](const Vector& e, const Vector& t) { return bernoulli_deviance_eta(y, e) + t.dot(S * t); };
  double obj = objective(eta, theta);
  fit.penalized_deviance_trace.push_back(obj);

  Matrix H;
  Vector w;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Vector mu = sigmoid(eta);
    const Vector grad = A.transpose() * (y - mu) - S * theta;
    if (grad.lpNorm<Eigen::Infinity>() < opts.tol) {
      fit.converged = true;
      break;
    }
    w = (mu.array() * (1.0 - mu.array())).max(kWeightFloor).matrix();
    H = A.transpose() * w.asDiagonal() * A + S;
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
      fit.ridge_fallback = true;
      H.diagonal().array() += 1e-8;
      llt.compute(H);
    }
    const Vector step = llt.solve(grad);
    double scale = 1.0;
    Vector trial = theta + step;
    Vector trial_eta = A * trial;
    double trial_obj = objective(trial_eta, trial);
    for (int h = 0; h < opts.max_halvings && !(trial_obj <= obj); ++h) {
      scale *= 0.5;
      trial = theta + scale * step;
      trial_eta = A * trial;
      trial_obj = objective(trial_eta, trial);
    }
    fit.iterations = iter + 1;
    if (!(trial_obj <= obj)) break;
    theta = std::move(trial);
    eta = std::move(trial_eta);
    obj = trial_obj;
    fit.penalized_deviance_trace.push_back(obj);
    if (theta.norm() > opts.separation_bound || bernoulli_deviance_eta(y, eta) < 1e-6) {
      fit.separation = true;
      break;
    }
  }

  const Vector mu = sigmoid(eta);
  w = (mu.array() * (1.0 - mu.array())).max(kWeightFloor).matrix();
  const Matrix fisher = A.transpose() * w.asDiagonal() * A;
  Matrix Hf = fisher + S;
  Eigen::LDLT<Matrix> ldlt(Hf);
  if (ldlt.info() != Eigen::Success) {
    Hf.diagonal().array() += 1e-8;
    ldlt.compute(Hf);
  }
  fit.effective_df = ldlt.solve(fisher).trace();

  fit.alpha = theta[0];
  for (std::size_t j = 0; j < p; ++j) {
    fit.beta.push_back(prob.constraints[j] * theta.segment(prob.offsets[j], K - 1));
  }
  fit.deviance = bernoulli_deviance_eta(y, eta);
  fit.penalized_loglik = -0.5 * obj;
  fit.aic = fit.deviance + 2.0 * opts.df_scale * fit.effective_df;
  return fit;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 13; ++i) grid.push_back(std::pow(10.0, -4.0 + 8.0 * i / 12.0));
  return grid;
}

PsplineFit select_lambda_aic(const Matrix& X, const Vector& y, const std::vector<double>& grid,
                             const PsplineOptions& opts) {
  if (grid.empty()) {
    throw Error(ErrorCode::empty_input, "lambda grid is empty");
  }
  std::vector<double> ordered = grid;
  std::sort(ordered.begin(), ordered.end(), std::greater<>());

  std::vector<LambdaGridPoint> trace;
  PsplineFit best;
  bool have_best = false;
  std::string last_error;
  for (double lambda : ordered) {
    try {
      PsplineFit f = fit_pspline(X, y, std::vector<double>(static_cast<std::size_t>(X.cols()), lambda), opts);
      trace.push_back({lambda, f.aic, f.effective_df, f.converged});
      // strict improvement required, so equal AIC keeps the larger lambda
      if (!have_best || f.aic < best.aic - 1e-9) {
        best = std::move(f);
        have_best = true;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::one_class_input || e.code() == ErrorCode::shape_mismatch) throw;
      last_error = e.what();
      trace.push_back({lambda, std::numeric_limits<double>::quiet_NaN(), 0.0, false});
    }
  }
  if (!have_best) {
    throw Error(ErrorCode::all_fits_failed, "no lambda in the grid produced a fit: " + last_error);
  }
  best.selection = std::move(trace);
  return best;
}

}  // namespace addlogit
