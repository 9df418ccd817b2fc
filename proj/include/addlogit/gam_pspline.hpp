#pragma once

#include <Eigen/Dense>
#include <vector>

#include "addlogit/logistic_glm.hpp"
#include "addlogit/spline_basis.hpp"

namespace addlogit {

struct PsplineOptions {
  int num_basis = 10;  // K
  int order = 4;       // m (cubic)
  int penalty_order = 1;
  int max_iter = 100;
  double tol = 1e-6;  // max-norm of the penalized score
  int max_halvings = 10;
  double separation_bound = 1e3;
  double df_scale = 1.0;  // multiplier on effective df inside AIC
};

struct LambdaGridPoint {
  double lambda = 0.0;
  double aic = 0.0;
  double effective_df = 0.0;
  bool converged = false;
};

struct PsplineFit {
  double alpha = 0.0;
  std::vector<Vector> beta;  // one length-K block per feature
  std::vector<BSplineBasis> bases;
  std::vector<double> lambdas;
  PenaltyMatrix penalty;
  bool converged = false;
  bool separation = false;
  bool ridge_fallback = false;
  int iterations = 0;
  double deviance = 0.0;
  double penalized_loglik = 0.0;
  double effective_df = 1.0;
  double aic = 0.0;  // deviance + 2 * df_scale * effective_df
  std::vector<double> penalized_deviance_trace;
  std::vector<LambdaGridPoint> selection;  // filled by select_lambda_aic

  Vector predict(const Matrix& X) const;
  // Fitted component j at x (centered over the training data).
  double component(int j, double x) const;
};

// l(y; beta) - 1/2 sum_j lambda_j beta_j^T P beta_j for the additive logistic
// predictor alpha + sum_j B_j beta_j.
double penalized_loglik(const std::vector<Vector>& beta, double alpha, const std::vector<Matrix>& bases,
                        const Vector& y, const std::vector<double>& lambdas, const PenaltyMatrix& penalty);

// Gradient of penalized_loglik with respect to (alpha, beta_1, ..., beta_p),
// stacked in that order.
Vector penalized_gradient(const std::vector<Vector>& beta, double alpha, const std::vector<Matrix>& bases,
                          const Vector& y, const std::vector<double>& lambdas, const PenaltyMatrix& penalty);

// Penalized IRLS with each component constrained to sum to zero over the
// training data.  `lambdas` holds one value per feature.
PsplineFit fit_pspline(const Matrix& X, const Vector& y, const std::vector<double>& lambdas,
                       const PsplineOptions& opts = {});

// 13 log-spaced values in [1e-4, 1e4].
std::vector<double> default_lambda_grid();

// Shared lambda across components; the fit with the smallest AIC wins, ties
// going to the larger lambda.
PsplineFit select_lambda_aic(const Matrix& X, const Vector& y, const std::vector<double>& grid,
                             const PsplineOptions& opts = {});

}  // namespace addlogit
