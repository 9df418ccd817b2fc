#pragma once

#include <Eigen/Dense>
#include <vector>

namespace addlogit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kProbClip = 1e-12;
inline constexpr double kWeightFloor = 1e-10;

double sigmoid(double eta);
Vector sigmoid(const Eigen::Ref<const Vector>& eta);

// -2 * Bernoulli log-likelihood, probabilities clipped to [1e-12, 1 - 1e-12].
double bernoulli_deviance(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& p);

// Same, evaluated from the linear predictor without forming p first; exact
// for saturated eta.
double bernoulli_deviance_eta(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& eta);

// Throws one-class-input unless y holds both 0 and 1 (and nothing else).
void require_two_classes(const Eigen::Ref<const Vector>& y);

struct GlmOptions {
  int max_iter = 100;
  double tol = 1e-8;             // max-norm of the score at convergence
  int max_halvings = 10;
  double separation_bound = 1e3; // coefficient norm treated as divergence
  double df_scale = 1.0;         // multiplier on df inside AIC penalties for selection
};

struct GlmFit {
  Vector coefficients;  // intercept first, then one per kept feature
  bool converged = false;
  bool separation = false;
  bool ridge_fallback = false;
  int iterations = 0;
  double deviance = 0.0;
  double aic = 0.0;  // deviance + 2 * (number of coefficients), unscaled
  std::vector<int> kept_features;
  int num_features = 0;  // column count of the design the fit was requested on
  std::vector<double> deviance_trace;  // deviance after each accepted iteration

  double df() const { return static_cast<double>(coefficients.size()); }
  double scaled_aic(double df_scale) const { return deviance + 2.0 * df_scale * df(); }
};

// Newton/IRLS on the Bernoulli likelihood; X excludes the intercept column.
GlmFit fit_glm_irls(const Matrix& X, const Vector& y, const GlmOptions& opts = {});

// Fit restricted to the given columns of X.
GlmFit fit_glm_subset(const Matrix& X, const Vector& y, const std::vector<int>& features,
                      const GlmOptions& opts = {});

// Linear predictor.  X_new may carry either the full original column set or
// exactly the kept columns.
Vector predict_scores(const GlmFit& fit, const Matrix& X_new);

// Backward elimination by (df-scaled) AIC starting from the full model.
GlmFit backward_eliminate(const Matrix& X, const Vector& y, const GlmOptions& opts = {});

// Bernoulli log-likelihood and its gradient for intercept-first coefficients.
double logistic_loglik(const Matrix& X, const Vector& y, const Vector& coefficients);
Vector logistic_score(const Matrix& X, const Vector& y, const Vector& coefficients);

}  // namespace addlogit
