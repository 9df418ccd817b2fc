#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "addlogit/logistic_glm.hpp"
#include "addlogit/spline_basis.hpp"

namespace addlogit {

struct BoostOptions {
  int num_basis = 10;
  int order = 4;
  int penalty_order = 1;
  int max_steps = 200;
  std::optional<double> lambda;  // calibrated from the data when empty
  double mu_clip = 1e-6;
  double calibration_df = 1.0;   // target df increment of the first step
  bool track_hat = true;         // effective df via the hat-matrix recursion
};

struct BoostStep {
  int feature = 0;
  Vector delta;  // coefficient increment for that feature's basis
  double delta_alpha = 0.0;
};

struct BoostTrajectoryPoint {
  double deviance = 0.0;
  double effective_df = 1.0;
  double aic = 0.0;
  bool improved = true;  // false when even the best candidate raised the deviance
};

struct BoostFit {
  double initial_alpha = 0.0;
  double alpha = 0.0;  // after all steps
  std::vector<Vector> component_coefs;
  std::vector<BSplineBasis> bases;
  double lambda = 0.0;
  bool ridge_fallback = false;
  int steps_taken = 0;
  std::vector<int> selected_sequence;
  std::vector<BoostStep> steps;
  std::vector<BoostTrajectoryPoint> trajectory;  // entry k describes the model after k steps
  int chosen_step = 0;
  int num_features = 0;
};

enum class UpdateForm {
  simplified,  // (B^T W B + lambda P)^{-1} B^T (y - mu)
  weighted,    // (B^T W B + lambda P)^{-1} B^T W D^{-1} (y - mu), W = D Sigma^{-1} D
};

// One penalized Fisher-scoring step for a single component's coefficients.
// `ridge_used` is set when the system needed a ridge to be solved.
Vector boost_candidate_update(const Matrix& basis_matrix, const Vector& y, const Vector& mu_hat, double lambda,
                              const PenaltyMatrix& penalty, UpdateForm form = UpdateForm::simplified,
                              bool* ridge_used = nullptr);

struct BoostSelection {
  int index = 0;
  double reduction = 0.0;  // Dev(eta_hat) - Dev(candidate)
  bool improved = true;
};

// Candidate with the largest deviance reduction; ties go to the lowest index.
BoostSelection boost_select(const std::vector<Vector>& candidate_etas, const Vector& eta_hat, const Vector& y);

// Lambda whose first boosting step adds `target_df` effective df (averaged
// over features).
double calibrate_boost_lambda(const std::vector<Matrix>& basis_matrices, const Vector& y,
                              const PenaltyMatrix& penalty, double target_df);

BoostFit boost_fit(const Matrix& X, const Vector& y, const BoostOptions& opts = {});

// Linear predictor after `at_step` steps (default: the AIC-chosen step).
Vector predict_boost(const BoostFit& fit, const Matrix& X_new, std::optional<int> at_step = std::nullopt);

}  // namespace addlogit
