#include "addlogit/logistic_glm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "addlogit/error.hpp"

namespace addlogit {

double sigmoid(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

Vector sigmoid(const Eigen::Ref<const Vector>& eta) {
  return eta.unaryExpr([](double v) { return sigmoid(v); });
}

double bernoulli_deviance(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& p) {
  if (y.size() != p.size()) {
    throw Error(ErrorCode::length_mismatch, "deviance: y and p differ in length");
  }
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // 0 * log 0 := 0 on either branch; clip only against log 0
    if (y[i] > 0.0) ll += y[i] * std::log(std::max(p[i], kProbClip));
    if (y[i] < 1.0) ll += (1.0 - y[i]) * std::log1p(-std::min(p[i], 1.0 - kProbClip));
  }
  return std::max(0.0, -2.0 * ll);
}

double bernoulli_deviance_eta(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& eta) {
  if (y.size() != eta.size()) {
    throw Error(ErrorCode::length_mismatch, "deviance: y and eta differ in length");
  }
  // -log p = log(1 + e^-eta), -log(1-p) = log(1 + e^eta)
  auto softplus = [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    dev += y[i] * softplus(-eta[i]) + (1.0 - y[i]) * softplus(eta[i]);
  }
  return 2.0 * dev;
}

void require_two_classes(const Eigen::Ref<const Vector>& y) {
  bool has0 = false;
  bool has1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) {
      has0 = true;
    } else if (y[i] == 1.0) {
      has1 = true;
    } else {
      throw Error(ErrorCode::one_class_input, "labels must be 0/1, found " + std::to_string(y[i]));
    }
  }
  if (!has0 || !has1) {
    throw Error(ErrorCode::one_class_input, "both classes must be present");
  }
}

namespace {

Matrix with_intercept(const Matrix& X, const std::vector<int>& features) {
  Matrix A(X.rows(), static_cast<Eigen::Index>(features.size()) + 1);
  A.col(0).setOnes();
  for (std::size_t k = 0; k < features.size(); ++k) {
    A.col(static_cast<Eigen::Index>(k) + 1) = X.col(features[k]);
  }
  return A;
}

}  // namespace

double logistic_loglik(const Matrix& X, const Vector& y, const Vector& coefficients) {
  std::vector<int> all(static_cast<std::size_t>(X.cols()));
  std::iota(all.begin(), all.end(), 0);
  const Vector eta = with_intercept(X, all) * coefficients;
  return -0.5 * bernoulli_deviance_eta(y, eta);
}

Vector logistic_score(const Matrix& X, const Vector& y, const Vector& coefficients) {
  std::vector<int> all(static_cast<std::size_t>(X.cols()));
  std::iota(all.begin(), all.end(), 0);
  const Matrix A = with_intercept(X, all);
  return A.transpose() * (y - sigmoid(A * coefficients));
}

GlmFit fit_glm_subset(const Matrix& X, const Vector& y, const std::vector<int>& features,
                      const GlmOptions& opts) {
  if (X.rows() != y.size()) {
    throw Error(ErrorCode::shape_mismatch, "design has " + std::to_string(X.rows()) + " rows, y has " +
                                               std::to_string(y.size()));
  }
  require_two_classes(y);
  if (!X.allFinite()) {
    throw Error(ErrorCode::non_finite_input, "design matrix contains non-finite values");
  }
  const Matrix A = with_intercept(X, features);
  const Eigen::Index q = A.cols();

  GlmFit fit;
  fit.kept_features = features;
  fit.num_features = static_cast<int>(X.cols());
  fit.coefficients = Vector::Zero(q);
  const double ybar = y.mean();
  fit.coefficients[0] = std::log(ybar / (1.0 - ybar));

  Vector eta = A * fit.coefficients;
  double dev = bernoulli_deviance_eta(y, eta);
  fit.deviance_trace.push_back(dev);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Vector p = sigmoid(eta);
    const Vector score = A.transpose() * (y - p);
    if (score.lpNorm<Eigen::Infinity>() < opts.tol) {
      fit.converged = true;
      break;
    }
    const Vector w = (p.array() * (1.0 - p.array())).max(kWeightFloor).matrix();
    Matrix H = A.transpose() * w.asDiagonal() * A;
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
      fit.ridge_fallback = true;
      H.diagonal().array() += 1e-8;
      llt.compute(H);
    }
    const Vector step = llt.solve(score);

    double scale = 1.0;
    Vector trial = fit.coefficients + step;
    Vector trial_eta = A * trial;
    double trial_dev = bernoulli_deviance_eta(y, trial_eta);
    int halvings = 0;
    while (!(trial_dev <= dev) && halvings < opts.max_halvings) {
      scale *= 0.5;
      trial = fit.coefficients + scale * step;
      trial_eta = A * trial;
      trial_dev = bernoulli_deviance_eta(y, trial_eta);
      ++halvings;
    }
    fit.iterations = iter + 1;
    if (!(trial_dev <= dev)) {
      break;  // no descent along the Newton direction
    }
    fit.coefficients = trial;
    eta = trial_eta;
    dev = trial_dev;
    fit.deviance_trace.push_back(dev);

    if (fit.coefficients.norm() > opts.separation_bound || dev < 1e-6) {
      fit.separation = true;
      break;
    }
  }
  fit.deviance = dev;
  fit.aic = dev + 2.0 * static_cast<double>(q);
  if (!fit.converged && !fit.separation) {
    const Vector p = sigmoid(eta);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p[i] < 1e-8 || p[i] > 1.0 - 1e-8) {
        fit.separation = true;
        break;
      }
    }
  }
  return fit;
}

GlmFit fit_glm_irls(const Matrix& X, const Vector& y, const GlmOptions& opts) {
  std::vector<int> all(static_cast<std::size_t>(X.cols()));
  std::iota(all.begin(), all.end(), 0);
  return fit_glm_subset(X, y, all, opts);
}

Vector predict_scores(const GlmFit& fit, const Matrix& X_new) {
  const auto kept = static_cast<Eigen::Index>(fit.kept_features.size());
  if (fit.coefficients.size() != kept + 1) {
    throw Error(ErrorCode::shape_mismatch, "fit coefficients do not match its kept features");
  }
  Vector eta = Vector::Constant(X_new.rows(), fit.coefficients[0]);
  if (X_new.cols() == fit.num_features) {
    for (Eigen::Index k = 0; k < kept; ++k) {
      eta += fit.coefficients[k + 1] * X_new.col(fit.kept_features[static_cast<std::size_t>(k)]);
    }
  } else if (X_new.cols() == kept) {
    eta += X_new * fit.coefficients.tail(kept);
  } else {
    throw Error(ErrorCode::shape_mismatch, "prediction design has " + std::to_string(X_new.cols()) +
                                               " columns, fit expects " + std::to_string(fit.num_features) +
                                               " (or " + std::to_string(kept) + " kept)");
  }
  return eta;
}

GlmFit backward_eliminate(const Matrix& X, const Vector& y, const GlmOptions& opts) {
  std::vector<int> current(static_cast<std::size_t>(X.cols()));
  std::iota(current.begin(), current.end(), 0);
  GlmFit best = fit_glm_subset(X, y, current, opts);
  double best_aic = best.scaled_aic(opts.df_scale);

  while (!current.empty()) {
    double cand_aic = 0.0;
    int drop = -1;
    GlmFit cand_fit;
    for (std::size_t k = 0; k < current.size(); ++k) {
      std::vector<int> reduced = current;
      reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(k));
      GlmFit f = fit_glm_subset(X, y, reduced, opts);
      const double a = f.scaled_aic(opts.df_scale);
      if (drop < 0 || a < cand_aic) {
        cand_aic = a;
        drop = static_cast<int>(k);
        cand_fit = std::move(f);
      }
    }
    if (!(cand_aic < best_aic)) break;
    current.erase(current.begin() + drop);
    best = std::move(cand_fit);
    best_aic = cand_aic;
  }
  return best;
}

}  // namespace addlogit
