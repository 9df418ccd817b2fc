#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "addlogit/rng.hpp"

namespace addlogit::testing {

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

inline Eigen::MatrixXd uniform_matrix(CounterRng& rng, Eigen::Index n, Eigen::Index p, double lo = -1.0,
                                      double hi = 1.0) {
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.uniform(lo, hi);
  }
  return X;
}

inline double plain_sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

// Bernoulli labels for a given linear predictor.
inline Eigen::VectorXd draw_labels(CounterRng& rng, const Eigen::VectorXd& eta) {
  Eigen::VectorXd y(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) y[i] = rng.uniform() < plain_sigmoid(eta[i]) ? 1.0 : 0.0;
  return y;
}

// Brute-force Mann-Whitney count over all (positive, negative) pairs.
inline double pair_count_auc(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  double concordant = 0.0;
  double pairs = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (y[i] != 1.0) continue;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (y[j] != 0.0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) {
        concordant += 1.0;
      } else if (s[i] == s[j]) {
        concordant += 0.5;
      }
    }
  }
  return concordant / pairs;
}

// -2 log-likelihood written out term by term, no clipping.
inline double direct_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double p = plain_sigmoid(eta[i]);
    dev -= 2.0 * (y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
  }
  return dev;
}

}  // namespace addlogit::testing
