#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "addlogit/logistic_glm.hpp"

namespace addlogit {

enum class FunctionSet { set1, set2 };

struct GeneratorSpec {
  FunctionSet set = FunctionSet::set1;
  int dim = 5;
  int n = 100;
  std::uint64_t seed = 1;
  // Stream id mixed into the seed, so train and test draws of one
  // replication are independent.
  std::uint64_t stream = 0;
  // Zero-based feature indices carrying g1, g2, g3 (x1, x3, x5).
  static constexpr int kEffective[3] = {0, 2, 4};
};

struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;
  std::optional<Vector> oracle_eta;
  int regenerations = 0;  // retries needed to get both classes
  int dropped_rows = 0;   // rows removed while loading (CSV only)

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
};

// The effective-variable functions g1..g3 of each set.
double effect_g1(FunctionSet set, double x);
double effect_g2(FunctionSet set, double x);
double effect_g3(FunctionSet set, double x);

// True log-odds 3 (-0.7 + g1(x1) + g2(x3) + g3(x5)) for one row.
double oracle_log_odds(FunctionSet set, const Vector& row);
Vector oracle_log_odds(FunctionSet set, const Matrix& X);

// X ~ U[-1,1]^{n x d}, y ~ Bernoulli(sigmoid(eta)).  A draw lacking one class
// is regenerated with the next seed (up to 100 times).
Dataset gen_dataset(const GeneratorSpec& spec);

// AUC of the true log-odds on a fresh draw of n_test rows.
double oracle_auc(const GeneratorSpec& spec, int n_test);

// AUC of the stored oracle_eta on a dataset (throws when it has none).
double oracle_auc(const Dataset& data);

std::string to_string(FunctionSet set);

}  // namespace addlogit
