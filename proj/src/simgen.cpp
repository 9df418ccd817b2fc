#include "addlogit/simgen.hpp"

#include <cmath>
#include <span>

#include "addlogit/error.hpp"
#include "addlogit/rng.hpp"
#include "addlogit/roc_eval.hpp"

namespace addlogit {

namespace {

constexpr int kMaxRegenerations = 100;
constexpr std::uint64_t kOracleStream = 0x6f7261636c65ULL;

}  // namespace

double effect_g1(FunctionSet set, double x) {
  return set == FunctionSet::set1 ? x : 2.0 * (-x * x * x + 1.0);
}

double effect_g2(FunctionSet set, double x) {
  return set == FunctionSet::set1 ? 2.0 * x * x : 3.0 * std::exp(-5.0 * x * x);
}

double effect_g3(FunctionSet set, double x) {
  return set == FunctionSet::set1 ? std::sin(5.0 * x) : 4.0 * std::log(1.0 + x * x);
}

double oracle_log_odds(FunctionSet set, const Vector& row) {
  const auto* e = GeneratorSpec::kEffective;
  return 3.0 * (-0.7 + effect_g1(set, row[e[0]]) + effect_g2(set, row[e[1]]) + effect_g3(set, row[e[2]]));
}

Vector oracle_log_odds(FunctionSet set, const Matrix& X) {
  if (X.cols() < 5) {
    throw Error(ErrorCode::shape_mismatch, "oracle log-odds need at least 5 columns");
  }
  Vector eta(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) eta[i] = oracle_log_odds(set, Vector(X.row(i).transpose()));
  return eta;
}

Dataset gen_dataset(const GeneratorSpec& spec) {
  if (spec.dim < 5) {
    throw Error(ErrorCode::invalid_config, "dimension must be at least 5 (x5 is an effective variable)");
  }
  if (spec.n < 1) {
    throw Error(ErrorCode::invalid_config, "sample size must be positive");
  }
  Dataset data;
  for (int j = 0; j < spec.dim; ++j) data.feature_names.push_back("x" + std::to_string(j + 1));
  for (int attempt = 0; attempt <= kMaxRegenerations; ++attempt) {
    CounterRng rng(CounterRng::stream_key(spec.seed + static_cast<std::uint64_t>(attempt), spec.stream));
    Matrix X(spec.n, spec.dim);
    for (int i = 0; i < spec.n; ++i) {
      for (int j = 0; j < spec.dim; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    }
    const Vector eta = oracle_log_odds(spec.set, X);
    Vector y(spec.n);
    for (int i = 0; i < spec.n; ++i) y[i] = rng.uniform() < sigmoid(eta[i]) ? 1.0 : 0.0;
    const double s = y.sum();
    if (s > 0.0 && s < static_cast<double>(spec.n)) {
      data.X = std::move(X);
      data.y = std::move(y);
      data.oracle_eta = eta;
      data.regenerations = attempt;
      return data;
    }
  }
  throw Error(ErrorCode::degenerate_after_retries,
              "no draw with both classes after " + std::to_string(kMaxRegenerations) + " retries (n too small)");
}

double oracle_auc(const Dataset& data) {
  if (!data.oracle_eta) {
    throw Error(ErrorCode::empty_input, "dataset has no oracle log-odds");
  }
  const Vector& eta = *data.oracle_eta;
  return auc(std::span<const double>(eta.data(), static_cast<std::size_t>(eta.size())),
             std::span<const double>(data.y.data(), static_cast<std::size_t>(data.y.size())));
}

double oracle_auc(const GeneratorSpec& spec, int n_test) {
  GeneratorSpec test = spec;
  test.n = n_test;
  test.stream = spec.stream ^ kOracleStream;
  return oracle_auc(gen_dataset(test));
}

std::string to_string(FunctionSet set) { return set == FunctionSet::set1 ? "set1" : "set2"; }

}  // namespace addlogit
