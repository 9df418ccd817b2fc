#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "addlogit/gam_backfit.hpp"
#include "addlogit/roc_eval.hpp"
#include "addlogit/simgen.hpp"

namespace addlogit {

enum class Method { glm, glm_step, backfit, backfit_step, pspline, pspline_aic, gamboost };

std::string to_string(Method m);
Method parse_method(const std::string& name);
std::vector<Method> parse_method_list(const std::string& csv);
const std::vector<Method>& all_methods();
bool is_additive(Method m);

enum class Mode { simulate, resample };

struct ExperimentConfig {
  Mode mode = Mode::simulate;
  std::vector<Method> methods = all_methods();
  int reps = 100;
  int train_n = 100;
  int test_n = 1000;
  double train_frac = 0.9;
  std::uint64_t seed = 1;
  double df_scale = 1.4;
  std::filesystem::path output_dir = "out";
  FunctionSet set = FunctionSet::set1;
  int dim = 5;
  int threads = 1;
  std::string data_path;
  std::string label_column = "label";
  std::string positive_label = "1";
  double pspline_lambda = 1.0;
  int roc_grid = 101;
  int curve_grid = 50;
  bool warmup = true;

  void validate() const;
};

// Flat "key = value" settings; keys are the CLI flag names without dashes.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

struct FitRecord {
  int rep = 0;
  std::string method;
  std::string status = "ok";  // "ok" or "error"
  std::string error_code;
  double auc = 0.0;
  double partial_auc_0_0_1 = 0.0;
  double sens_fpr_0_05 = 0.0;
  double sens_fpr_0_10 = 0.0;
  double sens_fpr_0_15 = 0.0;
  std::optional<double> oracle_auc;
  double fit_seconds = 0.0;
  bool converged = false;
  bool separation = false;
  double df = 0.0;
  double df_scaled = 0.0;
  std::optional<std::vector<int>> selected_features;
  int n_train = 0;
  int n_test = 0;

  bool operator==(const FitRecord&) const;
};

struct MethodSummary {
  std::string method;
  int n_records = 0;
  int n_failed = 0;
  double mean_auc = 0.0;
  double sd_auc = 0.0;
  double q25_auc = 0.0;
  double median_auc = 0.0;
  double q75_auc = 0.0;
  double mean_partial_auc = 0.0;
  double mean_sens_fpr_0_05 = 0.0;
  double mean_sens_fpr_0_10 = 0.0;
  double mean_sens_fpr_0_15 = 0.0;
  double mean_fit_seconds = 0.0;
};

struct ExperimentReport {
  std::vector<FitRecord> records;  // ordered by (rep, method)
  std::map<std::string, AveragedRoc> averaged_roc;
  std::map<std::string, std::vector<ComponentCurve>> component_curves;  // first replication
  std::vector<MethodSummary> summary;
  std::vector<std::string> feature_names;
};

struct MethodOutcome {
  FitRecord record;
  std::optional<RocCurve> curve;
  std::vector<ComponentCurve> components;
};

// Fits one method on train, scores test.  Fit failures are captured in the
// record, never thrown.
MethodOutcome evaluate_method(Method method, const Dataset& train, const Dataset& test,
                              const ExperimentConfig& config, int curve_grid = 0);

ExperimentReport run_simulation(const ExperimentConfig& config);
ExperimentReport run_resampling(const ExperimentConfig& config, const Dataset& data);

// Per-class proportional split; returns (train rows, test rows).
std::pair<std::vector<int>, std::vector<int>> stratified_split(const Vector& y, double train_frac,
                                                               std::uint64_t seed, int rep);

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::string& positive_label);
// Writes features then a 0/1 label column in the load_csv schema.
void write_csv(const std::filesystem::path& path, const Dataset& data, const std::string& label_column = "label");
Dataset subset_rows(const Dataset& data, const std::vector<int>& rows);

std::vector<MethodSummary> summarize(const std::vector<FitRecord>& records, const std::vector<Method>& methods);

void emit_report(const ExperimentReport& report, const std::filesystem::path& output_dir);
std::vector<FitRecord> read_records(const std::filesystem::path& path);

// Wall time of a callable on the monotonic clock, in seconds.
template <typename F>
double time_fit(F&& fit);

}  // namespace addlogit

#include <chrono>

template <typename F>
double addlogit::time_fit(F&& fit) {
  const auto start = std::chrono::steady_clock::now();
  fit();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}
