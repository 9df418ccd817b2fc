#include "addlogit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "addlogit/error.hpp"
#include "addlogit/gam_pspline.hpp"
#include "addlogit/gamboost.hpp"
#include "addlogit/rng.hpp"

namespace addlogit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(ErrorCode::invalid_config, what + ": not a number: '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(ErrorCode::invalid_config, what + ": not an integer: '" + s + "'");
  }
  return v;
}

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

// ---------------------------------------------------------------------------
// methods and configuration

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {Method::glm,     Method::glm_step,    Method::backfit, Method::backfit_step,
                                              Method::pspline, Method::pspline_aic, Method::gamboost};
  return methods;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::glm: return "glm";
    case Method::glm_step: return "glm_step";
    case Method::backfit: return "backfit";
    case Method::backfit_step: return "backfit_step";
    case Method::pspline: return "pspline";
    case Method::pspline_aic: return "pspline_aic";
    case Method::gamboost: return "gamboost";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::invalid_config, "unknown method '" + name + "'");
}

std::vector<Method> parse_method_list(const std::string& csv) {
  std::vector<Method> out;
  const std::string t = trim(csv);
  if (t.empty() || t == "none") return out;
  if (t == "all") return all_methods();
  for (const auto& name : split(t, ',')) {
    if (name.empty()) continue;
    const Method m = parse_method(name);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

bool is_additive(Method m) {
  return m == Method::backfit || m == Method::backfit_step || m == Method::pspline || m == Method::pspline_aic ||
         m == Method::gamboost;
}

void ExperimentConfig::validate() const {
  if (reps < 1) throw Error(ErrorCode::invalid_config, "reps must be >= 1");
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error(ErrorCode::invalid_config, "train-frac must be in (0,1)");
  if (mode == Mode::simulate) {
    if (dim != 5 && dim != 10) throw Error(ErrorCode::invalid_config, "dim must be 5 or 10");
    if (train_n < 2 || test_n < 2) throw Error(ErrorCode::invalid_config, "train-n and test-n must be >= 2");
  }
  if (!(df_scale > 0.0)) throw Error(ErrorCode::invalid_config, "df-scale must be positive");
  if (threads < 1) throw Error(ErrorCode::invalid_config, "threads must be >= 1");
  if (roc_grid < 2 || curve_grid < 2) throw Error(ErrorCode::invalid_config, "grid sizes must be >= 2");
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '_', '-');
  const std::string value = unquote(trim(raw_value));
  if (key == "mode") {
    if (value == "simulate") {
      c.mode = Mode::simulate;
    } else if (value == "resample") {
      c.mode = Mode::resample;
    } else {
      throw Error(ErrorCode::invalid_config, "mode must be simulate or resample");
    }
  } else if (key == "set") {
    const int s = parse_int(value, key);
    if (s != 1 && s != 2) throw Error(ErrorCode::invalid_config, "set must be 1 or 2");
    c.set = s == 1 ? FunctionSet::set1 : FunctionSet::set2;
  } else if (key == "dim") {
    c.dim = parse_int(value, key);
  } else if (key == "reps") {
    c.reps = parse_int(value, key);
  } else if (key == "methods") {
    c.methods = parse_method_list(value);
  } else if (key == "seed") {
    std::uint64_t s = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), s);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
      throw Error(ErrorCode::invalid_config, "seed: not an unsigned integer: '" + value + "'");
    }
    c.seed = s;
  } else if (key == "train-n") {
    c.train_n = parse_int(value, key);
  } else if (key == "test-n") {
    c.test_n = parse_int(value, key);
  } else if (key == "train-frac") {
    c.train_frac = parse_double(value, key);
  } else if (key == "label-column") {
    c.label_column = value;
  } else if (key == "positive-label") {
    c.positive_label = value;
  } else if (key == "df-scale") {
    c.df_scale = parse_double(value, key);
  } else if (key == "out") {
    c.output_dir = value;
  } else if (key == "threads") {
    c.threads = parse_int(value, key);
  } else if (key == "data") {
    c.data_path = value;
  } else if (key == "pspline-lambda") {
    c.pspline_lambda = parse_double(value, key);
  } else if (key == "roc-grid") {
    c.roc_grid = parse_int(value, key);
  } else if (key == "curve-grid") {
    c.curve_grid = parse_int(value, key);
  } else if (key == "warmup") {
    c.warmup = value == "1" || value == "true" || value == "yes";
  } else {
    throw Error(ErrorCode::invalid_config, "unknown setting '" + key + "'");
  }
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// records

bool FitRecord::operator==(const FitRecord& o) const {
  return rep == o.rep && method == o.method && status == o.status && error_code == o.error_code &&
         same_double(auc, o.auc) && same_double(partial_auc_0_0_1, o.partial_auc_0_0_1) &&
         same_double(sens_fpr_0_05, o.sens_fpr_0_05) && same_double(sens_fpr_0_10, o.sens_fpr_0_10) &&
         same_double(sens_fpr_0_15, o.sens_fpr_0_15) && oracle_auc.has_value() == o.oracle_auc.has_value() &&
         (!oracle_auc || same_double(*oracle_auc, *o.oracle_auc)) && same_double(fit_seconds, o.fit_seconds) &&
         converged == o.converged && separation == o.separation && same_double(df, o.df) &&
         same_double(df_scaled, o.df_scaled) && selected_features == o.selected_features && n_train == o.n_train &&
         n_test == o.n_test;
}

namespace {

using Json = nlohmann::ordered_json;

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_from(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

Json to_json(const FitRecord& r) {
  Json j;
  j["rep"] = r.rep;
  j["method"] = r.method;
  j["status"] = r.status;
  j["error_code"] = r.error_code;
  j["auc"] = number_or_null(r.auc);
  j["partial_auc_0_0.1"] = number_or_null(r.partial_auc_0_0_1);
  j["sens_fpr_0.05"] = number_or_null(r.sens_fpr_0_05);
  j["sens_fpr_0.10"] = number_or_null(r.sens_fpr_0_10);
  j["sens_fpr_0.15"] = number_or_null(r.sens_fpr_0_15);
  j["oracle_auc"] = r.oracle_auc ? number_or_null(*r.oracle_auc) : Json(nullptr);
  j["converged"] = r.converged;
  j["separation"] = r.separation;
  j["df"] = number_or_null(r.df);
  j["df_scaled"] = number_or_null(r.df_scaled);
  j["selected_features"] = r.selected_features ? Json(*r.selected_features) : Json(nullptr);
  j["n_train"] = r.n_train;
  j["n_test"] = r.n_test;
  j["fit_seconds"] = r.fit_seconds;
  return j;
}

FitRecord from_json(const Json& j) {
  FitRecord r;
  r.rep = j.at("rep").get<int>();
  r.method = j.at("method").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.error_code = j.at("error_code").get<std::string>();
  r.auc = number_from(j.at("auc"));
  r.partial_auc_0_0_1 = number_from(j.at("partial_auc_0_0.1"));
  r.sens_fpr_0_05 = number_from(j.at("sens_fpr_0.05"));
  r.sens_fpr_0_10 = number_from(j.at("sens_fpr_0.10"));
  r.sens_fpr_0_15 = number_from(j.at("sens_fpr_0.15"));
  if (!j.at("oracle_auc").is_null()) r.oracle_auc = j.at("oracle_auc").get<double>();
  r.converged = j.at("converged").get<bool>();
  r.separation = j.at("separation").get<bool>();
  r.df = number_from(j.at("df"));
  r.df_scaled = number_from(j.at("df_scaled"));
  if (!j.at("selected_features").is_null()) r.selected_features = j.at("selected_features").get<std::vector<int>>();
  r.n_train = j.at("n_train").get<int>();
  r.n_test = j.at("n_test").get<int>();
  r.fit_seconds = j.at("fit_seconds").get<double>();
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// fitting one method

namespace {

struct FittedScores {
  Vector scores;
  bool converged = false;
  bool separation = false;
  double df = 0.0;
  double df_scaled = 0.0;
  std::optional<std::vector<int>> selected;
  std::optional<AdditiveFit> additive;
};

std::vector<int> all_indices(Eigen::Index p) {
  std::vector<int> v(static_cast<std::size_t>(p));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

FittedScores fit_method(Method method, const Dataset& train, const Dataset& test, const ExperimentConfig& config,
                        double& seconds) {
  FittedScores out;
  const double scale = config.df_scale;
  switch (method) {
    case Method::glm:
    case Method::glm_step: {
      GlmOptions opts;
      opts.df_scale = scale;
      GlmFit fit;
      seconds = time_fit([&] {
        fit = method == Method::glm ? fit_glm_irls(train.X, train.y, opts) : backward_eliminate(train.X, train.y, opts);
      });
      out.scores = predict_scores(fit, test.X);
      out.converged = fit.converged;
      out.separation = fit.separation;
      out.df = fit.df();
      out.df_scaled = scale * fit.df();
      out.selected = fit.kept_features;
      break;
    }
    case Method::backfit:
    case Method::backfit_step: {
      AdditiveFit fit;
      seconds = time_fit([&] {
        if (method == Method::backfit) {
          fit = local_scoring(train.X, train.y, std::vector<double>(static_cast<std::size_t>(train.cols()), 4.0));
        } else {
          StepwiseOptions opts;
          opts.df_scale = scale;
          fit = stepwise_components(train.X, train.y, opts);
        }
      });
      out.scores = fit.predict(test.X);
      out.converged = fit.converged;
      out.separation = fit.separation;
      out.df = fit.effective_df;
      out.df_scaled = scale * fit.effective_df;
      out.selected = fit.kept_features();
      out.additive = std::move(fit);
      break;
    }
    case Method::pspline:
    case Method::pspline_aic: {
      PsplineOptions opts;
      opts.df_scale = scale;
      PsplineFit fit;
      seconds = time_fit([&] {
        if (method == Method::pspline) {
          fit = fit_pspline(train.X, train.y,
                            std::vector<double>(static_cast<std::size_t>(train.cols()), config.pspline_lambda), opts);
        } else {
          fit = select_lambda_aic(train.X, train.y, default_lambda_grid(), opts);
        }
      });
      out.scores = fit.predict(test.X);
      out.converged = fit.converged;
      out.separation = fit.separation;
      out.df = fit.effective_df;
      out.df_scaled = scale * fit.effective_df;
      out.selected = all_indices(train.cols());
      break;
    }
    case Method::gamboost: {
      BoostFit fit;
      seconds = time_fit([&] { fit = boost_fit(train.X, train.y); });
      out.scores = predict_boost(fit, test.X);
      out.converged = fit.chosen_step < fit.steps_taken;
      out.df = fit.trajectory[static_cast<std::size_t>(fit.chosen_step)].effective_df;
      out.df_scaled = out.df;
      std::set<int> used(fit.selected_sequence.begin(), fit.selected_sequence.begin() + fit.chosen_step);
      out.selected = std::vector<int>(used.begin(), used.end());
      break;
    }
  }
  return out;
}

}  // namespace

MethodOutcome evaluate_method(Method method, const Dataset& train, const Dataset& test,
                              const ExperimentConfig& config, int curve_grid) {
  MethodOutcome outcome;
  FitRecord& r = outcome.record;
  r.method = to_string(method);
  r.n_train = static_cast<int>(train.rows());
  r.n_test = static_cast<int>(test.rows());
  if (test.oracle_eta) r.oracle_auc = oracle_auc(test);
  double seconds = 0.0;
  try {
    FittedScores fitted = fit_method(method, train, test, config, seconds);
    const RocCurve curve = roc_curve(as_span(fitted.scores), as_span(test.y));
    r.auc = auc(as_span(fitted.scores), as_span(test.y));
    r.partial_auc_0_0_1 = partial_auc(curve, 0.0, 0.1);
    r.sens_fpr_0_05 = sensitivity_at_fpr(curve, 0.05);
    r.sens_fpr_0_10 = sensitivity_at_fpr(curve, 0.10);
    r.sens_fpr_0_15 = sensitivity_at_fpr(curve, 0.15);
    r.converged = fitted.converged;
    r.separation = fitted.separation;
    r.df = fitted.df;
    r.df_scaled = fitted.df_scaled;
    r.selected_features = fitted.selected;
    outcome.curve = curve;
    if (curve_grid > 0 && fitted.additive) outcome.components = component_curves(*fitted.additive, curve_grid);
  } catch (const Error& e) {
    r.status = "error";
    r.error_code = std::string(to_string(e.code()));
    r.auc = r.partial_auc_0_0_1 = r.sens_fpr_0_05 = r.sens_fpr_0_10 = r.sens_fpr_0_15 = kNaN;
    r.df = r.df_scaled = kNaN;
  } catch (const std::exception& e) {
    r.status = "error";
    r.error_code = "internal";
    r.auc = r.partial_auc_0_0_1 = r.sens_fpr_0_05 = r.sens_fpr_0_10 = r.sens_fpr_0_15 = kNaN;
    r.df = r.df_scaled = kNaN;
  }
  r.fit_seconds = seconds;
  return outcome;
}

// ---------------------------------------------------------------------------
// experiments

namespace {

using RepOutcome = std::vector<MethodOutcome>;

// Runs `body(rep)` for every replication on a pool of worker threads; output
// slots are indexed by rep so the merge order never depends on scheduling.
template <typename Body>
std::vector<RepOutcome> run_replications(int reps, int threads, Body body) {
  std::vector<RepOutcome> results(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int rep = next++; rep < reps; rep = next++) results[static_cast<std::size_t>(rep)] = body(rep);
  };
  const int n_threads = std::min(threads, reps);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return results;
}

RepOutcome failed_rep(int rep, const ExperimentConfig& config, const std::string& code) {
  RepOutcome out;
  for (Method m : config.methods) {
    MethodOutcome o;
    o.record.rep = rep;
    o.record.method = to_string(m);
    o.record.status = "error";
    o.record.error_code = code;
    o.record.auc = o.record.partial_auc_0_0_1 = kNaN;
    o.record.sens_fpr_0_05 = o.record.sens_fpr_0_10 = o.record.sens_fpr_0_15 = kNaN;
    o.record.df = o.record.df_scaled = kNaN;
    out.push_back(std::move(o));
  }
  return out;
}

RepOutcome evaluate_all(int rep, const Dataset& train, const Dataset& test, const ExperimentConfig& config) {
  RepOutcome out;
  for (Method m : config.methods) {
    MethodOutcome o = evaluate_method(m, train, test, config, rep == 0 ? config.curve_grid : 0);
    o.record.rep = rep;
    out.push_back(std::move(o));
  }
  return out;
}

void warm_up(const Dataset& train, const Dataset& test, const ExperimentConfig& config) {
  for (Method m : config.methods) (void)evaluate_method(m, train, test, config);
}

ExperimentReport assemble(std::vector<RepOutcome> outcomes, const ExperimentConfig& config,
                          std::vector<std::string> feature_names) {
  ExperimentReport report;
  report.feature_names = std::move(feature_names);
  std::map<std::string, std::vector<RocCurve>> curves;
  for (auto& rep : outcomes) {
    for (auto& o : rep) {
      if (o.curve) curves[o.record.method].push_back(std::move(*o.curve));
      if (!o.components.empty()) report.component_curves[o.record.method] = std::move(o.components);
      report.records.push_back(std::move(o.record));
    }
  }
  for (Method m : config.methods) {
    const auto it = curves.find(to_string(m));
    if (it != curves.end() && !it->second.empty()) {
      report.averaged_roc[it->first] = average_roc(it->second, config.roc_grid);
    }
  }
  report.summary = summarize(report.records, config.methods);
  return report;
}

std::uint64_t rep_stream(int rep, int which) { return 2 * static_cast<std::uint64_t>(rep) + static_cast<std::uint64_t>(which); }

}  // namespace

ExperimentReport run_simulation(const ExperimentConfig& config) {
  config.validate();
  auto make_spec = [&](int rep, int which, int n) {
    GeneratorSpec spec;
    spec.set = config.set;
    spec.dim = config.dim;
    spec.n = n;
    spec.seed = config.seed;
    spec.stream = rep_stream(rep, which);
    return spec;
  };
  if (config.warmup && !config.methods.empty()) {
    try {
      warm_up(gen_dataset(make_spec(0, 0, config.train_n)), gen_dataset(make_spec(0, 1, config.test_n)), config);
    } catch (const Error&) {
      // the replication itself will record the failure
    }
  }
  auto outcomes = run_replications(config.reps, config.threads, [&](int rep) {
    try {
      const Dataset train = gen_dataset(make_spec(rep, 0, config.train_n));
      const Dataset test = gen_dataset(make_spec(rep, 1, config.test_n));
      return evaluate_all(rep, train, test, config);
    } catch (const Error& e) {
      return failed_rep(rep, config, std::string(to_string(e.code())));
    }
  });
  std::vector<std::string> names;
  for (int j = 0; j < config.dim; ++j) names.push_back("x" + std::to_string(j + 1));
  return assemble(std::move(outcomes), config, std::move(names));
}

std::pair<std::vector<int>, std::vector<int>> stratified_split(const Vector& y, double train_frac,
                                                               std::uint64_t seed, int rep) {
  std::vector<int> pos;
  std::vector<int> neg;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y[i] == 1.0 ? pos : neg).push_back(static_cast<int>(i));
  if (pos.size() < 2 || neg.size() < 2) {
    throw Error(ErrorCode::class_too_small, "each class needs at least 2 rows (have " + std::to_string(pos.size()) +
                                                " positive, " + std::to_string(neg.size()) + " negative)");
  }
  CounterRng rng(CounterRng::stream_key(seed, static_cast<std::uint64_t>(rep)));
  std::vector<int> train;
  std::vector<int> test;
  for (auto* cls : {&pos, &neg}) {
    auto& idx = *cls;
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      std::swap(idx[i], idx[static_cast<std::size_t>(rng.below(i + 1))]);
    }
    auto k = static_cast<std::size_t>(std::lround(train_frac * static_cast<double>(idx.size())));
    k = std::clamp<std::size_t>(k, 1, idx.size() - 1);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

Dataset subset_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.feature_names = data.feature_names;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  Vector eta;
  if (data.oracle_eta) eta.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out.X.row(i) = data.X.row(rows[k]);
    out.y[i] = data.y[rows[k]];
    if (data.oracle_eta) eta[i] = (*data.oracle_eta)[rows[k]];
  }
  if (data.oracle_eta) out.oracle_eta = std::move(eta);
  return out;
}

ExperimentReport run_resampling(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  // fail fast on a dataset that cannot be split
  (void)stratified_split(data.y, config.train_frac, config.seed, 0);
  if (config.warmup && !config.methods.empty()) {
    const auto [tr, te] = stratified_split(data.y, config.train_frac, config.seed, 0);
    warm_up(subset_rows(data, tr), subset_rows(data, te), config);
  }
  auto outcomes = run_replications(config.reps, config.threads, [&](int rep) {
    const auto [tr, te] = stratified_split(data.y, config.train_frac, config.seed, rep);
    return evaluate_all(rep, subset_rows(data, tr), subset_rows(data, te), config);
  });
  return assemble(std::move(outcomes), config, data.feature_names);
}

// ---------------------------------------------------------------------------
// CSV input

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::string& positive_label) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse_error, path.string() + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  std::vector<std::string> header = split(line, ',');
  for (auto& h : header) h = unquote(h);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw Error(ErrorCode::parse_error, path.string() + ": no label column '" + label_column + "'");
  }
  const auto label_idx = static_cast<std::size_t>(label_it - header.begin());

  auto is_missing = [](const std::string& s) {
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "?";
  };
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  int dropped = 0;
  bool saw_positive = false;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::parse_error, path.string() + ": row " + std::to_string(row_no) + " has " +
                                              std::to_string(fields.size()) + " fields, header has " +
                                              std::to_string(header.size()));
    }
    bool missing = false;
    std::vector<double> values;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == label_idx) continue;
      if (is_missing(fields[c])) {
        missing = true;
        continue;
      }
      double v = 0.0;
      const auto* end = fields[c].data() + fields[c].size();
      const auto res = std::from_chars(fields[c].data(), end, v);
      if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
        throw Error(ErrorCode::parse_error, path.string() + ": row " + std::to_string(row_no) + ", column '" +
                                                header[c] + "': not a number: '" + fields[c] + "'");
      }
      values.push_back(v);
    }
    const std::string label = unquote(fields[label_idx]);
    if (missing || is_missing(label)) {
      ++dropped;
      continue;
    }
    const bool positive = label == positive_label;
    saw_positive = saw_positive || positive;
    rows.push_back(std::move(values));
    labels.push_back(positive ? 1.0 : 0.0);
  }
  if (dropped > 0) {
    std::clog << "warning: " << path.string() << ": dropped " << dropped << " row(s) with missing values\n";
  }
  if (rows.empty()) throw Error(ErrorCode::all_rows_dropped, path.string() + ": no complete rows");
  if (!saw_positive) {
    throw Error(ErrorCode::unknown_label_value, path.string() + ": positive label '" + positive_label +
                                                    "' does not occur in column '" + label_column + "'");
  }
  Dataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_idx) data.feature_names.push_back(header[c]);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(data.feature_names.size());
  data.X.resize(n, d);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    data.y[i] = labels[static_cast<std::size_t>(i)];
  }
  data.dropped_rows = dropped;
  return data;
}

void write_csv(const std::filesystem::path& path, const Dataset& data, const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t j = 0; j < data.feature_names.size(); ++j) out << data.feature_names[j] << ',';
  out << label_column << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) out << data.X(i, j) << ',';
    out << static_cast<int>(data.y[i]) << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// reports

std::vector<MethodSummary> summarize(const std::vector<FitRecord>& records, const std::vector<Method>& methods) {
  std::vector<MethodSummary> out;
  for (Method m : methods) {
    MethodSummary s;
    s.method = to_string(m);
    std::vector<double> aucs;
    double pauc = 0.0;
    double s05 = 0.0;
    double s10 = 0.0;
    double s15 = 0.0;
    double secs = 0.0;
    for (const auto& r : records) {
      if (r.method != s.method) continue;
      ++s.n_records;
      secs += r.fit_seconds;
      if (r.status != "ok") {
        ++s.n_failed;
        continue;
      }
      aucs.push_back(r.auc);
      pauc += r.partial_auc_0_0_1;
      s05 += r.sens_fpr_0_05;
      s10 += r.sens_fpr_0_10;
      s15 += r.sens_fpr_0_15;
    }
    const auto k = static_cast<double>(aucs.size());
    if (!aucs.empty()) {
      s.mean_auc = std::accumulate(aucs.begin(), aucs.end(), 0.0) / k;
      double ss = 0.0;
      for (double a : aucs) ss += (a - s.mean_auc) * (a - s.mean_auc);
      s.sd_auc = aucs.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
      s.q25_auc = quantile(aucs, 0.25);
      s.median_auc = quantile(aucs, 0.5);
      s.q75_auc = quantile(aucs, 0.75);
      s.mean_partial_auc = pauc / k;
      s.mean_sens_fpr_0_05 = s05 / k;
      s.mean_sens_fpr_0_10 = s10 / k;
      s.mean_sens_fpr_0_15 = s15 / k;
    } else {
      s.mean_auc = s.sd_auc = s.q25_auc = s.median_auc = s.q75_auc = kNaN;
      s.mean_partial_auc = s.mean_sens_fpr_0_05 = s.mean_sens_fpr_0_10 = s.mean_sens_fpr_0_15 = kNaN;
    }
    s.mean_fit_seconds = s.n_records > 0 ? secs / s.n_records : 0.0;
    out.push_back(s);
  }
  return out;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::filesystem::path& output_dir) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + output_dir.string() + ": " + ec.message());

  {
    const auto path = output_dir / "records.jsonl";
    auto out = open_output(path);
    for (const auto& r : report.records) out << to_json(r).dump() << '\n';
    check_written(out, path);
  }
  {
    const auto path = output_dir / "summary.tsv";
    auto out = open_output(path);
    out << "method\tn_records\tn_failed\tmean_auc\tsd_auc\tq25_auc\tmedian_auc\tq75_auc\tmean_partial_auc_0_0.1"
           "\tmean_sens_fpr_0.05\tmean_sens_fpr_0.10\tmean_sens_fpr_0.15\tmean_fit_seconds\n";
    for (const auto& s : report.summary) {
      out << s.method << '\t' << s.n_records << '\t' << s.n_failed << '\t' << s.mean_auc << '\t' << s.sd_auc << '\t'
          << s.q25_auc << '\t' << s.median_auc << '\t' << s.q75_auc << '\t' << s.mean_partial_auc << '\t'
          << s.mean_sens_fpr_0_05 << '\t' << s.mean_sens_fpr_0_10 << '\t' << s.mean_sens_fpr_0_15 << '\t'
          << s.mean_fit_seconds << '\n';
    }
    check_written(out, path);
  }
  for (const auto& [method, avg] : report.averaged_roc) {
    const auto path = output_dir / ("roc_" + method + ".tsv");
    auto out = open_output(path);
    out << "fpr\tmean_tpr\tci_lo\tci_hi\n";
    for (std::size_t i = 0; i < avg.fpr_grid.size(); ++i) {
      out << avg.fpr_grid[i] << '\t' << avg.mean_tpr[i] << '\t' << avg.ci_lo[i] << '\t' << avg.ci_hi[i] << '\n';
    }
    check_written(out, path);
  }
  for (const auto& [method, curves] : report.component_curves) {
    const auto path = output_dir / ("components_" + method + ".tsv");
    auto out = open_output(path);
    out << "feature\tx\tf\tse\n";
    for (const auto& c : curves) {
      const auto idx = static_cast<std::size_t>(c.feature_index);
      const std::string name = idx < report.feature_names.size() ? report.feature_names[idx]
                                                                 : "x" + std::to_string(c.feature_index + 1);
      for (std::size_t i = 0; i < c.x.size(); ++i) {
        out << name << '\t' << c.x[i] << '\t' << c.f[i] << '\t' << c.se[i] << '\n';
      }
    }
    check_written(out, path);
  }
}

std::vector<FitRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::vector<FitRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace addlogit
