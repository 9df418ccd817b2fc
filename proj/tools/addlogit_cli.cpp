#include <CLI11.hpp>

#include <initializer_list>
#include <iostream>
#include <map>
#include <string>

#include "addlogit/error.hpp"
#include "addlogit/harness.hpp"

namespace {

// Flags bound to strings so that only the ones actually given override the
// config file.
struct Flags {
  std::map<std::string, std::string> values;
  std::string config_path;
};

struct FlagSpec {
  const char* name;
  const char* help;
};

void add_flags(CLI::App& cmd, Flags& flags, std::initializer_list<FlagSpec> specs) {
  for (const auto& spec : specs) {
    const std::string name = spec.name;
    cmd.add_option_function<std::string>("--" + name, [&flags, name](const std::string& v) { flags.values[name] = v; },
                                         spec.help);
  }
}

void add_common(CLI::App& cmd, Flags& flags) {
  cmd.add_option("--config", flags.config_path, "flat key = value settings file");
  add_flags(cmd, flags,
            {{"methods", "comma-separated method names, or all"},
             {"reps", "number of replications"},
             {"seed", "master seed"},
             {"df-scale", "AIC df multiplier"},
             {"out", "output directory"},
             {"threads", "worker threads"},
             {"pspline-lambda", "fixed lambda for the pspline method"},
             {"roc-grid", "FPR grid size for averaged ROC curves"},
             {"curve-grid", "grid size for component curves, 0 disables"},
             {"warmup", "one discarded fit per method before timing (true/false)"}});
}

void print_summary(const addlogit::ExperimentReport& report) {
  std::cout << "method\tn\tfailed\tmean_auc\tsd_auc\tmean_fit_seconds\n";
  for (const auto& s : report.summary) {
    std::cout << s.method << '\t' << s.n_records << '\t' << s.n_failed << '\t' << s.mean_auc << '\t' << s.sd_auc
              << '\t' << s.mean_fit_seconds << '\n';
  }
}

addlogit::ExperimentConfig build_config(addlogit::Mode mode, const Flags& flags) {
  addlogit::ExperimentConfig config;
  config.mode = mode;
  if (!flags.config_path.empty()) {
    for (const auto& [k, v] : addlogit::read_config_file(flags.config_path)) addlogit::apply_setting(config, k, v);
  }
  for (const auto& [k, v] : flags.values) addlogit::apply_setting(config, k, v);
  config.mode = mode;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Additive logistic classifiers: simulation and resampling benchmarks"};
  app.require_subcommand(1);

  Flags sim_flags;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo comparison on synthetic data");
  add_common(*sim, sim_flags);
  add_flags(*sim, sim_flags,
            {{"set", "function set, 1 or 2"},
             {"dim", "number of features, 5 or 10"},
             {"train-n", "training rows per replication"},
             {"test-n", "test rows per replication"}});

  Flags res_flags;
  auto* res = app.add_subcommand("resample", "Stratified resampling on a CSV dataset");
  add_common(*res, res_flags);
  add_flags(*res, res_flags,
            {{"data", "CSV file with a header row"},
             {"train-frac", "training fraction of each class"},
             {"label-column", "label column name"},
             {"positive-label", "label value mapped to 1"}});

  CLI11_PARSE(app, argc, argv);

  try {
    addlogit::ExperimentReport report;
    addlogit::ExperimentConfig config;
    if (sim->parsed()) {
      config = build_config(addlogit::Mode::simulate, sim_flags);
      report = addlogit::run_simulation(config);
    } else {
      config = build_config(addlogit::Mode::resample, res_flags);
      if (config.data_path.empty()) {
        throw addlogit::Error(addlogit::ErrorCode::invalid_config, "resample needs --data");
      }
      const auto data = addlogit::load_csv(config.data_path, config.label_column, config.positive_label);
      report = addlogit::run_resampling(config, data);
    }
    addlogit::emit_report(report, config.output_dir);
    print_summary(report);
  } catch (const addlogit::Error& e) {
    std::cerr << "error [" << addlogit::to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
