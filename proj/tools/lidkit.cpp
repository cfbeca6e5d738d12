// lidkit command-line tool: synthetic data generation, training,
// evaluation and the experiment harness. Exit codes: 0 success, 1 runtime
// error, 2 usage error.

#include <iostream>
#include <string>
#include <vector>

#include "lidkit/commands.hpp"
#include "lidkit/config.hpp"
#include "lidkit/experiments.hpp"

namespace {

const char* kUsage = R"(usage: lidkit <command> [--config=FILE] [--key=value ...]

commands:
  gen        generate a synthetic corpus        (writes <out>)
  train      train a model                      (writes <checkpoint>, <history_out>)
  eval       evaluate a checkpoint              (writes <report_out>)
  sweep-eta  retrain across eta values          (writes <sweep_out>)
  project    PCA->LDA projection export         (writes <projection_out>.*)
  weights    print the prior-derived weight tables
  suite      paired variant comparison          (writes <results_dir>/suite_*.tsv)
  backends   cosine / MCLR / staircase table    (writes <results_dir>/backends_results.tsv)
  loso       leave-one-speaker-out repetitions  (writes <results_dir>/loso_results.tsv)

options come from defaults, then the config file, then --key=value
overrides (later wins). LIDKIT_LOG=0 silences progress output.
)";

}  // namespace

int main(int argc, char** argv) {
  using namespace lidkit;
  if (argc < 2) {
    std::cerr << kUsage;
    return 2;
  }
  std::string command = argv[1];
  if (command == "-h" || command == "--help" || command == "help") {
    std::cout << kUsage;
    return 0;
  }
  try {
    Config cfg;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string config_file;
    for (int i = 2; i < argc; ++i) {
      std::string arg = argv[i];
      if (arg.rfind("--", 0) != 0)
        fail_usage("expected --key=value, got '", arg, "'");
      std::size_t eq = arg.find('=');
      if (eq == std::string::npos)
        fail_usage("expected --key=value, got '", arg, "'");
      std::string key = arg.substr(2, eq - 2);
      std::string value = arg.substr(eq + 1);
      if (key == "config")
        config_file = value;
      else
        overrides.emplace_back(key, value);
    }
    if (!config_file.empty()) load_config_file(cfg, config_file);
    for (const auto& [key, value] : overrides) config_set(cfg, key, value);
    validate(cfg);

    if (command == "gen") cmd_gen(cfg);
    else if (command == "train") cmd_train(cfg);
    else if (command == "eval") cmd_eval(cfg);
    else if (command == "sweep-eta") cmd_sweep_eta(cfg);
    else if (command == "project") cmd_project(cfg);
    else if (command == "weights") cmd_weights(cfg);
    else if (command == "suite") run_suite(cfg);
    else if (command == "backends") run_backends(cfg);
    else if (command == "loso") run_loso(cfg);
    else fail_usage("unknown command '", command, "'");
    return 0;
  } catch (const lidkit::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
