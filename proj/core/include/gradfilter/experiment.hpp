#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gradfilter/config.hpp"

namespace gradfilter {

/// Process exit codes of the runner.
enum ExitCode : int {
  kExitOk = 0,
  kExitInvalid = 1,
  kExitPropertyViolation = 2,
};

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> files;
  std::string message;
};

/// Each runner validates the whole configuration before doing any work,
/// throws ConfigError / FormatError on bad input, and writes its CSVs plus
/// resolved-config.txt into cfg.str("out").
RunResult run_train(const ExperimentCfg& cfg);
RunResult run_cost_sweep(const ExperimentCfg& cfg);
RunResult run_verify_prop1(const ExperimentCfg& cfg);
RunResult run_snr_probe(const ExperimentCfg& cfg);
RunResult run_dc_ratio(const ExperimentCfg& cfg);

/// Dispatches on cfg.str("command").
RunResult run_experiment(const ExperimentCfg& cfg);

}  // namespace gradfilter
