// gradfilter: experiment runner.
//
//   gradfilter [command] [--config FILE] [--out DIR] [--set key=value ...]

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradfilter/config.hpp"
#include "gradfilter/errors.hpp"
#include "gradfilter/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gradient-filtering experiment runner"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  app.add_option("command", command, "train | cost-sweep | verify-prop1 | dc-ratio | snr-probe");
  app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", overrides, "override one key (key=value), repeatable");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? gradfilter::kExitOk : gradfilter::kExitInvalid;
  }

  try {
    gradfilter::ExperimentCfg cfg = config_path.empty()
                                        ? gradfilter::ExperimentCfg{}
                                        : gradfilter::ExperimentCfg::from_file(config_path);
    for (const std::string& o : overrides) cfg.set_override(o);
    if (!command.empty()) cfg.set("command", command);
    if (!out_dir.empty()) cfg.set("out", out_dir);

    const gradfilter::RunResult result = gradfilter::run_experiment(cfg);
    for (const auto& f : result.files) std::printf("wrote %s\n", f.string().c_str());
    if (!result.message.empty()) {
      std::fprintf(result.exit_code == 0 ? stdout : stderr, "%s\n", result.message.c_str());
    }
    return result.exit_code;
  } catch (const gradfilter::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const gradfilter::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const gradfilter::ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return gradfilter::kExitInvalid;
}
