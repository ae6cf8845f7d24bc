// Command-line front end. Everything goes through the C API.
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmspde/pmspde.h"

namespace {

void print_log(const char* message, void*) { std::fprintf(stderr, "[pmspde] %s\n", message); }

int report(int status, const std::string& context) {
  if (status != PMSPDE_OK) std::fprintf(stderr, "error: %s%s\n", context.c_str(), pmspde_last_error());
  return status;
}

void print_keys() {
  for (size_t i = 0; i < pmspde_config_key_count(); ++i) {
    const char* def = pmspde_config_key_default(i);
    const char* desc = pmspde_config_key_description(i);
    std::printf("%-30s %-22s %s\n", pmspde_config_key_name(i), *def ? def : "(unset)", desc);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal PM10 mapping: fit, predict, cross-validate, simulate and derive products"};
  app.set_version_flag("--version", std::string(pmspde_version()));

  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
  app.add_option("command", command, "fit | predict | cv | simulate | products | keys")
      ->required()
      ->check(CLI::IsMember({"fit", "predict", "cv", "simulate", "products", "keys"}));
  app.add_option("-c,--config", config_path, "run configuration (TOML)");
  app.add_option("-s,--set", overrides, "override a config key: section.name=value")->take_all();
  app.add_flag("-q,--quiet", quiet, "suppress progress messages");

  // Shortcuts for frequently changed keys.
  struct Shortcut {
    const char* flag;
    const char* key;
    const char* help;
    std::string value;
  };
  std::vector<Shortcut> shortcuts = {
      {"--output", "paths.output", "output directory", {}},
      {"--month", "data.month", "month to process (1-12)", {}},
      {"--seed", "run.seed", "random seed", {}},
      {"--threads", "run.threads", "worker threads", {}},
      {"--n-samples", "inference.n_samples", "posterior draws", {}},
      {"--integration", "inference.integration", "empirical_bayes or ccd", {}},
      {"--inner-max-edge", "mesh.inner_max_edge", "mesh edge inside the station hull (km)", {}},
      {"--outer-max-edge", "mesh.outer_max_edge", "mesh edge in the outer band (km)", {}},
      {"--cutoff", "mesh.cutoff", "merge stations closer than this (km)", {}},
      {"--extension", "mesh.extension", "outer band width (km)", {}},
      {"--trials", "cv.trials", "cross-validation trials", {}},
      {"--threshold", "products.threshold", "exceedance threshold (ug/m3)", {}},
      {"--statistic", "products.statistic", "aggregate over days: mean or pNN.N", {}},
  };
  for (auto& s : shortcuts) app.add_option(s.flag, s.value, std::string(s.help) + " [" + s.key + "]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : PMSPDE_INVALID_ARGUMENT;
  }

  if (command == "keys") {
    print_keys();
    return 0;
  }
  if (!quiet) pmspde_set_log_callback(print_log, nullptr);

  pmspde_config* cfg = nullptr;
  int status = config_path.empty() ? pmspde_config_new(&cfg) : pmspde_config_load(config_path.c_str(), &cfg);
  if (status != PMSPDE_OK) return report(status, "");

  auto set = [&](const std::string& key, const std::string& value) {
    const int st = pmspde_config_set(cfg, key.c_str(), value.c_str());
    if (st != PMSPDE_OK) report(st, "");
    return st;
  };
  for (const auto& s : shortcuts) {
    if (!s.value.empty() && (status = set(s.key, s.value)) != PMSPDE_OK) break;
  }
  for (size_t i = 0; status == PMSPDE_OK && i < overrides.size(); ++i) {
    const auto eq = overrides[i].find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", overrides[i].c_str());
      status = PMSPDE_INVALID_ARGUMENT;
      break;
    }
    status = set(overrides[i].substr(0, eq), overrides[i].substr(eq + 1));
  }
  if (status == PMSPDE_OK) status = report(pmspde_run(command.c_str(), cfg), command + ": ");
  pmspde_config_free(cfg);
  return status;
}
