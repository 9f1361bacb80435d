#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "uhlm/config.hpp"
#include "uhlm/driver.hpp"
#include "uhlm/error.hpp"
#include "uhlm/trace_io.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<double> u_th;
  std::optional<std::string> calibration;
  bool oracle = false;
  std::optional<std::string> out;
  std::optional<std::string> backend;
  std::optional<std::size_t> rounds;
  std::optional<unsigned> jobs;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "Run config (.toml or .json)");
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--method", o.method, "llm, slm, hlm, rand-hlm or u-hlm");
  cmd->add_option("--u-th", o.u_th, "U-HLM uncertainty threshold");
  cmd->add_option("--calibration", o.calibration, "Calibration file supplying u_th");
  cmd->add_flag("--oracle", o.oracle, "Compute counterfactual targets on skipped rounds");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--backend", o.backend, "synthetic, ngram or external")
      ->check(CLI::IsMember({"synthetic", "ngram", "external"}));
  cmd->add_option("--rounds", o.rounds, "Maximum rounds per generation");
  cmd->add_option("--jobs", o.jobs, "Parallel sweep cells (default: logical cores)");
}

template <typename T>
void override_key(nlohmann::json& doc, const char* section, const char* key,
                  const std::optional<T>& value, const char* flag) {
  if (!value) return;
  nlohmann::json v = *value;
  if (doc.contains(section) && doc[section].contains(key)) {
    spdlog::info("{} overrides {}.{} ({} -> {})", flag, section, key, doc[section][key].dump(),
                 v.dump());
  } else {
    spdlog::info("{} sets {}.{} = {}", flag, section, key, v.dump());
  }
  doc[section][key] = v;
}

uhlm::RunConfigFile resolve(const Overrides& o) {
  nlohmann::json doc =
      o.config_path.empty() ? nlohmann::json::object() : uhlm::read_config_document(o.config_path);
  override_key(doc, "run", "seed", o.seed, "--seed");
  override_key(doc, "run", "method", o.method, "--method");
  override_key(doc, "run", "u_th", o.u_th, "--u-th");
  override_key(doc, "run", "calibration", o.calibration, "--calibration");
  override_key(doc, "run", "oracle", o.oracle ? std::optional<bool>(true) : std::nullopt,
               "--oracle");
  override_key(doc, "run", "out", o.out, "--out");
  override_key(doc, "backend", "kind", o.backend, "--backend");
  override_key(doc, "run", "rounds", o.rounds, "--rounds");
  override_key(doc, "run", "jobs", o.jobs, "--jobs");
  uhlm::RunConfigFile cfg = uhlm::parse_run_config(doc);
  spdlog::debug("resolved config {}", uhlm::resolved_json(cfg).dump());
  return cfg;
}

int exit_code(uhlm::ErrorKind k) {
  switch (k) {
    case uhlm::ErrorKind::Config: return 2;
    case uhlm::ErrorKind::Backend: return 3;
    case uhlm::ErrorKind::Numerical: return 4;
  }
  return 1;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("uhlm");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("UHLM_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only honour "off" when asked for.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Uncertainty-aware hybrid language model simulator"};
  app.require_subcommand(1);

  Overrides calib_o, run_o, sweep_o;
  CLI::App* calibrate = app.add_subcommand("calibrate", "Fit the uncertainty/rejection model");
  CLI::App* run = app.add_subcommand("run", "Run one generation per seed");
  CLI::App* sweep = app.add_subcommand("sweep", "Run the configured sweep grid");
  add_common(calibrate, calib_o);
  add_common(run, run_o);
  add_common(sweep, sweep_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (calibrate->parsed()) {
      const auto res = uhlm::cmd_calibrate(resolve(calib_o));
      const auto& m = res.model;
      std::cout << "a=" << uhlm::csv_number(m.a()) << " b=" << uhlm::csv_number(m.b())
                << " delta=" << uhlm::csv_number(m.delta()) << "\n"
                << "u_th_averse=" << uhlm::csv_number(m.u_th_averse())
                << " u_th_prone=" << uhlm::csv_number(m.u_th_prone()) << "\n"
                << "expected_risk=" << uhlm::csv_number(m.risk())
                << " risk_upper_bound=" << uhlm::csv_number(m.risk_bound()) << "\n"
                << "wrote " << res.path << " (" << res.samples << " samples)\n";
    } else if (run->parsed()) {
      const auto res = uhlm::cmd_run(resolve(run_o));
      std::cout << uhlm::summary_csv_header() << "\n";
      for (const auto& row : res.rows) std::cout << uhlm::summary_csv_row(row) << "\n";
      std::cout << "wrote " << res.summary_path << "\n";
    } else if (sweep->parsed()) {
      const auto res = uhlm::cmd_sweep(resolve(sweep_o));
      std::size_t failed = 0;
      for (const auto& row : res.rows) failed += row.status != "ok";
      std::cout << "wrote " << res.path << " (" << res.rows.size() << " cells, " << failed
                << " failed)\n";
    }
  } catch (const uhlm::Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return 1;
  }
  return 0;
}
