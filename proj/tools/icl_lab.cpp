// icl_lab: simulate, verify, rd-curve, icl and bounds subcommands.
//
// Exit codes: 0 success, 1 runtime or check failure, 2 invalid usage/config.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "icl/experiment.hpp"
#include "icl/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  if (config_required) opt->required();
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--threads", c.threads, "worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output directory (default: stdout)");
  app->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

icl::ExperimentConfig resolve(const Common& c) {
  icl::ExperimentConfig cfg =
      c.config.empty() ? icl::parse_config(json::object()) : icl::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  return cfg;
}

void emit(const Common& c, const icl::ExperimentConfig& cfg, const std::string& command,
          const icl::Table& table) {
  if (c.out.empty()) {
    if (c.format == "json") {
      std::cout << icl::table_json(table).dump(2) << '\n';
    } else {
      icl::write_csv(std::cout, table);
    }
    return;
  }
  fs::create_directories(c.out);
  const fs::path dir(c.out);
  if (c.format == "json") {
    std::ofstream(dir / "results.json") << icl::table_json(table).dump(2) << '\n';
  } else {
    std::ofstream out(dir / "results.csv");
    icl::write_csv(out, table);
  }
  std::ofstream(dir / "manifest.json") << icl::manifest(cfg, command).dump(2) << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"Numerical lab for Bayesian error decompositions of in-context learning"};
  app.set_version_flag("--version", ICL_VERSION);
  app.require_subcommand(1);

  Common sim, ver, rd, icl_opts, bnd;
  auto* simulate = app.add_subcommand("simulate", "loss and decomposition over a (M, T) grid");
  add_common(simulate, sim, true);

  auto* verify = app.add_subcommand("verify", "run named checks or the full battery");
  add_common(verify, ver, false);
  std::vector<std::string> checks;
  bool all = false;
  verify->add_option("--check", checks, "check name (repeatable)");
  verify->add_flag("--all", all, "run every check, including report-only ones");
  bool list = false;
  verify->add_flag("--list", list, "list check names and exit");

  auto* rd_curve = app.add_subcommand("rd-curve", "information-bottleneck or Gaussian-channel curves");
  add_common(rd_curve, rd, true);

  auto* icl_cmd = app.add_subcommand("icl", "exact in-context terms over (M, T, tau)");
  add_common(icl_cmd, icl_opts, true);

  auto* bounds = app.add_subcommand("bounds", "closed-form bounds over a parameter grid");
  add_common(bounds, bnd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      const auto cfg = resolve(sim);
      const auto rows = icl::run_simulation(cfg);
      emit(sim, cfg, "simulate", icl::results_table(rows));
      for (const auto& r : rows) {
        // Exact Bayesian rows must satisfy the decomposition identity.
        if (r.predictor == "bayes" && r.loss_stderr == 0.0 && std::isfinite(r.residual) &&
            r.residual > 1e-9) {
          std::cerr << "decomposition residual " << r.residual << " at M=" << r.M << " T=" << r.T << '\n';
          return 1;
        }
      }
      return 0;
    }
    if (*verify) {
      if (list) {
        for (const auto& e : icl::battery()) {
          std::cout << e.name << (e.asserted ? "" : " (report-only)") << '\n';
        }
        return 0;
      }
      const auto cfg = resolve(ver);
      std::vector<std::string> names = checks.empty() ? cfg.checks : checks;
      if (names.empty() && !all) {
        for (const auto& e : icl::battery())
          if (e.asserted) names.push_back(e.name);
      }
      const auto reports = icl::run_battery(all ? std::vector<std::string>{} : names, cfg.seed, cfg.threads);
      json arr = json::array();
      bool failed = false;
      for (const auto& r : reports) {
        arr.push_back(r.to_json());
        std::cerr << (r.passed ? "PASS " : (r.asserted ? "FAIL " : "WARN ")) << r.name
                  << " margin=" << r.margin << '\n';
        failed = failed || (r.asserted && !r.passed);
      }
      if (ver.out.empty()) {
        std::cout << arr.dump(2) << '\n';
      } else {
        fs::create_directories(ver.out);
        std::ofstream(fs::path(ver.out) / "verify.json") << arr.dump(2) << '\n';
        std::ofstream(fs::path(ver.out) / "manifest.json") << icl::manifest(cfg, "verify").dump(2) << '\n';
      }
      return failed ? 1 : 0;
    }
    if (*rd_curve) {
      const auto cfg = resolve(rd);
      emit(rd, cfg, "rd-curve", icl::run_rd_curve(cfg));
      return 0;
    }
    if (*icl_cmd) {
      const auto cfg = resolve(icl_opts);
      const auto rows = icl::run_icl(cfg);
      emit(icl_opts, cfg, "icl", icl::results_table(rows));
      for (const auto& r : rows) {
        if (r.margin < -1e-9) return 1;
      }
      return 0;
    }
    if (*bounds) {
      const auto cfg = resolve(bnd);
      emit(bnd, cfg, "bounds", icl::run_bounds(cfg.bounds));
      return 0;
    }
  } catch (const icl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const icl::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const icl::UnsupportedMode& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
