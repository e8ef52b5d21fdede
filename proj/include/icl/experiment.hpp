#pragma once

// Experiment configs (one JSON document each), the batch runners behind the
// command-line subcommands, and CSV/JSON artifact writers.

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icl/environments.hpp"
#include "icl/infotheory.hpp"
#include "icl/predictors.hpp"

namespace icl {

/// Invalid config: the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentGrid {
  std::vector<std::size_t> M{1};
  std::vector<std::size_t> T{1};
  std::vector<std::size_t> tau;  // icl only; empty means τ = T
  std::vector<std::size_t> n_trials{100};
};

struct ExperimentConfig {
  std::string name;
  nlohmann::json raw;  // the document as parsed
  Environment environment;
  PredictorSpec predictor;
  ExperimentGrid grid;
  std::string method = "auto";  // auto | exact | monte_carlo
  std::size_t cap = kDefaultJointCap;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<std::string> checks;
  nlohmann::json rd = nlohmann::json::object();
  nlohmann::json bounds = nlohmann::json::object();
};

Environment parse_environment(const nlohmann::json& j);
PredictorSpec parse_predictor(const nlohmann::json& j);
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

std::uint64_t fnv1a(std::string_view bytes);

struct ResultRow {
  std::string env;
  std::string predictor;
  std::size_t M = 0;
  std::size_t T = 0;
  std::size_t tau = 0;
  double loss_mean = 0.0;
  double loss_stderr = 0.0;
  double irr = 0.0;
  double meta_est = 0.0;
  double intra_est = 0.0;
  double bound_value = 0.0;
  double margin = 0.0;
  double ess = 0.0;
  std::uint64_t seed = 0;
  double residual = 0.0;
};

/// Loss and decomposition per (M, T, n_trials) grid point.
std::vector<ResultRow> run_simulation(const ExperimentConfig& config);

/// Exact in-context terms per (M, T, τ) grid point.
std::vector<ResultRow> run_icl(const ExperimentConfig& config);

/// Estimation-error bound of the environment at (M, T); NaN outside the
/// bound's regime or when no closed form applies.
double environment_bound(const Environment& env, std::size_t M, std::size_t T);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
};

Table results_table(const std::vector<ResultRow>& rows);

/// Information-bottleneck curves (modes single, meta) or Gaussian-channel
/// rate/distortion rows (mode channel).
Table run_rd_curve(const ExperimentConfig& config);

/// Every closed-form bound over the cartesian grid in `grid`.
Table run_bounds(const nlohmann::json& grid);

/// Numbers are printed with %.17g; strings as-is.
void write_csv(std::ostream& out, const Table& table);
nlohmann::json table_json(const Table& table);

nlohmann::json manifest(const ExperimentConfig& config, const std::string& command);

}  // namespace icl
