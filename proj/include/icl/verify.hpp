#pragma once

// Verification checks. Each returns a CheckReport whose margin is the
// smallest (allowed - observed) over its sub-checks, slack included:
// tolerance for exact quantities, 3 standard errors for Monte Carlo means.
// passed <=> margin >= 0.

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "icl/environments.hpp"

namespace icl {

struct CheckReport {
  std::string name;
  bool passed = false;
  bool asserted = true;  // false: report-only
  double margin = 0.0;
  double tolerance = 0.0;  // exact tolerance or the MC slack multiplier
  std::size_t n_samples = 0;
  double std_error = 0.0;  // NaN when exact
  nlohmann::json worst_case = nlohmann::json::object();
  nlohmann::json details = nlohmann::json::object();
  std::string notes;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

CheckReport check_softmax_kl(std::size_t n_pairs, std::size_t max_dim, double scale,
                             std::uint64_t seed);

CheckReport check_logistic_pointwise(double grid_min, double grid_max, double step);

CheckReport check_layer_lipschitz(std::size_t d, std::size_t r, std::size_t K,
                                  std::size_t n_trials, std::uint64_t seed, unsigned threads = 1);

/// Part (i): single-layer output perturbation with E||V-Ṽ||² = ε and
/// E||A-Ã||² = ε/r. Part (ii): per-step KL when layer i of L is perturbed
/// with element variances ε/d² and ε/r, for every i.
CheckReport check_perturbation_distortion(std::size_t d, std::size_t r, std::size_t K,
                                          std::size_t L, double epsilon, std::size_t n_trials,
                                          std::uint64_t seed, unsigned threads = 1);

/// Exact decomposition identity plus posterior optimality against the
/// uniform, frozen-prior and a misspecified predictor.
CheckReport check_decomposition(const Environment& env, std::size_t num_documents,
                                std::size_t length);

enum class SandwichMode { single, meta };

CheckReport check_rd_sandwich(const Environment& env, std::size_t length, SandwichMode mode,
                              std::size_t num_documents = 1, std::uint64_t seed = 0);

/// Expected number of distinct categories among M Dirichlet-multinomial draws.
double polya_expected_unique(double R, std::size_t N, std::size_t M);

/// Entropy of the assignment sequence b_{1:M} under the Pólya urn, in nats.
double polya_assignment_entropy(double R, std::size_t N, std::size_t M);

/// Entropy of the count vector of b_{1:M} (sufficient for ψ), in nats.
double polya_count_entropy(double R, std::size_t N, std::size_t M);

CheckReport check_polya_unique(double R, std::size_t N, std::size_t M, std::size_t n_trials,
                               std::uint64_t seed);

CheckReport check_misspecified(const Environment& env, const Pmf& alternative,
                               std::size_t num_documents, std::size_t length);

struct IclCheckConfig {
  std::vector<Pmf> component_rows;  // iid token laws of the N components
  Pmf mixing = Pmf::uniform(1);     // ψ known to the in-context learner
  std::size_t tau_max = 32;
  Environment hierarchical = TabularSpec{};  // enumerable discrete-ψ mixture
  std::size_t pretrain_documents = 2;
  std::size_t length = 2;
};

/// Default: N = 4, d = 4, row i puts 0.7 on token i; two-coin hierarchy.
IclCheckConfig default_icl_config();

CheckReport check_icl(const IclCheckConfig& config);

/// Loss of prior particles minus the omniscient loss against the logistic
/// bound. Report-only in the battery: the particle posterior is approximate.
CheckReport check_logistic_bound(std::size_t d, std::size_t T, std::size_t particles,
                                 std::size_t n_trials, std::uint64_t seed, unsigned threads = 1);

/// Named checks at their default sizes.
struct BatteryEntry {
  std::string name;
  bool asserted;
  std::function<std::vector<CheckReport>(std::uint64_t seed, unsigned threads)> run;
};
const std::vector<BatteryEntry>& battery();

std::vector<CheckReport> run_battery(const std::vector<std::string>& names, std::uint64_t seed,
                                     unsigned threads);

}  // namespace icl
