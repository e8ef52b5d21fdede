#pragma once

// Bayesian posterior predictors (exact and sequential Monte Carlo), the
// omniscient predictor, Pólya-urn hierarchical inference and the
// misspecified-prior variants.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "icl/core.hpp"
#include "icl/environments.hpp"

namespace icl {

// ---------------------------------------------------------------------------
// Finite-hypothesis posterior.

/// Log-weights below this are treated as exact zeros.
inline constexpr double kLogWeightFloor = -745.0;

struct PosteriorState {
  std::vector<LawPtr> support;
  std::vector<double> log_weights;  // normalized: logsumexp = 0

  static PosteriorState from_prior(std::vector<LawPtr> support, const Pmf& prior);
  Pmf weights() const;
  void validate() const;
};

/// Conditions on doc.tokens[t] (the token following doc.tokens[0, t)).
/// Throws DegeneratePosterior when every hypothesis assigns it zero probability.
PosteriorState finite_bayes_update(const PosteriorState& state, const Document& doc, std::size_t t);

/// Conditions on doc.tokens[0, upto) in one pass.
PosteriorState finite_bayes_batch(const PosteriorState& state, const Document& doc,
                                  std::size_t upto);

Pmf finite_bayes_predict(const PosteriorState& state, const Document& doc, std::size_t t);

Pmf omniscient_predict(const ParameterDraw& params, std::size_t document, const Document& doc,
                       std::size_t t);

/// (c_i + R/N) / (sum c + R), with N = counts.size().
Pmf polya_predictive(std::span<const double> counts, double concentration);

/// Same environment with the latent prior replaced: the state prior of a
/// tabular environment or the ψ prior weights of a discrete-ψ mixture.
Environment with_prior(const Environment& env, const Pmf& alternative);

/// The prior over the latent that with_prior replaces.
Pmf latent_prior(const Environment& env);

// ---------------------------------------------------------------------------
// Hierarchical (component-assignment) inference.

/// Predictive law of the next document's component given past assignment counts.
struct PolyaAssignment {
  double concentration;  // R
};
struct DiscretePsiAssignment {
  std::vector<Pmf> atoms;
  Pmf weights;
};
struct FixedAssignment {
  Pmf mixing;
};
using AssignmentPrior = std::variant<PolyaAssignment, DiscretePsiAssignment, FixedAssignment>;

Pmf assignment_predictive(const AssignmentPrior& prior, std::span<const double> counts);

/// Assignment prior a Bayesian learner would use for this environment
/// (tabular: iid states, i.e. a fixed mixing vector).
AssignmentPrior assignment_prior(const Environment& env);

inline constexpr std::size_t kDefaultHierarchicalCap = 1'000'000;

struct HierarchicalOptions {
  /// Exact inference keeps one hypothesis per distinct count vector; the
  /// cap bounds their number.
  std::size_t cap = kDefaultHierarchicalCap;
  bool allow_smc = false;        // fall back to SMC instead of throwing
  bool force_smc = false;
  std::size_t particles = 10'000;
  std::uint64_t seed = 0;
};

/// Posterior predictive over documents generated by a finite component
/// pool with a latent per-document assignment. Documents are processed in
/// order; within the current document the component likelihoods are shared
/// across hypotheses, so the past only enters through assignment counts.
class HierarchicalPredictor {
 public:
  HierarchicalPredictor(std::vector<LawPtr> components, AssignmentPrior prior,
                        HierarchicalOptions options = {});

  Pmf predict(const Document& doc, std::size_t t) const;
  /// Conditions on doc.tokens[t].
  void observe(const Document& doc, std::size_t t);
  /// Folds the finished document into the assignment hypotheses.
  void end_document();

  bool smc() const { return smc_; }
  /// 1 / Σ w² over assignment particles or hypotheses.
  double ess() const;
  std::size_t num_hypotheses() const { return counts_.size(); }
  /// Posterior over the current document's component.
  Pmf component_posterior() const;

 private:
  std::vector<double> mixed_component_prior() const;
  void merge_exact(const std::vector<double>& doc_log_lik);
  void propagate_smc(const std::vector<double>& doc_log_lik);

  std::vector<LawPtr> components_;
  AssignmentPrior prior_;
  HierarchicalOptions options_;
  bool smc_ = false;
  std::vector<std::vector<double>> counts_;  // per hypothesis / particle
  std::vector<double> log_weights_;          // normalized
  std::vector<double> doc_log_lik_;          // per component, current document
  std::vector<double> current_prior_;        // Σ_h w_h predictive(counts_h)
  std::optional<RngStream> rng_;
};

// ---------------------------------------------------------------------------
// Prior-particle importance sampling (continuous θ).

class ParticlePredictor {
 public:
  /// Draws `n` parameter realizations for M documents from the prior of `env`.
  ParticlePredictor(const Environment& env, std::size_t num_documents, std::size_t n,
                    RngStream rng);

  Pmf predict(const Corpus& corpus, std::size_t m, std::size_t t) const;
  void observe(const Corpus& corpus, std::size_t m, std::size_t t);
  /// Single-task environments draw θ_m iid, so weights restart per document.
  void end_document();
  double ess() const;
  std::size_t size() const { return log_weights_.size(); }

 private:
  const SequenceLaw& law(std::size_t particle, std::size_t m) const;
  Eigen::VectorXd logistic_logits(const Document& doc, std::size_t t) const;

  bool joint_;  // particles span all documents (shared meta parameter)
  std::size_t vocab_;
  std::vector<ParameterDraw> particles_;
  Eigen::MatrixXd logistic_theta_;  // n x d fast path; empty otherwise
  std::vector<double> log_weights_;  // max-shifted, unnormalized
};

/// Self-normalized importance sampling predictive for doc m, step t, with
/// prior particles drawn from `rng`. Returns the predictive and its ESS.
std::pair<Pmf, double> particle_prior_predict(const Environment& env, std::size_t n_particles,
                                              const Corpus& history, std::size_t m, std::size_t t,
                                              RngStream rng);

// ---------------------------------------------------------------------------
// Uniform driver interface.

/// Called as: for each document m, for t in [0, T): predict(corpus, m, t),
/// then observe(corpus, m, t); then end_document(corpus, m). The corpus may
/// already hold future tokens; predictors read only the revealed prefix.
class SequencePredictor {
 public:
  virtual ~SequencePredictor() = default;
  virtual Pmf predict(const Corpus& corpus, std::size_t m, std::size_t t) = 0;
  virtual void observe(const Corpus& corpus, std::size_t m, std::size_t t) = 0;
  virtual void end_document(const Corpus& corpus, std::size_t m) = 0;
  /// NaN when not applicable.
  virtual double ess() const;
};

enum class PredictorKind {
  bayes,          // exact posterior where enumerable, prior particles otherwise
  omniscient,     // knows θ_m
  psi_informed,   // knows ψ, infers θ_m
  uniform,
  frozen_prior,   // prior predictive, never updated
  particle,       // prior particles regardless of enumerability
  misspecified,   // exact posterior under an alternative latent prior
};

std::string to_string(PredictorKind kind);
PredictorKind parse_predictor_kind(const std::string& name);

struct PredictorSpec {
  PredictorKind kind = PredictorKind::bayes;
  std::size_t particles = 10'000;
  std::optional<Pmf> alternative_prior;  // for misspecified
  HierarchicalOptions hierarchical;
};

/// Whether the predictor reads the realized parameters.
bool uses_truth(PredictorKind kind);

std::unique_ptr<SequencePredictor> make_predictor(const PredictorSpec& spec,
                                                  const Environment& env,
                                                  const ParameterDraw& truth,
                                                  std::size_t num_documents, RngStream rng);

/// Runs the predictor over the corpus; returns the total log-loss in nats
/// (not normalized) and the mean ESS over predictions.
struct RunResult {
  double total_loss = 0.0;
  double mean_ess = 0.0;
};
RunResult run_predictor(SequencePredictor& predictor, const Corpus& corpus);

}  // namespace icl
