#pragma once

// Log-loss estimation, exact entropy / mutual-information decompositions
// from enumerated joints, the information-bottleneck rate-distortion solver
// and the Gaussian-channel compression constructions.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "icl/core.hpp"
#include "icl/environments.hpp"
#include "icl/predictors.hpp"

namespace icl {

// ---------------------------------------------------------------------------
// Monte Carlo log-loss.

struct TrialOptions {
  std::size_t n_trials = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Per-trial average log-loss (nats per scored token) and mean ESS.
/// Trial i draws parameters, corpus and predictor randomness from streams
/// derived from (seed, i), so two predictors run with the same options see
/// identical parameters and corpora.
struct TrialLosses {
  std::vector<double> loss;
  std::vector<double> ess;  // NaN where not applicable
};

TrialLosses trial_losses(const PredictorSpec& predictor, const Environment& env,
                         std::size_t num_documents, std::size_t length,
                         const TrialOptions& options);

McEstimate estimate_log_loss(const PredictorSpec& predictor, const Environment& env,
                             std::size_t num_documents, std::size_t length,
                             const TrialOptions& options);

/// Mean of a - b over paired trials.
McEstimate paired_difference(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Exact quantities from an enumerated joint.

/// Key extractor over (latent index, sequence index).
using TableKey = std::function<std::uint64_t(std::size_t latent, std::size_t sequence)>;

/// H(A | C) in nats.
double conditional_entropy(const JointTable& table, const TableKey& a, const TableKey& c);
/// I(A; B | C) in nats.
double conditional_mutual_information(const JointTable& table, const TableKey& a,
                                      const TableKey& b, const TableKey& c);

/// Expected total log-loss of a predictor, averaged over the enumerated
/// joint and divided by M*T.
double exact_loss(const PredictorSpec& predictor, const Environment& env, const JointTable& table);

struct DecompositionReport {
  std::string mode;  // "exact" or "monte_carlo"
  double total_loss = 0.0;
  double irreducible = 0.0;
  double meta_estimation = 0.0;
  double intra_estimation = 0.0;
  double residual = 0.0;
  std::vector<double> intra_per_document;  // exact mode
  double total_stderr = 0.0;               // Monte Carlo mode
  double irreducible_stderr = 0.0;
  double meta_stderr = 0.0;
  double intra_stderr = 0.0;
  std::size_t n_trials = 0;
};

/// Single-latent form: L_T = H(H_T|θ)/T + I(H_T;θ)/T, with the estimation
/// term reported as intra_estimation. M documents share no latent here.
DecompositionReport exact_decomposition(const Environment& env, std::size_t length,
                                        std::size_t num_documents = 1,
                                        std::size_t cap = kDefaultJointCap);

/// Four-term form for a mixture with a discrete ψ prior.
DecompositionReport exact_meta_decomposition(const Environment& env, std::size_t num_documents,
                                             std::size_t length,
                                             std::size_t cap = kDefaultJointCap);

/// Terms as loss differences: meta = L(bayes) - L(ψ-informed),
/// intra = L(ψ-informed) - L(omniscient), irreducible = L(omniscient).
DecompositionReport mc_meta_terms(const Environment& env, std::size_t num_documents,
                                  std::size_t length, const TrialOptions& options,
                                  const PredictorSpec& base = {});

/// In-context quantities for document M+1 after M pretraining documents,
/// using the first tau tokens of the new document.
struct IclTerms {
  double loss = 0.0;         // L_{M,T,τ} of the exact posterior
  double irreducible = 0.0;  // H(D_{M+1}|θ_{M+1})/τ
  double meta = 0.0;         // I(H_{M,T};ψ)/(Mτ)
  double in_context = 0.0;   // I(D_{M+1};θ_{M+1}|ψ)/τ
  double bound = 0.0;
  double remark_form = 0.0;  // bound without the meta term
};
IclTerms exact_icl_terms(const Environment& env, std::size_t num_documents, std::size_t length,
                         std::size_t tau, std::size_t cap = kDefaultJointCap);

/// I(D_τ; b) for b ~ weights and D_τ iid from rows[b], by type-class enumeration.
double iid_mixture_information(const std::vector<Pmf>& rows, const Pmf& weights, std::size_t tau);

// ---------------------------------------------------------------------------
// Rate-distortion via the information bottleneck.

struct RdPoint {
  double beta = 0.0;
  double epsilon = 0.0;         // (I(Y;X) - I(Y;X̃)) / horizon
  double rate = 0.0;            // I(X;X̃), nats
  double relevant_info = 0.0;   // I(Y;X̃), nats
};

struct IbOptions {
  std::size_t restarts = 16;
  double tolerance = 1e-10;
  std::size_t max_iterations = 100'000;
  std::uint64_t seed = 0;
};

/// Latent-by-observation joint p(x, y) as a dense matrix (rows sum to p(x)).
Eigen::MatrixXd latent_observation_joint(const JointTable& table, const TableKey& latent,
                                         std::size_t num_latents);

/// Default β grid: 0 plus a geometric grid over [1e-3, 1e4].
std::vector<double> default_beta_grid(std::size_t points = 80);

/// Bottleneck X → X̃ for the joint p(x, y), |X̃| = |X|. Returns the Pareto
/// frontier (rate strictly decreasing in ε) of every converged solution.
std::vector<RdPoint> ib_curve(const Eigen::MatrixXd& joint, const std::vector<double>& betas,
                              double horizon, const IbOptions& options = {});

/// Conditional bottleneck θ → θ̃ given ψ: one joint per ψ atom, weighted by
/// p(ψ), solved with a shared β. Rates and informations are ψ-averaged.
std::vector<RdPoint> conditional_ib_curve(const std::vector<Eigen::MatrixXd>& joints,
                                          const Pmf& psi_weights,
                                          const std::vector<double>& betas, double horizon,
                                          const IbOptions& options = {});

/// Per ψ atom of a discrete-ψ mixture: the joint of (component b_1, document
/// D_1) given ψ = k, normalized, with the ψ prior weights of the atoms kept.
struct ConditionalJoints {
  std::vector<Eigen::MatrixXd> joints;
  Pmf weights = Pmf::uniform(1);
};
ConditionalJoints component_document_joints(const Environment& env, std::size_t length,
                                            std::size_t cap = kDefaultJointCap);

/// Evaluates the rate-distortion function estimate at ε: the lowest rate
/// among frontier points with distortion ≤ ε (infinity if none).
double rd_rate_at(const std::vector<RdPoint>& curve, double epsilon);

struct Sandwich {
  double lower = 0.0;  // sup_ε min{H_ε / h, ε}
  double upper = 0.0;  // inf_ε H_ε / h + ε
  std::vector<double> grid;
};
/// Evaluates both sides over a geometric ε grid of `points` values on
/// [1e-4, max(2 * info_per_step, 2e-4)].
Sandwich rd_sandwich(const std::vector<RdPoint>& curve, double info_per_step, double horizon,
                     std::size_t points = 50);

// ---------------------------------------------------------------------------
// Gaussian-channel constructions θ̃ = θ + Z.

enum class ChannelConstruction { logistic, linrep_meta, linrep_task, transformer_layer };

std::string to_string(ChannelConstruction c);
ChannelConstruction parse_channel(const std::string& name);

struct ChannelParams {
  std::size_t d = 2;
  std::size_t r = 2;
  std::size_t K = 1;
  std::size_t L = 1;
  std::size_t layer = 1;  // perturbed layer i (1-based) for transformer_layer
};

/// Closed-form I(θ; θ̃) of the construction. transformer_layer is the rate
/// of one perturbed layer, (d²/2)ln(1+d/ε) + (r²/2)ln(1+r/ε).
double gaussian_channel_rate(ChannelConstruction c, const ChannelParams& params, double epsilon);

/// Distortion bound the construction is designed to meet.
double gaussian_channel_distortion_bound(ChannelConstruction c, const ChannelParams& params,
                                         double epsilon);

/// MC estimate of the per-step KL between the true next-token law and the
/// law with θ replaced by θ̃. epsilon = 0 yields exactly zero.
McEstimate gaussian_channel_distortion_mc(ChannelConstruction c, const ChannelParams& params,
                                          double epsilon, const TrialOptions& options);

/// Random d x K matrix with unit-norm columns.
Eigen::MatrixXd random_unit_columns(std::size_t d, std::size_t K, RngStream& rng);

}  // namespace icl
