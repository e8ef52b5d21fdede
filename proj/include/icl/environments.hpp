#pragma once

// Data-generating processes: latent-parameter priors, exact next-token
// laws, document/corpus sampling and exact joint enumeration.

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "icl/core.hpp"

namespace icl {

/// The autoregressive law of one realized latent parameter θ.
class SequenceLaw {
 public:
  virtual ~SequenceLaw() = default;

  virtual std::size_t vocab() const = 0;

  /// P(X_{t+1} | θ, X_1..X_t, exogenous input of step t). Reads
  /// doc.tokens[0, t) and, for input-driven laws, doc.inputs[t].
  virtual Pmf next(const Document& doc, std::size_t t) const = 0;

  /// ln P(X_{t+1} = token | ...). Override when next() is costly.
  virtual double log_prob(const Document& doc, std::size_t t, Token token) const;

  /// out += weight * next(doc, t). Override when next() is costly.
  virtual void accumulate_next(const Document& doc, std::size_t t, double weight,
                               std::span<double> out) const;

  /// The fixed per-step pmf when tokens are iid under this law.
  virtual std::optional<Pmf> iid_pmf() const { return std::nullopt; }
};

using LawPtr = std::shared_ptr<const SequenceLaw>;

// ---------------------------------------------------------------------------
// Tabular (finite θ) environment.

struct TabularState {
  std::string name;
  /// vocab^window rows; row index encodes the last `window` tokens with the
  /// oldest token most significant.
  std::vector<Pmf> rows;
  /// Pmf of X_1. Defaults to rows[0] for iid states and uniform otherwise.
  std::optional<Pmf> initial;
};

struct TabularSpec {
  std::size_t vocab = 2;
  std::size_t window = 0;  // 0 = iid tokens
  std::vector<TabularState> states;
  Pmf prior = Pmf::uniform(1);

  void validate() const;
  Pmf initial_pmf(std::size_t state) const;
  /// Kernel row for the context ending at position t (t >= 1). Contexts
  /// shorter than `window` are left-padded by repeating X_1.
  const Pmf& row(std::size_t state, const Document& doc, std::size_t t) const;
};

/// iid states, one kernel row each.
TabularSpec make_iid_tabular(std::vector<Pmf> rows, Pmf prior);

/// Two iid Bernoulli states with P(token 0) = p and 1 - p, equiprobable prior.
TabularSpec make_two_coin(double p = 0.9);

LawPtr tabular_law(std::shared_ptr<const TabularSpec> spec, std::size_t state);

// ---------------------------------------------------------------------------
// Transformer environment.

struct TransformerConfig {
  std::size_t vocab = 2;           // d; also the embedding dimension
  std::size_t attention_dim = 2;   // r <= d
  std::size_t context = 1;         // K
  std::size_t depth = 1;           // L

  void validate() const;
};

/// Weights of one transformer. Attention matrices are r x r and act on the
/// first r embedding coordinates (for r = d this is the full d x d form).
struct TransformerWeights {
  TransformerConfig config;
  std::vector<Eigen::MatrixXd> attention;  // L matrices, r x r, entries N(0, 1)
  std::vector<Eigen::MatrixXd> value;      // L matrices, d x d, entries N(0, 1/d)
  Eigen::MatrixXd embeddings;              // d x d, column j = Φ_j, unit norm

  void validate() const;
};

/// One-hot embeddings Φ_j = e_j.
Eigen::MatrixXd one_hot_embeddings(std::size_t vocab);

TransformerWeights sample_transformer_weights(const TransformerConfig& config, RngStream& rng,
                                              std::optional<Eigen::MatrixXd> embeddings = {});

/// Column-wise softmax of U^T A U / sqrt(r), A acting on the first r rows.
Eigen::MatrixXd attention_matrix(const Eigen::MatrixXd& input, const Eigen::MatrixXd& attention,
                                 std::size_t attention_dim);

/// Clip(V U Attn(U)).
Eigen::MatrixXd transformer_layer(const Eigen::MatrixXd& input, const Eigen::MatrixXd& attention,
                                  const Eigen::MatrixXd& value, std::size_t attention_dim);

/// d x K matrix of embeddings for the window, left-padded to K columns by
/// repeating the window's first token.
Eigen::MatrixXd embed_window(const TransformerWeights& weights, std::span<const Token> window);

/// U_{t,0}, U_{t,1}, ..., U_{t,L}.
std::vector<Eigen::MatrixXd> transformer_trace(const TransformerWeights& weights,
                                               std::span<const Token> window);

/// Softmax of the right-most column of the final layer output.
Pmf transformer_forward(const TransformerWeights& weights, std::span<const Token> window);

LawPtr transformer_law(std::shared_ptr<const TransformerWeights> weights,
                       std::optional<Pmf> initial = {});

struct TransformerSpec {
  TransformerConfig config;
  std::optional<Pmf> initial;  // defaults to uniform
};

// ---------------------------------------------------------------------------
// Logistic regression and linear representation environments.

/// Inputs X̄_t ~ N(0, I_d) (unscored); scored token 1 with probability
/// 1/(1+exp(-θᵀX̄_t)), token 0 otherwise. θ uniform on the unit ball.
struct LogisticSpec {
  std::size_t dim = 2;
};

LawPtr logistic_law(Eigen::VectorXd theta);

/// θ_m = ψ ξ_m with ψ (d x r) Haar-orthonormal and ξ_m ~ N(0, I_r / r);
/// tokens iid softmax(θ_m) over d symbols.
struct LinRepSpec {
  std::size_t vocab = 4;  // d
  std::size_t rank = 2;   // r
};

LawPtr softmax_law(Eigen::VectorXd logits);

/// Haar-distributed d x r matrix with orthonormal columns.
Eigen::MatrixXd sample_orthonormal(std::size_t rows, std::size_t cols, RngStream& rng);

Eigen::VectorXd sample_unit_ball(std::size_t dim, RngStream& rng);

// ---------------------------------------------------------------------------
// Mixture (meta-learning) environment.

/// Symmetric Dirichlet(R/N, ..., R/N) over mixing vectors.
struct DirichletPsiPrior {};

/// Explicit discrete prior over mixing vectors.
struct DiscretePsiPrior {
  std::vector<Pmf> atoms;
  Pmf weights = Pmf::uniform(1);
};

using PsiPrior = std::variant<DirichletPsiPrior, DiscretePsiPrior>;

/// N fixed transformers drawn once from `seed`.
struct TransformerPool {
  TransformerConfig config;
  std::uint64_t seed = 0;
};

/// Fresh transformer components are drawn with every parameter draw.
struct LatentTransformers {
  TransformerConfig config;
};

using ComponentSource = std::variant<TabularSpec, TransformerPool, LatentTransformers>;

struct MixtureSpec {
  std::size_t num_components = 1;  // N
  double concentration = 1.0;      // R
  ComponentSource source;
  PsiPrior psi_prior;
  /// Materialized pool for known-component sources (empty for latent).
  std::vector<LawPtr> components;

  static MixtureSpec make(ComponentSource source, std::size_t num_components,
                          double concentration, PsiPrior psi_prior);
  void validate() const;
  std::size_t vocab() const;
  bool known_components() const { return !components.empty(); }
};

/// ψ ∈ {(p, 1-p), (1-p, p)} equiprobable over two iid coin components
/// with P(token 0) = q and 1 - q.
MixtureSpec make_two_coin_mixture(double psi_bias = 0.9, double coin_bias = 0.9);

using Environment =
    std::variant<TabularSpec, TransformerSpec, LogisticSpec, LinRepSpec, MixtureSpec>;

std::size_t vocab_size(const Environment& env);
std::string environment_name(const Environment& env);
/// Dimension of exogenous inputs (0 when none).
std::size_t input_dim(const Environment& env);
void validate(const Environment& env);

/// One realization of the latent parameters.
struct ParameterDraw {
  std::optional<Pmf> mixing;                 // ψ of a mixture
  std::optional<std::size_t> psi_atom;       // index of ψ under a discrete prior
  std::optional<Eigen::MatrixXd> basis;      // ψ of linear representation
  std::vector<LawPtr> components;            // mixture components used by this draw
  std::vector<std::size_t> assignment;       // per-document state / component index
  std::vector<Eigen::VectorXd> theta;        // per-document continuous θ
  std::vector<LawPtr> laws;                  // per-document realized law θ_m

  std::size_t num_documents() const { return laws.size(); }
};

/// ψ from the meta prior, then θ_1..θ_M iid given ψ. Single-task
/// environments draw θ_m iid from their prior.
ParameterDraw sample_parameters(const Environment& env, std::size_t num_documents, RngStream& rng);

Pmf next_token_pmf(const Environment& env, const ParameterDraw& params, std::size_t document,
                   const Document& history, std::size_t t);

Document sample_document(const Environment& env, const ParameterDraw& params,
                         std::size_t document, std::size_t length, RngStream& rng);

Corpus sample_corpus(const Environment& env, const ParameterDraw& params, std::size_t length,
                     RngStream& rng);

// ---------------------------------------------------------------------------
// Exact enumeration.

struct LatentConfig {
  std::size_t psi = 0;                  // ψ atom (0 when ψ is absent)
  std::vector<std::size_t> assignment;  // θ_m as a state / component index
};

/// p(latent, tokens) over every token sequence of M documents x T steps.
struct JointTable {
  std::size_t vocab = 0;
  std::size_t num_documents = 0;
  std::size_t length = 0;
  std::size_t num_sequences = 0;  // vocab^(M*T)
  std::size_t num_psi = 1;
  std::vector<LatentConfig> latents;
  std::vector<double> prob;  // latents.size() x num_sequences, row-major

  double at(std::size_t latent, std::size_t sequence) const {
    return prob[latent * num_sequences + sequence];
  }
  std::vector<double> sequence_marginal() const;
  std::vector<double> latent_marginal() const;
  /// Index in [0, vocab^T) of document m's tokens within `sequence`.
  std::size_t document_index(std::size_t sequence, std::size_t document) const;
  /// Index of the first `prefix` tokens of document m.
  std::size_t document_prefix_index(std::size_t sequence, std::size_t document,
                                    std::size_t prefix) const;
  Corpus decode(std::size_t sequence) const;
};

inline constexpr std::size_t kDefaultJointCap = 10'000'000;

/// Supports tabular environments (θ_m iid from the prior) and mixtures with
/// known components; for a Dirichlet ψ the latent is the assignment alone.
/// Throws CapacityError when latents x vocab^(M*T) exceeds `cap`.
JointTable enumerate_joint(const Environment& env, std::size_t num_documents, std::size_t length,
                           std::size_t cap = kDefaultJointCap);

/// The finite set of per-document laws an enumerable environment ranges over.
std::vector<LawPtr> hypothesis_laws(const Environment& env);

/// Parameter draw realizing a latent configuration of enumerate_joint.
ParameterDraw draw_from_latent(const Environment& env, const JointTable& table,
                               const LatentConfig& latent);

/// Probability of every length-T document under `law`, indexed like
/// JointTable::document_index.
std::vector<double> document_probabilities(const SequenceLaw& law, std::size_t length);

}  // namespace icl
