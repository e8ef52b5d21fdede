#include "icl/environments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace icl {

double SequenceLaw::log_prob(const Document& doc, std::size_t t, Token token) const {
  return std::log(next(doc, t)[static_cast<std::size_t>(token)]);
}

void SequenceLaw::accumulate_next(const Document& doc, std::size_t t, double weight,
                                  std::span<double> out) const {
  const Pmf p = next(doc, t);
  for (std::size_t i = 0; i < p.size(); ++i) out[i] += weight * p[i];
}

namespace {

std::size_t checked_pow(std::size_t base, std::size_t exponent) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exponent; ++i) {
    if (base != 0 && out > static_cast<std::size_t>(-1) / base) {
      throw CapacityError("size overflow computing " + std::to_string(base) + "^" +
                          std::to_string(exponent));
    }
    out *= base;
  }
  return out;
}

void check_token(Token token, std::size_t vocab) {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab) {
    throw InvalidArgument("token " + std::to_string(token + 1) + " outside vocabulary [1, " +
                          std::to_string(vocab) + "]");
  }
}

// ---------------------------------------------------------------------------

class TabularLaw final : public SequenceLaw {
 public:
  TabularLaw(std::shared_ptr<const TabularSpec> spec, std::size_t state)
      : spec_(std::move(spec)), state_(state), initial_(spec_->initial_pmf(state)) {}

  std::size_t vocab() const override { return spec_->vocab; }

  Pmf next(const Document& doc, std::size_t t) const override {
    if (t == 0) return initial_;
    return spec_->row(state_, doc, t);
  }

  double log_prob(const Document& doc, std::size_t t, Token token) const override {
    const Pmf& p = t == 0 ? initial_ : spec_->row(state_, doc, t);
    return std::log(p[static_cast<std::size_t>(token)]);
  }

  std::optional<Pmf> iid_pmf() const override {
    if (spec_->window != 0 || !(initial_ == spec_->states[state_].rows[0])) return std::nullopt;
    return initial_;
  }

 private:
  std::shared_ptr<const TabularSpec> spec_;
  std::size_t state_;
  Pmf initial_;
};

class TransformerLaw final : public SequenceLaw {
 public:
  TransformerLaw(std::shared_ptr<const TransformerWeights> weights, std::optional<Pmf> initial)
      : weights_(std::move(weights)),
        initial_(initial ? *initial : Pmf::uniform(weights_->config.vocab)) {}

  std::size_t vocab() const override { return weights_->config.vocab; }

  Pmf next(const Document& doc, std::size_t t) const override {
    if (t == 0) return initial_;
    const std::size_t k = std::min(t, weights_->config.context);
    return transformer_forward(*weights_, std::span<const Token>(doc.tokens).subspan(t - k, k));
  }

 private:
  std::shared_ptr<const TransformerWeights> weights_;
  Pmf initial_;
};

class LogisticLaw final : public SequenceLaw {
 public:
  explicit LogisticLaw(Eigen::VectorXd theta) : theta_(std::move(theta)) {}

  std::size_t vocab() const override { return 2; }

  Pmf next(const Document& doc, std::size_t t) const override {
    const double p1 = positive_probability(doc, t);
    return Pmf({1.0 - p1, p1});
  }

  double log_prob(const Document& doc, std::size_t t, Token token) const override {
    const double z = theta_.dot(input(doc, t));
    // ln σ(z) = -softplus(-z), ln(1 - σ(z)) = -softplus(z)
    return token == 1 ? -softplus(-z) : -softplus(z);
  }

  void accumulate_next(const Document& doc, std::size_t t, double weight,
                       std::span<double> out) const override {
    const double p1 = positive_probability(doc, t);
    out[0] += weight * (1.0 - p1);
    out[1] += weight * p1;
  }

 private:
  static double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }

  const Eigen::VectorXd& input(const Document& doc, std::size_t t) const {
    if (t >= doc.inputs.size()) throw InvalidArgument("logistic law: missing input for step");
    return doc.inputs[t];
  }

  double positive_probability(const Document& doc, std::size_t t) const {
    const double z = theta_.dot(input(doc, t));
    return 1.0 / (1.0 + std::exp(-z));
  }

  Eigen::VectorXd theta_;
};

class SoftmaxLaw final : public SequenceLaw {
 public:
  explicit SoftmaxLaw(Eigen::VectorXd logits) : pmf_(softmax(logits)) {}

  std::size_t vocab() const override { return pmf_.size(); }
  Pmf next(const Document&, std::size_t) const override { return pmf_; }
  double log_prob(const Document&, std::size_t, Token token) const override {
    return std::log(pmf_[static_cast<std::size_t>(token)]);
  }
  std::optional<Pmf> iid_pmf() const override { return pmf_; }

 private:
  Pmf pmf_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Tabular

void TabularSpec::validate() const {
  if (vocab < 2) throw InvalidArgument("tabular: vocabulary size must be >= 2");
  if (states.empty()) throw InvalidArgument("tabular: at least one state required");
  if (prior.size() != states.size()) throw InvalidArgument("tabular: prior size != state count");
  const std::size_t rows_needed = checked_pow(vocab, window);
  for (const auto& s : states) {
    if (s.rows.size() != rows_needed) {
      throw InvalidArgument("tabular: state '" + s.name + "' needs " +
                            std::to_string(rows_needed) + " kernel rows");
    }
    for (const auto& r : s.rows) {
      if (r.size() != vocab) throw InvalidArgument("tabular: kernel row has wrong length");
    }
    if (s.initial && s.initial->size() != vocab) {
      throw InvalidArgument("tabular: initial pmf has wrong length");
    }
  }
}

Pmf TabularSpec::initial_pmf(std::size_t state) const {
  const auto& s = states.at(state);
  if (s.initial) return *s.initial;
  return window == 0 ? s.rows.front() : Pmf::uniform(vocab);
}

const Pmf& TabularSpec::row(std::size_t state, const Document& doc, std::size_t t) const {
  const auto& s = states[state];
  if (window == 0) return s.rows.front();
  std::size_t index = 0;
  for (std::size_t j = 0; j < window; ++j) {
    // position of the j-th oldest token in the window, padded with X_1
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(window) +
                               static_cast<std::ptrdiff_t>(j);
    const Token tok = doc.tokens[static_cast<std::size_t>(std::max<std::ptrdiff_t>(pos, 0))];
    index = index * vocab + static_cast<std::size_t>(tok);
  }
  return s.rows[index];
}

TabularSpec make_iid_tabular(std::vector<Pmf> rows, Pmf prior) {
  TabularSpec spec;
  spec.vocab = rows.at(0).size();
  spec.window = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    spec.states.push_back({std::string(1, static_cast<char>('A' + i % 26)) +
                               (i >= 26 ? std::to_string(i / 26) : std::string()),
                           {rows[i]},
                           std::nullopt});
  }
  spec.prior = std::move(prior);
  spec.validate();
  return spec;
}

TabularSpec make_two_coin(double p) {
  return make_iid_tabular({Pmf({p, 1.0 - p}), Pmf({1.0 - p, p})}, Pmf({0.5, 0.5}));
}

LawPtr tabular_law(std::shared_ptr<const TabularSpec> spec, std::size_t state) {
  if (state >= spec->states.size()) throw InvalidArgument("tabular_law: state out of range");
  return std::make_shared<TabularLaw>(std::move(spec), state);
}

// ---------------------------------------------------------------------------
// Transformer

void TransformerConfig::validate() const {
  if (vocab < 2) throw InvalidArgument("transformer: vocabulary size must be >= 2");
  if (attention_dim < 1 || attention_dim > vocab) {
    throw InvalidArgument("transformer: attention dimension must be in [1, d]");
  }
  if (context < 1) throw InvalidArgument("transformer: context length must be >= 1");
  if (depth < 1) throw InvalidArgument("transformer: depth must be >= 1");
}

void TransformerWeights::validate() const {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.vocab);
  const auto r = static_cast<Eigen::Index>(config.attention_dim);
  if (attention.size() != config.depth || value.size() != config.depth) {
    throw InvalidArgument("transformer: need one attention and one value matrix per layer");
  }
  for (std::size_t i = 0; i < config.depth; ++i) {
    if (attention[i].rows() != r || attention[i].cols() != r) {
      throw InvalidArgument("transformer: attention matrix must be r x r");
    }
    if (value[i].rows() != d || value[i].cols() != d) {
      throw InvalidArgument("transformer: value matrix must be d x d");
    }
  }
  if (embeddings.rows() != d || embeddings.cols() != d) {
    throw InvalidArgument("transformer: embeddings must be d x d");
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    if (std::abs(embeddings.col(j).norm() - 1.0) > 1e-12) {
      throw InvalidArgument("transformer: embedding " + std::to_string(j + 1) +
                            " is not unit norm");
    }
  }
}

Eigen::MatrixXd one_hot_embeddings(std::size_t vocab) {
  return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(vocab),
                                   static_cast<Eigen::Index>(vocab));
}

TransformerWeights sample_transformer_weights(const TransformerConfig& config, RngStream& rng,
                                              std::optional<Eigen::MatrixXd> embeddings) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.vocab);
  const auto r = static_cast<Eigen::Index>(config.attention_dim);
  const double value_sd = 1.0 / std::sqrt(static_cast<double>(config.vocab));
  TransformerWeights w;
  w.config = config;
  for (std::size_t layer = 0; layer < config.depth; ++layer) {
    Eigen::MatrixXd a(r, r);
    for (Eigen::Index j = 0; j < r; ++j)
      for (Eigen::Index i = 0; i < r; ++i) a(i, j) = rng.normal();
    Eigen::MatrixXd v(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < d; ++i) v(i, j) = value_sd * rng.normal();
    w.attention.push_back(std::move(a));
    w.value.push_back(std::move(v));
  }
  w.embeddings = embeddings ? std::move(*embeddings) : one_hot_embeddings(config.vocab);
  w.validate();
  return w;
}

Eigen::MatrixXd attention_matrix(const Eigen::MatrixXd& input, const Eigen::MatrixXd& attention,
                                 std::size_t attention_dim) {
  const auto r = static_cast<Eigen::Index>(attention_dim);
  const Eigen::MatrixXd head = input.topRows(r);
  Eigen::MatrixXd scores = head.transpose() * attention * head / std::sqrt(static_cast<double>(r));
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    const double hi = scores.col(c).maxCoeff();
    scores.col(c) = (scores.col(c).array() - hi).exp();
    scores.col(c) /= scores.col(c).sum();
  }
  return scores;
}

Eigen::MatrixXd transformer_layer(const Eigen::MatrixXd& input, const Eigen::MatrixXd& attention,
                                  const Eigen::MatrixXd& value, std::size_t attention_dim) {
  return clip_columns(value * input * attention_matrix(input, attention, attention_dim));
}

Eigen::MatrixXd embed_window(const TransformerWeights& weights, std::span<const Token> window) {
  const std::size_t K = weights.config.context;
  if (window.empty()) throw InvalidArgument("transformer: empty context window");
  if (window.size() > K) throw InvalidArgument("transformer: window longer than context length");
  for (Token tok : window) check_token(tok, weights.config.vocab);
  Eigen::MatrixXd u(weights.embeddings.rows(), static_cast<Eigen::Index>(K));
  const std::size_t pad = K - window.size();
  for (std::size_t k = 0; k < K; ++k) {
    const Token tok = k < pad ? window.front() : window[k - pad];
    u.col(static_cast<Eigen::Index>(k)) = weights.embeddings.col(tok);
  }
  return u;
}

std::vector<Eigen::MatrixXd> transformer_trace(const TransformerWeights& weights,
                                               std::span<const Token> window) {
  std::vector<Eigen::MatrixXd> trace;
  trace.reserve(weights.config.depth + 1);
  trace.push_back(embed_window(weights, window));
  for (std::size_t i = 0; i < weights.config.depth; ++i) {
    trace.push_back(transformer_layer(trace.back(), weights.attention[i], weights.value[i],
                                      weights.config.attention_dim));
  }
  return trace;
}

Pmf transformer_forward(const TransformerWeights& weights, std::span<const Token> window) {
  Eigen::MatrixXd u = embed_window(weights, window);
  for (std::size_t i = 0; i < weights.config.depth; ++i) {
    u = transformer_layer(u, weights.attention[i], weights.value[i], weights.config.attention_dim);
  }
  return softmax(Eigen::VectorXd(u.col(u.cols() - 1)));
}

LawPtr transformer_law(std::shared_ptr<const TransformerWeights> weights,
                       std::optional<Pmf> initial) {
  if (initial && initial->size() != weights->config.vocab) {
    throw InvalidArgument("transformer: initial pmf has wrong length");
  }
  return std::make_shared<TransformerLaw>(std::move(weights), std::move(initial));
}

// ---------------------------------------------------------------------------
// Logistic / linear representation

LawPtr logistic_law(Eigen::VectorXd theta) {
  return std::make_shared<LogisticLaw>(std::move(theta));
}

LawPtr softmax_law(Eigen::VectorXd logits) {
  return std::make_shared<SoftmaxLaw>(std::move(logits));
}

Eigen::MatrixXd sample_orthonormal(std::size_t rows, std::size_t cols, RngStream& rng) {
  if (cols > rows) throw InvalidArgument("sample_orthonormal: need cols <= rows");
  Eigen::MatrixXd g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  const Eigen::MatrixXd r = qr.matrixQR().topRows(g.cols()).triangularView<Eigen::Upper>();
  // Sign-correct so the distribution is Haar rather than QR-convention dependent.
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Eigen::VectorXd sample_unit_ball(std::size_t dim, RngStream& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    norm = v.norm();
  } while (norm == 0.0);
  const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  return v * (radius / norm);
}

// ---------------------------------------------------------------------------
// Mixture

MixtureSpec MixtureSpec::make(ComponentSource source, std::size_t num_components,
                              double concentration, PsiPrior psi_prior) {
  MixtureSpec spec;
  spec.num_components = num_components;
  spec.concentration = concentration;
  spec.source = std::move(source);
  spec.psi_prior = std::move(psi_prior);
  if (const auto* tab = std::get_if<TabularSpec>(&spec.source)) {
    auto shared = std::make_shared<const TabularSpec>(*tab);
    for (std::size_t i = 0; i < tab->states.size(); ++i) {
      spec.components.push_back(tabular_law(shared, i));
    }
  } else if (const auto* pool = std::get_if<TransformerPool>(&spec.source)) {
    for (std::size_t i = 0; i < num_components; ++i) {
      RngStream rng(pool->seed, i);
      spec.components.push_back(transformer_law(
          std::make_shared<const TransformerWeights>(sample_transformer_weights(pool->config, rng))));
    }
  }
  spec.validate();
  return spec;
}

void MixtureSpec::validate() const {
  if (num_components < 1) throw InvalidArgument("mixture: N must be >= 1");
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    throw InvalidArgument("mixture: R must be positive");
  }
  std::visit(
      [&](const auto& src) {
        using S = std::decay_t<decltype(src)>;
        if constexpr (std::is_same_v<S, TabularSpec>) {
          src.validate();
          if (src.states.size() != num_components) {
            throw InvalidArgument("mixture: tabular source must have N states");
          }
        } else {
          src.config.validate();
        }
      },
      source);
  if (known_components() && components.size() != num_components) {
    throw InvalidArgument("mixture: component pool size != N");
  }
  if (const auto* disc = std::get_if<DiscretePsiPrior>(&psi_prior)) {
    if (disc->atoms.empty() || disc->atoms.size() != disc->weights.size()) {
      throw InvalidArgument("mixture: discrete ψ prior needs one weight per atom");
    }
    for (const auto& atom : disc->atoms) {
      if (atom.size() != num_components) {
        throw InvalidArgument("mixture: ψ atom length must equal N");
      }
    }
  }
}

std::size_t MixtureSpec::vocab() const {
  return std::visit(
      [](const auto& src) -> std::size_t {
        using S = std::decay_t<decltype(src)>;
        if constexpr (std::is_same_v<S, TabularSpec>) {
          return src.vocab;
        } else {
          return src.config.vocab;
        }
      },
      source);
}

MixtureSpec make_two_coin_mixture(double psi_bias, double coin_bias) {
  DiscretePsiPrior prior{{Pmf({psi_bias, 1.0 - psi_bias}), Pmf({1.0 - psi_bias, psi_bias})},
                         Pmf({0.5, 0.5})};
  return MixtureSpec::make(make_two_coin(coin_bias), 2, 1.0, std::move(prior));
}

// ---------------------------------------------------------------------------
// Environment-level dispatch

namespace {
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;
}  // namespace

std::size_t vocab_size(const Environment& env) {
  return std::visit(Overloaded{
                        [](const TabularSpec& s) { return s.vocab; },
                        [](const TransformerSpec& s) { return s.config.vocab; },
                        [](const LogisticSpec&) { return std::size_t{2}; },
                        [](const LinRepSpec& s) { return s.vocab; },
                        [](const MixtureSpec& s) { return s.vocab(); },
                    },
                    env);
}

std::string environment_name(const Environment& env) {
  return std::visit(Overloaded{
                        [](const TabularSpec&) { return std::string("tabular"); },
                        [](const TransformerSpec&) { return std::string("transformer"); },
                        [](const LogisticSpec&) { return std::string("logistic"); },
                        [](const LinRepSpec&) { return std::string("linrep"); },
                        [](const MixtureSpec&) { return std::string("mixture"); },
                    },
                    env);
}

std::size_t input_dim(const Environment& env) {
  if (const auto* l = std::get_if<LogisticSpec>(&env)) return l->dim;
  return 0;
}

void validate(const Environment& env) {
  std::visit(Overloaded{
                 [](const TabularSpec& s) { s.validate(); },
                 [](const TransformerSpec& s) {
                   s.config.validate();
                   if (s.initial && s.initial->size() != s.config.vocab) {
                     throw InvalidArgument("transformer: initial pmf has wrong length");
                   }
                 },
                 [](const LogisticSpec& s) {
                   if (s.dim < 1) throw InvalidArgument("logistic: dimension must be >= 1");
                 },
                 [](const LinRepSpec& s) {
                   if (s.vocab < 2 || s.rank < 1 || s.rank > s.vocab) {
                     throw InvalidArgument("linrep: need d >= 2 and 1 <= r <= d");
                   }
                 },
                 [](const MixtureSpec& s) { s.validate(); },
             },
             env);
}

ParameterDraw sample_parameters(const Environment& env, std::size_t num_documents,
                                RngStream& rng) {
  if (num_documents < 1) throw InvalidArgument("sample_parameters: M must be >= 1");
  validate(env);
  ParameterDraw draw;
  std::visit(
      Overloaded{
          [&](const TabularSpec& s) {
            auto shared = std::make_shared<const TabularSpec>(s);
            for (std::size_t m = 0; m < num_documents; ++m) {
              const std::size_t state = rng.categorical(s.prior);
              draw.assignment.push_back(state);
              draw.laws.push_back(tabular_law(shared, state));
            }
          },
          [&](const TransformerSpec& s) {
            for (std::size_t m = 0; m < num_documents; ++m) {
              draw.laws.push_back(transformer_law(
                  std::make_shared<const TransformerWeights>(
                      sample_transformer_weights(s.config, rng)),
                  s.initial));
            }
          },
          [&](const LogisticSpec& s) {
            for (std::size_t m = 0; m < num_documents; ++m) {
              draw.theta.push_back(sample_unit_ball(s.dim, rng));
              draw.laws.push_back(logistic_law(draw.theta.back()));
            }
          },
          [&](const LinRepSpec& s) {
            draw.basis = sample_orthonormal(s.vocab, s.rank, rng);
            const double sd = 1.0 / std::sqrt(static_cast<double>(s.rank));
            for (std::size_t m = 0; m < num_documents; ++m) {
              Eigen::VectorXd xi(static_cast<Eigen::Index>(s.rank));
              for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = sd * rng.normal();
              draw.theta.push_back(*draw.basis * xi);
              draw.laws.push_back(softmax_law(draw.theta.back()));
            }
          },
          [&](const MixtureSpec& s) {
            const std::size_t n = s.num_components;
            if (const auto* disc = std::get_if<DiscretePsiPrior>(&s.psi_prior)) {
              const std::size_t atom = rng.categorical(disc->weights);
              draw.psi_atom = atom;
              draw.mixing = disc->atoms[atom];
            } else {
              std::vector<double> log_g(n);
              const double alpha = s.concentration / static_cast<double>(n);
              for (auto& g : log_g) g = rng.log_gamma_variate(alpha);
              draw.mixing = softmax(log_g);
            }
            if (s.known_components()) {
              draw.components = s.components;
            } else {
              const auto& latent = std::get<LatentTransformers>(s.source);
              for (std::size_t i = 0; i < n; ++i) {
                draw.components.push_back(transformer_law(std::make_shared<const TransformerWeights>(
                    sample_transformer_weights(latent.config, rng))));
              }
            }
            for (std::size_t m = 0; m < num_documents; ++m) {
              const std::size_t b = rng.categorical(*draw.mixing);
              draw.assignment.push_back(b);
              draw.laws.push_back(draw.components[b]);
            }
          },
      },
      env);
  return draw;
}

Pmf next_token_pmf(const Environment& env, const ParameterDraw& params, std::size_t document,
                   const Document& history, std::size_t t) {
  if (document >= params.laws.size()) throw InvalidArgument("next_token_pmf: no such document");
  if (t > history.tokens.size()) throw InvalidArgument("next_token_pmf: history shorter than t");
  const std::size_t d = vocab_size(env);
  for (std::size_t i = 0; i < t; ++i) check_token(history.tokens[i], d);
  return params.laws[document]->next(history, t);
}

Document sample_document(const Environment& env, const ParameterDraw& params,
                         std::size_t document, std::size_t length, RngStream& rng) {
  if (length < 1) throw InvalidArgument("sample_document: T must be >= 1");
  if (document >= params.laws.size()) throw InvalidArgument("sample_document: no such document");
  const auto& law = *params.laws[document];
  const std::size_t dim = input_dim(env);
  Document doc;
  doc.tokens.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    if (dim > 0) {
      Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
      doc.inputs.push_back(std::move(x));
    }
    doc.tokens.push_back(static_cast<Token>(rng.categorical(law.next(doc, t))));
  }
  return doc;
}

Corpus sample_corpus(const Environment& env, const ParameterDraw& params, std::size_t length,
                     RngStream& rng) {
  Corpus corpus;
  corpus.vocab = vocab_size(env);
  for (std::size_t m = 0; m < params.num_documents(); ++m) {
    corpus.documents.push_back(sample_document(env, params, m, length, rng));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Enumeration

std::vector<double> JointTable::sequence_marginal() const {
  std::vector<double> out(num_sequences, 0.0);
  for (std::size_t l = 0; l < latents.size(); ++l)
    for (std::size_t s = 0; s < num_sequences; ++s) out[s] += at(l, s);
  return out;
}

std::vector<double> JointTable::latent_marginal() const {
  std::vector<double> out(latents.size(), 0.0);
  for (std::size_t l = 0; l < latents.size(); ++l)
    for (std::size_t s = 0; s < num_sequences; ++s) out[l] += at(l, s);
  return out;
}

std::size_t JointTable::document_index(std::size_t sequence, std::size_t document) const {
  const std::size_t per_doc = checked_pow(vocab, length);
  const std::size_t shift = checked_pow(vocab, (num_documents - 1 - document) * length);
  return (sequence / shift) % per_doc;
}

std::size_t JointTable::document_prefix_index(std::size_t sequence, std::size_t document,
                                              std::size_t prefix) const {
  return document_index(sequence, document) / checked_pow(vocab, length - prefix);
}

Corpus JointTable::decode(std::size_t sequence) const {
  Corpus corpus;
  corpus.vocab = vocab;
  for (std::size_t m = 0; m < num_documents; ++m) {
    std::size_t idx = document_index(sequence, m);
    Document doc;
    doc.tokens.assign(length, 0);
    for (std::size_t t = length; t-- > 0;) {
      doc.tokens[t] = static_cast<Token>(idx % vocab);
      idx /= vocab;
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

std::vector<LawPtr> hypothesis_laws(const Environment& env) {
  if (const auto* tab = std::get_if<TabularSpec>(&env)) {
    tab->validate();
    auto shared = std::make_shared<const TabularSpec>(*tab);
    std::vector<LawPtr> laws;
    for (std::size_t i = 0; i < tab->states.size(); ++i) laws.push_back(tabular_law(shared, i));
    return laws;
  }
  if (const auto* mix = std::get_if<MixtureSpec>(&env)) {
    if (!mix->known_components()) {
      throw UnsupportedMode("mixture with latent transformer components has no finite hypothesis set");
    }
    return mix->components;
  }
  throw UnsupportedMode(environment_name(env) + " environment has a continuous latent parameter");
}

std::vector<double> document_probabilities(const SequenceLaw& law, std::size_t length) {
  const std::size_t d = law.vocab();
  std::vector<double> out(checked_pow(d, length), 0.0);
  Document doc;
  doc.tokens.assign(length, 0);
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t t, std::size_t index,
                                                                   double p) {
    if (t == length) {
      out[index] = p;
      return;
    }
    const Pmf next = law.next(doc, t);
    for (std::size_t x = 0; x < d; ++x) {
      doc.tokens[t] = static_cast<Token>(x);
      walk(t + 1, index * d + x, p * next[x]);
    }
  };
  walk(0, 0, 1.0);
  return out;
}

JointTable enumerate_joint(const Environment& env, std::size_t num_documents, std::size_t length,
                           std::size_t cap) {
  if (num_documents < 1 || length < 1) throw InvalidArgument("enumerate_joint: need M, T >= 1");
  const std::vector<LawPtr> laws = hypothesis_laws(env);
  const std::size_t d = vocab_size(env);
  const std::size_t S = laws.size();

  // Latent configurations with their prior probabilities.
  std::vector<LatentConfig> latents;
  std::vector<double> latent_prob;
  std::size_t num_psi = 1;
  const double assignments = std::pow(static_cast<double>(S), static_cast<double>(num_documents));
  const double sequences = std::pow(static_cast<double>(d), static_cast<double>(num_documents * length));

  const auto* mix = std::get_if<MixtureSpec>(&env);
  const DiscretePsiPrior* disc = mix ? std::get_if<DiscretePsiPrior>(&mix->psi_prior) : nullptr;
  if (disc) num_psi = disc->atoms.size();
  const double required = static_cast<double>(num_psi) * assignments * sequences;
  if (required > static_cast<double>(cap)) {
    throw CapacityError("enumerate_joint: table needs " + std::to_string(required) +
                        " entries, cap is " + std::to_string(cap));
  }

  const std::size_t n_assign = checked_pow(S, num_documents);
  for (std::size_t k = 0; k < num_psi; ++k) {
    for (std::size_t a = 0; a < n_assign; ++a) {
      LatentConfig cfg;
      cfg.psi = k;
      cfg.assignment.assign(num_documents, 0);
      std::size_t rest = a;
      for (std::size_t m = num_documents; m-- > 0;) {
        cfg.assignment[m] = rest % S;
        rest /= S;
      }
      double p = 1.0;
      if (const auto* tab = std::get_if<TabularSpec>(&env)) {
        for (auto b : cfg.assignment) p *= tab->prior[b];
      } else if (disc) {
        p = disc->weights[k];
        for (auto b : cfg.assignment) p *= disc->atoms[k][b];
      } else {
        // Pólya urn: ψ ~ Dirichlet(R/N) integrated out.
        const double alpha = mix->concentration / static_cast<double>(S);
        std::vector<double> counts(S, 0.0);
        for (std::size_t m = 0; m < num_documents; ++m) {
          const auto b = cfg.assignment[m];
          p *= (counts[b] + alpha) / (static_cast<double>(m) + mix->concentration);
          counts[b] += 1.0;
        }
      }
      latents.push_back(std::move(cfg));
      latent_prob.push_back(p);
    }
  }

  std::vector<std::vector<double>> doc_probs;
  doc_probs.reserve(S);
  for (const auto& law : laws) doc_probs.push_back(document_probabilities(*law, length));

  JointTable table;
  table.vocab = d;
  table.num_documents = num_documents;
  table.length = length;
  table.num_sequences = checked_pow(d, num_documents * length);
  table.num_psi = num_psi;
  table.latents = std::move(latents);
  table.prob.assign(table.latents.size() * table.num_sequences, 0.0);
  const std::size_t per_doc = checked_pow(d, length);
  for (std::size_t l = 0; l < table.latents.size(); ++l) {
    if (latent_prob[l] == 0.0) continue;
    const auto& assign = table.latents[l].assignment;
    for (std::size_t s = 0; s < table.num_sequences; ++s) {
      double p = latent_prob[l];
      std::size_t rest = s;
      for (std::size_t m = num_documents; m-- > 0 && p > 0.0;) {
        p *= doc_probs[assign[m]][rest % per_doc];
        rest /= per_doc;
      }
      table.prob[l * table.num_sequences + s] = p;
    }
  }
  return table;
}

ParameterDraw draw_from_latent(const Environment& env, const JointTable& table,
                               const LatentConfig& latent) {
  (void)table;
  const auto laws = hypothesis_laws(env);
  ParameterDraw draw;
  draw.assignment = latent.assignment;
  for (auto b : latent.assignment) draw.laws.push_back(laws.at(b));
  if (const auto* mix = std::get_if<MixtureSpec>(&env)) {
    draw.components = laws;
    if (const auto* disc = std::get_if<DiscretePsiPrior>(&mix->psi_prior)) {
      draw.psi_atom = latent.psi;
      draw.mixing = disc->atoms.at(latent.psi);
    }
  }
  return draw;
}

}  // namespace icl
