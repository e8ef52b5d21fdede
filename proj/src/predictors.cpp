#include "icl/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace icl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double floor_log(double v) { return v < kLogWeightFloor ? kNegInf : v; }

/// Normalizes log-weights in place; returns the log normalizer.
double normalize_log(std::vector<double>& lw) {
  const double z = logsumexp(lw);
  if (!std::isfinite(z)) return z;
  for (double& v : lw) v = floor_log(v - z);
  return z;
}

double ess_from_log(std::span<const double> lw) {
  if (lw.empty()) return 0.0;
  const double hi = *std::max_element(lw.begin(), lw.end());
  if (!std::isfinite(hi)) return 0.0;
  double s = 0.0, s2 = 0.0;
  for (double v : lw) {
    const double w = std::exp(v - hi);
    s += w;
    s2 += w * w;
  }
  return s * s / s2;
}

/// Σ_i exp(lw_i) next_i(doc, t), with lw normalized.
Pmf mix_laws(std::span<const LawPtr> laws, std::span<const double> lw, const Document& doc,
             std::size_t t, std::size_t vocab) {
  std::vector<double> out(vocab, 0.0);
  for (std::size_t i = 0; i < laws.size(); ++i) {
    if (!std::isfinite(lw[i])) continue;
    laws[i]->accumulate_next(doc, t, std::exp(lw[i]), out);
  }
  return Pmf::normalized(std::move(out));
}

Token token_at(const Document& doc, std::size_t t) {
  if (t >= doc.tokens.size()) throw InvalidArgument("observe: step beyond document length");
  return doc.tokens[t];
}

}  // namespace

// ---------------------------------------------------------------------------

PosteriorState PosteriorState::from_prior(std::vector<LawPtr> support, const Pmf& prior) {
  if (support.size() != prior.size()) {
    throw InvalidArgument("PosteriorState: prior size != support size");
  }
  PosteriorState s;
  s.support = std::move(support);
  for (double p : prior.probs()) s.log_weights.push_back(p > 0.0 ? std::log(p) : kNegInf);
  return s;
}

Pmf PosteriorState::weights() const {
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i]);
  return Pmf::normalized(std::move(w));
}

void PosteriorState::validate() const {
  if (support.empty() || support.size() != log_weights.size()) {
    throw InvalidArgument("PosteriorState: weight count != support count");
  }
  if (std::abs(logsumexp(log_weights)) > 1e-10) {
    throw InvalidArgument("PosteriorState: weights not normalized");
  }
}

PosteriorState finite_bayes_update(const PosteriorState& state, const Document& doc,
                                   std::size_t t) {
  const Token x = token_at(doc, t);
  PosteriorState out = state;
  for (std::size_t i = 0; i < out.support.size(); ++i) {
    if (!std::isfinite(out.log_weights[i])) continue;
    out.log_weights[i] += out.support[i]->log_prob(doc, t, x);
  }
  if (!std::isfinite(normalize_log(out.log_weights))) {
    throw DegeneratePosterior("every hypothesis assigns zero probability to token " +
                              std::to_string(x + 1) + " at step " + std::to_string(t + 1));
  }
  return out;
}

PosteriorState finite_bayes_batch(const PosteriorState& state, const Document& doc,
                                  std::size_t upto) {
  PosteriorState out = state;
  for (std::size_t t = 0; t < upto; ++t) {
    const Token x = token_at(doc, t);
    for (std::size_t i = 0; i < out.support.size(); ++i) {
      if (std::isfinite(out.log_weights[i])) {
        out.log_weights[i] += out.support[i]->log_prob(doc, t, x);
      }
    }
  }
  if (!std::isfinite(normalize_log(out.log_weights))) {
    throw DegeneratePosterior("every hypothesis assigns zero probability to the history");
  }
  return out;
}

Pmf finite_bayes_predict(const PosteriorState& state, const Document& doc, std::size_t t) {
  return mix_laws(state.support, state.log_weights, doc, t, state.support.front()->vocab());
}

Pmf omniscient_predict(const ParameterDraw& params, std::size_t document, const Document& doc,
                       std::size_t t) {
  if (document >= params.laws.size()) throw InvalidArgument("omniscient_predict: no such document");
  return params.laws[document]->next(doc, t);
}

Pmf polya_predictive(std::span<const double> counts, double concentration) {
  if (counts.empty()) throw InvalidArgument("polya_predictive: N must be >= 1");
  if (!(concentration > 0.0)) throw InvalidArgument("polya_predictive: R must be positive");
  const double alpha = concentration / static_cast<double>(counts.size());
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0)) throw InvalidArgument("polya_predictive: negative count");
    total += c;
  }
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = (counts[i] + alpha) / (total + concentration);
  return Pmf::normalized(std::move(p));
}

Environment with_prior(const Environment& env, const Pmf& alternative) {
  if (const auto* tab = std::get_if<TabularSpec>(&env)) {
    if (alternative.size() != tab->states.size()) {
      throw InvalidArgument("with_prior: alternative prior size != state count");
    }
    TabularSpec out = *tab;
    out.prior = alternative;
    return out;
  }
  if (const auto* mix = std::get_if<MixtureSpec>(&env)) {
    if (const auto* disc = std::get_if<DiscretePsiPrior>(&mix->psi_prior)) {
      if (alternative.size() != disc->atoms.size()) {
        throw InvalidArgument("with_prior: alternative prior size != ψ atom count");
      }
      MixtureSpec out = *mix;
      std::get<DiscretePsiPrior>(out.psi_prior).weights = alternative;
      return out;
    }
  }
  throw UnsupportedMode("with_prior: only tabular and discrete-ψ mixture priors can be replaced");
}

Pmf latent_prior(const Environment& env) {
  if (const auto* tab = std::get_if<TabularSpec>(&env)) return tab->prior;
  if (const auto* mix = std::get_if<MixtureSpec>(&env)) {
    if (const auto* disc = std::get_if<DiscretePsiPrior>(&mix->psi_prior)) return disc->weights;
  }
  throw UnsupportedMode("latent_prior: environment has no finite latent prior");
}

// ---------------------------------------------------------------------------

Pmf assignment_predictive(const AssignmentPrior& prior, std::span<const double> counts) {
  return std::visit(
      [&](const auto& p) -> Pmf {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, PolyaAssignment>) {
          return polya_predictive(counts, p.concentration);
        } else if constexpr (std::is_same_v<P, FixedAssignment>) {
          return p.mixing;
        } else {
          // Posterior over atoms given counts, then the mixed atom.
          std::vector<double> lw(p.atoms.size());
          for (std::size_t k = 0; k < p.atoms.size(); ++k) {
            double v = p.weights[k] > 0.0 ? std::log(p.weights[k]) : kNegInf;
            for (std::size_t i = 0; i < counts.size() && std::isfinite(v); ++i) {
              if (counts[i] == 0.0) continue;
              v = p.atoms[k][i] > 0.0 ? v + counts[i] * std::log(p.atoms[k][i]) : kNegInf;
            }
            lw[k] = v;
          }
          if (!std::isfinite(normalize_log(lw))) {
            throw DegeneratePosterior("assignment counts impossible under every ψ atom");
          }
          std::vector<double> out(counts.size(), 0.0);
          for (std::size_t k = 0; k < lw.size(); ++k) {
            if (!std::isfinite(lw[k])) continue;
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += std::exp(lw[k]) * p.atoms[k][i];
          }
          return Pmf::normalized(std::move(out));
        }
      },
      prior);
}

AssignmentPrior assignment_prior(const Environment& env) {
  if (const auto* tab = std::get_if<TabularSpec>(&env)) return FixedAssignment{tab->prior};
  if (const auto* mix = std::get_if<MixtureSpec>(&env)) {
    if (const auto* disc = std::get_if<DiscretePsiPrior>(&mix->psi_prior)) {
      return DiscretePsiAssignment{disc->atoms, disc->weights};
    }
    return PolyaAssignment{mix->concentration};
  }
  throw UnsupportedMode("assignment_prior: " + environment_name(env) +
                        " has no finite component assignment");
}

HierarchicalPredictor::HierarchicalPredictor(std::vector<LawPtr> components, AssignmentPrior prior,
                                             HierarchicalOptions options)
    : components_(std::move(components)), prior_(std::move(prior)), options_(options) {
  if (components_.empty()) throw InvalidArgument("HierarchicalPredictor: no components");
  const std::size_t n = components_.size();
  if (const auto* d = std::get_if<DiscretePsiAssignment>(&prior_)) {
    for (const auto& a : d->atoms) {
      if (a.size() != n) throw InvalidArgument("HierarchicalPredictor: ψ atom length != N");
    }
  } else if (const auto* f = std::get_if<FixedAssignment>(&prior_)) {
    if (f->mixing.size() != n) throw InvalidArgument("HierarchicalPredictor: mixing length != N");
  }
  smc_ = options_.force_smc;
  if (smc_) {
    if (options_.particles < 2) throw InvalidArgument("HierarchicalPredictor: need >= 2 particles");
    rng_.emplace(options_.seed, 0);
    counts_.assign(options_.particles, std::vector<double>(n, 0.0));
    log_weights_.assign(options_.particles, -std::log(static_cast<double>(options_.particles)));
  } else {
    counts_.assign(1, std::vector<double>(n, 0.0));
    log_weights_.assign(1, 0.0);
  }
  doc_log_lik_.assign(n, 0.0);
  current_prior_ = mixed_component_prior();
}

std::vector<double> HierarchicalPredictor::mixed_component_prior() const {
  std::vector<double> q(components_.size(), 0.0);
  for (std::size_t h = 0; h < counts_.size(); ++h) {
    if (!std::isfinite(log_weights_[h])) continue;
    const Pmf p = assignment_predictive(prior_, counts_[h]);
    const double w = std::exp(log_weights_[h]);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += w * p[i];
  }
  return q;
}

Pmf HierarchicalPredictor::component_posterior() const {
  std::vector<double> lw(components_.size());
  for (std::size_t i = 0; i < lw.size(); ++i) {
    lw[i] = current_prior_[i] > 0.0 ? std::log(current_prior_[i]) + doc_log_lik_[i] : kNegInf;
  }
  if (!std::isfinite(normalize_log(lw))) {
    throw DegeneratePosterior("every component assigns zero probability to the document");
  }
  for (double& v : lw) v = std::exp(v);
  return Pmf::normalized(std::move(lw));
}

Pmf HierarchicalPredictor::predict(const Document& doc, std::size_t t) const {
  const Pmf post = component_posterior();
  std::vector<double> out(components_.front()->vocab(), 0.0);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (post[i] > 0.0) components_[i]->accumulate_next(doc, t, post[i], out);
  }
  return Pmf::normalized(std::move(out));
}

void HierarchicalPredictor::observe(const Document& doc, std::size_t t) {
  const Token x = token_at(doc, t);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (std::isfinite(doc_log_lik_[i]) && current_prior_[i] > 0.0) {
      doc_log_lik_[i] = floor_log(doc_log_lik_[i] + components_[i]->log_prob(doc, t, x));
    } else {
      doc_log_lik_[i] = kNegInf;
    }
  }
  component_posterior();  // throws when degenerate
}

void HierarchicalPredictor::end_document() {
  if (std::holds_alternative<FixedAssignment>(prior_)) {
    // Documents are independent given a known mixing vector.
  } else if (smc_) {
    propagate_smc(doc_log_lik_);
  } else {
    merge_exact(doc_log_lik_);
  }
  std::fill(doc_log_lik_.begin(), doc_log_lik_.end(), 0.0);
  current_prior_ = mixed_component_prior();
}

void HierarchicalPredictor::merge_exact(const std::vector<double>& doc_log_lik) {
  std::map<std::vector<double>, double> next;
  for (std::size_t h = 0; h < counts_.size(); ++h) {
    if (!std::isfinite(log_weights_[h])) continue;
    const Pmf p = assignment_predictive(prior_, counts_[h]);
    for (std::size_t i = 0; i < components_.size(); ++i) {
      const double lw = p[i] > 0.0 ? log_weights_[h] + std::log(p[i]) + doc_log_lik[i] : kNegInf;
      if (!std::isfinite(lw)) continue;
      auto key = counts_[h];
      key[i] += 1.0;
      auto [it, inserted] = next.try_emplace(std::move(key), lw);
      if (!inserted) {
        const double hi = std::max(it->second, lw);
        it->second = hi + std::log(std::exp(it->second - hi) + std::exp(lw - hi));
      }
    }
  }
  if (next.empty()) throw DegeneratePosterior("no assignment hypothesis explains the document");
  if (next.size() > options_.cap) {
    if (!options_.allow_smc) {
      throw CapacityError("hierarchical inference needs " + std::to_string(next.size()) +
                          " assignment hypotheses, cap is " + std::to_string(options_.cap));
    }
    // Switch to SMC: draw particles from the exact posterior over count vectors.
    std::vector<std::vector<double>> keys;
    std::vector<double> lw;
    for (auto& [k, v] : next) {
      keys.push_back(k);
      lw.push_back(v);
    }
    normalize_log(lw);
    std::vector<double> w(lw.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(lw[i]);
    rng_.emplace(options_.seed, 0);
    counts_.clear();
    for (std::size_t p = 0; p < options_.particles; ++p) counts_.push_back(keys[rng_->categorical(w)]);
    log_weights_.assign(options_.particles, -std::log(static_cast<double>(options_.particles)));
    smc_ = true;
    return;
  }
  counts_.clear();
  log_weights_.clear();
  for (auto& [k, v] : next) {
    counts_.push_back(k);
    log_weights_.push_back(v);
  }
  normalize_log(log_weights_);
}

void HierarchicalPredictor::propagate_smc(const std::vector<double>& doc_log_lik) {
  const std::size_t n = counts_.size();
  const std::size_t N = components_.size();
  std::vector<double> a(N);
  for (std::size_t p = 0; p < n; ++p) {
    if (!std::isfinite(log_weights_[p])) continue;
    const Pmf pred = assignment_predictive(prior_, counts_[p]);
    for (std::size_t i = 0; i < N; ++i) {
      a[i] = pred[i] > 0.0 ? std::log(pred[i]) + doc_log_lik[i] : kNegInf;
    }
    const double z = logsumexp(a);
    log_weights_[p] += z;
    if (!std::isfinite(z)) continue;
    std::vector<double> prop(N);
    for (std::size_t i = 0; i < N; ++i) prop[i] = std::exp(a[i] - z);
    counts_[p][rng_->categorical(prop)] += 1.0;
  }
  if (!std::isfinite(normalize_log(log_weights_))) {
    throw DegeneratePosterior("every assignment particle has zero weight");
  }
  if (ess() < 0.5 * static_cast<double>(n)) {
    // Systematic resampling with a single uniform offset.
    const double u = rng_->uniform();
    std::vector<std::vector<double>> resampled;
    resampled.reserve(n);
    double cumulative = std::exp(log_weights_[0]);
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double target = (static_cast<double>(k) + u) / static_cast<double>(n);
      while (target > cumulative && j + 1 < n) cumulative += std::exp(log_weights_[++j]);
      resampled.push_back(counts_[j]);
    }
    counts_ = std::move(resampled);
    log_weights_.assign(n, -std::log(static_cast<double>(n)));
  }
}

double HierarchicalPredictor::ess() const { return ess_from_log(log_weights_); }

// ---------------------------------------------------------------------------

namespace {
bool has_shared_meta(const Environment& env) {
  return std::holds_alternative<LinRepSpec>(env) || std::holds_alternative<MixtureSpec>(env);
}
}  // namespace

ParticlePredictor::ParticlePredictor(const Environment& env, std::size_t num_documents,
                                     std::size_t n, RngStream rng)
    : joint_(has_shared_meta(env)), vocab_(vocab_size(env)) {
  if (n < 2) throw InvalidArgument("ParticlePredictor: need >= 2 particles");
  const std::size_t docs = joint_ ? num_documents : 1;
  if (const auto* lg = std::get_if<LogisticSpec>(&env)) {
    logistic_theta_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(lg->dim));
    for (std::size_t p = 0; p < n; ++p) {
      logistic_theta_.row(static_cast<Eigen::Index>(p)) = sample_unit_ball(lg->dim, rng).transpose();
    }
  } else {
    particles_.reserve(n);
    for (std::size_t p = 0; p < n; ++p) particles_.push_back(sample_parameters(env, docs, rng));
  }
  log_weights_.assign(n, 0.0);
}

const SequenceLaw& ParticlePredictor::law(std::size_t p, std::size_t m) const {
  return *particles_[p].laws[joint_ ? m : 0];
}

Eigen::VectorXd ParticlePredictor::logistic_logits(const Document& doc, std::size_t t) const {
  if (t >= doc.inputs.size()) throw InvalidArgument("ParticlePredictor: missing logistic input");
  return logistic_theta_ * doc.inputs[t];
}

Pmf ParticlePredictor::predict(const Corpus& corpus, std::size_t m, std::size_t t) const {
  const Document& doc = corpus.documents.at(m);
  const double hi = *std::max_element(log_weights_.begin(), log_weights_.end());
  if (!std::isfinite(hi)) throw DegeneratePosterior("every particle weight underflowed");
  std::vector<double> out(vocab_, 0.0);
  if (logistic_theta_.size() > 0) {
    const Eigen::VectorXd z = logistic_logits(doc, t);
    for (Eigen::Index p = 0; p < z.size(); ++p) {
      const double w = std::exp(log_weights_[static_cast<std::size_t>(p)] - hi);
      const double p1 = 1.0 / (1.0 + std::exp(-z(p)));
      out[0] += w * (1.0 - p1);
      out[1] += w * p1;
    }
  } else {
    for (std::size_t p = 0; p < particles_.size(); ++p) {
      const double w = std::exp(log_weights_[p] - hi);
      if (w > 0.0) law(p, m).accumulate_next(doc, t, w, out);
    }
  }
  return Pmf::normalized(std::move(out));
}

void ParticlePredictor::observe(const Corpus& corpus, std::size_t m, std::size_t t) {
  const Document& doc = corpus.documents.at(m);
  const Token x = token_at(doc, t);
  if (logistic_theta_.size() > 0) {
    const Eigen::VectorXd z = logistic_logits(doc, t);
    for (Eigen::Index p = 0; p < z.size(); ++p) {
      const double s = x == 1 ? -z(p) : z(p);  // ln σ(±z) = -softplus(∓z)
      const double lp = s > 0.0 ? -(s + std::log1p(std::exp(-s))) : -std::log1p(std::exp(s));
      log_weights_[static_cast<std::size_t>(p)] += lp;
    }
  } else {
    for (std::size_t p = 0; p < particles_.size(); ++p) {
      if (std::isfinite(log_weights_[p])) log_weights_[p] += law(p, m).log_prob(doc, t, x);
    }
  }
  // Keep weights bounded; the predictive only uses ratios.
  const double hi = *std::max_element(log_weights_.begin(), log_weights_.end());
  if (!std::isfinite(hi)) throw DegeneratePosterior("every particle weight underflowed");
  for (double& v : log_weights_) v = floor_log(v - hi);
}

void ParticlePredictor::end_document() {
  if (!joint_) std::fill(log_weights_.begin(), log_weights_.end(), 0.0);
}

double ParticlePredictor::ess() const { return ess_from_log(log_weights_); }

std::pair<Pmf, double> particle_prior_predict(const Environment& env, std::size_t n_particles,
                                              const Corpus& history, std::size_t m, std::size_t t,
                                              RngStream rng) {
  ParticlePredictor pp(env, std::max<std::size_t>(m + 1, history.num_documents()), n_particles,
                       std::move(rng));
  for (std::size_t j = 0; j <= m; ++j) {
    const std::size_t upto = j < m ? history.documents.at(j).size() : t;
    for (std::size_t s = 0; s < upto; ++s) pp.observe(history, j, s);
    if (j < m) pp.end_document();
  }
  return {pp.predict(history, m, t), pp.ess()};
}

// ---------------------------------------------------------------------------

double SequencePredictor::ess() const { return std::numeric_limits<double>::quiet_NaN(); }

namespace {

class HierarchicalAdapter final : public SequencePredictor {
 public:
  HierarchicalAdapter(std::vector<LawPtr> components, AssignmentPrior prior,
                      HierarchicalOptions options, bool frozen)
      : inner_(std::move(components), std::move(prior), options), frozen_(frozen) {}

  Pmf predict(const Corpus& corpus, std::size_t m, std::size_t t) override {
    return inner_.predict(corpus.documents.at(m), t);
  }
  void observe(const Corpus& corpus, std::size_t m, std::size_t t) override {
    if (!frozen_) inner_.observe(corpus.documents.at(m), t);
  }
  void end_document(const Corpus&, std::size_t) override {
    if (!frozen_) inner_.end_document();
  }
  double ess() const override { return inner_.smc() ? inner_.ess() : SequencePredictor::ess(); }

 private:
  HierarchicalPredictor inner_;
  bool frozen_;
};

class ParticleAdapter final : public SequencePredictor {
 public:
  ParticleAdapter(const Environment& env, std::size_t docs, std::size_t n, RngStream rng,
                  bool frozen)
      : inner_(env, docs, n, std::move(rng)), frozen_(frozen) {}

  Pmf predict(const Corpus& corpus, std::size_t m, std::size_t t) override {
    return inner_.predict(corpus, m, t);
  }
  void observe(const Corpus& corpus, std::size_t m, std::size_t t) override {
    if (!frozen_) inner_.observe(corpus, m, t);
  }
  void end_document(const Corpus&, std::size_t) override { inner_.end_document(); }
  double ess() const override { return inner_.ess(); }

 private:
  ParticlePredictor inner_;
  bool frozen_;
};

class OmniscientPredictor final : public SequencePredictor {
 public:
  explicit OmniscientPredictor(ParameterDraw truth) : truth_(std::move(truth)) {}
  Pmf predict(const Corpus& corpus, std::size_t m, std::size_t t) override {
    return omniscient_predict(truth_, m, corpus.documents.at(m), t);
  }
  void observe(const Corpus&, std::size_t, std::size_t) override {}
  void end_document(const Corpus&, std::size_t) override {}

 private:
  ParameterDraw truth_;
};

class UniformPredictor final : public SequencePredictor {
 public:
  explicit UniformPredictor(std::size_t vocab) : pmf_(Pmf::uniform(vocab)) {}
  Pmf predict(const Corpus&, std::size_t, std::size_t) override { return pmf_; }
  void observe(const Corpus&, std::size_t, std::size_t) override {}
  void end_document(const Corpus&, std::size_t) override {}

 private:
  Pmf pmf_;
};

bool enumerable(const Environment& env) {
  if (std::holds_alternative<TabularSpec>(env)) return true;
  if (const auto* mix = std::get_if<MixtureSpec>(&env)) return mix->known_components();
  return false;
}

std::unique_ptr<SequencePredictor> make_bayes(const Environment& env, const PredictorSpec& spec,
                                              std::size_t docs, RngStream rng, bool frozen) {
  if (enumerable(env)) {
    auto options = spec.hierarchical;
    options.seed = rng.derive(0).engine()();
    return std::make_unique<HierarchicalAdapter>(hypothesis_laws(env), assignment_prior(env),
                                                 options, frozen);
  }
  return std::make_unique<ParticleAdapter>(env, docs, spec.particles, std::move(rng), frozen);
}

}  // namespace

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::bayes: return "bayes";
    case PredictorKind::omniscient: return "omniscient";
    case PredictorKind::psi_informed: return "psi_informed";
    case PredictorKind::uniform: return "uniform";
    case PredictorKind::frozen_prior: return "frozen_prior";
    case PredictorKind::particle: return "particle";
    case PredictorKind::misspecified: return "misspecified";
  }
  return "unknown";
}

PredictorKind parse_predictor_kind(const std::string& name) {
  for (auto k : {PredictorKind::bayes, PredictorKind::omniscient, PredictorKind::psi_informed,
                 PredictorKind::uniform, PredictorKind::frozen_prior, PredictorKind::particle,
                 PredictorKind::misspecified}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown predictor '" + name + "'");
}

bool uses_truth(PredictorKind kind) {
  return kind == PredictorKind::omniscient || kind == PredictorKind::psi_informed;
}

std::unique_ptr<SequencePredictor> make_predictor(const PredictorSpec& spec,
                                                  const Environment& env,
                                                  const ParameterDraw& truth,
                                                  std::size_t num_documents, RngStream rng) {
  switch (spec.kind) {
    case PredictorKind::bayes:
      return make_bayes(env, spec, num_documents, std::move(rng), false);
    case PredictorKind::frozen_prior:
      return make_bayes(env, spec, num_documents, std::move(rng), true);
    case PredictorKind::omniscient:
      return std::make_unique<OmniscientPredictor>(truth);
    case PredictorKind::uniform:
      return std::make_unique<UniformPredictor>(vocab_size(env));
    case PredictorKind::particle:
      return std::make_unique<ParticleAdapter>(env, num_documents, spec.particles, std::move(rng),
                                               false);
    case PredictorKind::misspecified: {
      if (!spec.alternative_prior) {
        throw InvalidArgument("misspecified predictor needs an alternative prior");
      }
      return make_bayes(with_prior(env, *spec.alternative_prior), spec, num_documents,
                        std::move(rng), false);
    }
    case PredictorKind::psi_informed: {
      if (const auto* mix = std::get_if<MixtureSpec>(&env)) {
        if (!mix->known_components() || !truth.mixing) {
          throw UnsupportedMode("ψ-informed predictor needs known mixture components");
        }
        return std::make_unique<HierarchicalAdapter>(mix->components,
                                                     FixedAssignment{*truth.mixing},
                                                     spec.hierarchical, false);
      }
      if (std::holds_alternative<LinRepSpec>(env)) {
        throw UnsupportedMode("ψ-informed predictor is not implemented for linear representation");
      }
      // No shared meta parameter: knowing ψ adds nothing.
      return make_bayes(env, spec, num_documents, std::move(rng), false);
    }
  }
  throw InvalidArgument("make_predictor: unknown kind");
}

RunResult run_predictor(SequencePredictor& predictor, const Corpus& corpus) {
  RunResult r;
  double ess_sum = 0.0;
  std::size_t ess_count = 0;
  for (std::size_t m = 0; m < corpus.num_documents(); ++m) {
    const Document& doc = corpus.documents[m];
    for (std::size_t t = 0; t < doc.size(); ++t) {
      const Pmf p = predictor.predict(corpus, m, t);
      const double e = predictor.ess();
      if (std::isfinite(e)) {
        ess_sum += e;
        ++ess_count;
      }
      const double px = p[static_cast<std::size_t>(doc.tokens[t])];
      r.total_loss += px > 0.0 ? -std::log(px) : std::numeric_limits<double>::infinity();
      predictor.observe(corpus, m, t);
    }
    predictor.end_document(corpus, m);
  }
  r.mean_ess = ess_count ? ess_sum / static_cast<double>(ess_count)
                         : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace icl
