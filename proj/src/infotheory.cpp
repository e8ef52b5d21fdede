#include "icl/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace icl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double xlogy_ratio(double p, double num, double den) {
  return p > 0.0 ? p * std::log(num / den) : 0.0;
}

}  // namespace

// ---------------------------------------------------------------------------

TrialLosses trial_losses(const PredictorSpec& predictor, const Environment& env,
                         std::size_t num_documents, std::size_t length,
                         const TrialOptions& options) {
  if (options.n_trials == 0) throw InvalidArgument("n_trials must be >= 1");
  if (num_documents == 0 || length == 0) throw InvalidArgument("need M, T >= 1");
  validate(env);
  TrialLosses out;
  out.loss.assign(options.n_trials, 0.0);
  out.ess.assign(options.n_trials, std::numeric_limits<double>::quiet_NaN());
  const double steps = static_cast<double>(num_documents * length);
  parallel_for(options.n_trials, options.threads, [&](std::size_t i) {
    const RngStream base(options.seed, i);
    RngStream param_rng = base.derive(0);
    const ParameterDraw params = sample_parameters(env, num_documents, param_rng);
    RngStream corpus_rng = base.derive(1);
    const Corpus corpus = sample_corpus(env, params, length, corpus_rng);
    auto p = make_predictor(predictor, env, params, num_documents, base.derive(2));
    const RunResult r = run_predictor(*p, corpus);
    out.loss[i] = r.total_loss / steps;
    out.ess[i] = r.mean_ess;
  });
  return out;
}

McEstimate estimate_log_loss(const PredictorSpec& predictor, const Environment& env,
                             std::size_t num_documents, std::size_t length,
                             const TrialOptions& options) {
  return summarize(trial_losses(predictor, env, num_documents, length, options).loss);
}

McEstimate paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidArgument("paired_difference: length mismatch");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return summarize(diff);
}

// ---------------------------------------------------------------------------

double conditional_entropy(const JointTable& table, const TableKey& a, const TableKey& c) {
  std::map<std::pair<std::uint64_t, std::uint64_t>, double> pac;
  std::map<std::uint64_t, double> pc;
  for (std::size_t l = 0; l < table.latents.size(); ++l) {
    for (std::size_t s = 0; s < table.num_sequences; ++s) {
      const double p = table.at(l, s);
      if (p <= 0.0) continue;
      const auto kc = c(l, s);
      pac[{a(l, s), kc}] += p;
      pc[kc] += p;
    }
  }
  double h = 0.0;
  for (const auto& [k, p] : pac) h -= xlogy_ratio(p, p, pc[k.second]);
  return std::max(h, 0.0);
}

double conditional_mutual_information(const JointTable& table, const TableKey& a,
                                      const TableKey& b, const TableKey& c) {
  using K3 = std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>;
  using K2 = std::pair<std::uint64_t, std::uint64_t>;
  std::map<K3, double> pabc;
  std::map<K2, double> pac, pbc;
  std::map<std::uint64_t, double> pc;
  for (std::size_t l = 0; l < table.latents.size(); ++l) {
    for (std::size_t s = 0; s < table.num_sequences; ++s) {
      const double p = table.at(l, s);
      if (p <= 0.0) continue;
      const auto ka = a(l, s), kb = b(l, s), kc = c(l, s);
      pabc[{ka, kb, kc}] += p;
      pac[{ka, kc}] += p;
      pbc[{kb, kc}] += p;
      pc[kc] += p;
    }
  }
  double mi = 0.0;
  for (const auto& [k, p] : pabc) {
    const auto [ka, kb, kc] = k;
    mi += xlogy_ratio(p, p * pc[kc], pac[{ka, kc}] * pbc[{kb, kc}]);
  }
  return std::max(mi, 0.0);
}

double exact_loss(const PredictorSpec& predictor, const Environment& env, const JointTable& table) {
  const double steps = static_cast<double>(table.num_documents * table.length);
  double total = 0.0;
  if (!uses_truth(predictor.kind)) {
    const auto marginal = table.sequence_marginal();
    for (std::size_t s = 0; s < table.num_sequences; ++s) {
      if (marginal[s] <= 0.0) continue;
      const Corpus corpus = table.decode(s);
      auto p = make_predictor(predictor, env, ParameterDraw{}, table.num_documents,
                              RngStream(predictor.hierarchical.seed, s));
      total += marginal[s] * run_predictor(*p, corpus).total_loss;
    }
  } else {
    for (std::size_t l = 0; l < table.latents.size(); ++l) {
      const ParameterDraw draw = draw_from_latent(env, table, table.latents[l]);
      for (std::size_t s = 0; s < table.num_sequences; ++s) {
        const double w = table.at(l, s);
        if (w <= 0.0) continue;
        auto p = make_predictor(predictor, env, draw, table.num_documents,
                                RngStream(predictor.hierarchical.seed, s));
        total += w * run_predictor(*p, table.decode(s)).total_loss;
      }
    }
  }
  return total / steps;
}

namespace {

const TableKey kConst = [](std::size_t, std::size_t) -> std::uint64_t { return 0; };
const TableKey kLatent = [](std::size_t l, std::size_t) -> std::uint64_t { return l; };
const TableKey kSequence = [](std::size_t, std::size_t s) -> std::uint64_t { return s; };

std::uint64_t encode_assignment(const std::vector<std::size_t>& a, std::size_t base) {
  std::uint64_t v = 0;
  for (auto b : a) v = v * base + b;
  return v;
}

const DiscretePsiPrior& require_discrete_psi(const Environment& env) {
  const auto* mix = std::get_if<MixtureSpec>(&env);
  const DiscretePsiPrior* disc = mix ? std::get_if<DiscretePsiPrior>(&mix->psi_prior) : nullptr;
  if (!disc || !mix->known_components()) {
    throw UnsupportedMode("exact meta quantities need a mixture with known components and a "
                          "discrete ψ prior; use the Monte Carlo path");
  }
  return *disc;
}

}  // namespace

DecompositionReport exact_decomposition(const Environment& env, std::size_t length,
                                        std::size_t num_documents, std::size_t cap) {
  const JointTable table = enumerate_joint(env, num_documents, length, cap);
  const double steps = static_cast<double>(num_documents * length);
  DecompositionReport r;
  r.mode = "exact";
  r.total_loss = exact_loss(PredictorSpec{}, env, table);
  r.irreducible = conditional_entropy(table, kSequence, kLatent) / steps;
  r.intra_estimation = conditional_mutual_information(table, kSequence, kLatent, kConst) / steps;
  r.intra_per_document = {r.intra_estimation};
  r.residual = std::abs(r.total_loss - r.irreducible - r.intra_estimation);
  return r;
}

DecompositionReport exact_meta_decomposition(const Environment& env, std::size_t num_documents,
                                             std::size_t length, std::size_t cap) {
  require_discrete_psi(env);
  const JointTable table = enumerate_joint(env, num_documents, length, cap);
  const std::size_t n = hypothesis_laws(env).size();
  const double MT = static_cast<double>(num_documents * length);
  const double T = static_cast<double>(length);

  const TableKey psi = [&](std::size_t l, std::size_t) -> std::uint64_t {
    return table.latents[l].psi;
  };
  const TableKey assignment = [&](std::size_t l, std::size_t) -> std::uint64_t {
    return encode_assignment(table.latents[l].assignment, n);
  };

  DecompositionReport r;
  r.mode = "exact";
  r.total_loss = exact_loss(PredictorSpec{}, env, table);
  r.irreducible = conditional_entropy(table, kSequence, assignment) / MT;
  r.meta_estimation = conditional_mutual_information(table, kSequence, psi, kConst) / MT;
  double intra_sum = 0.0;
  for (std::size_t m = 0; m < num_documents; ++m) {
    const TableKey doc = [&, m](std::size_t, std::size_t s) -> std::uint64_t {
      return table.document_index(s, m);
    };
    const TableKey component = [&, m](std::size_t l, std::size_t) -> std::uint64_t {
      return table.latents[l].assignment[m];
    };
    const double v = conditional_mutual_information(table, doc, component, psi) / T;
    r.intra_per_document.push_back(v);
    intra_sum += v;
  }
  r.intra_estimation = r.intra_per_document.front();
  r.residual = std::abs(r.total_loss - r.irreducible - r.meta_estimation -
                        intra_sum / static_cast<double>(num_documents));
  return r;
}

DecompositionReport mc_meta_terms(const Environment& env, std::size_t num_documents,
                                  std::size_t length, const TrialOptions& options,
                                  const PredictorSpec& base) {
  PredictorSpec bayes = base, informed = base, omniscient = base;
  bayes.kind = PredictorKind::bayes;
  informed.kind = PredictorKind::psi_informed;
  omniscient.kind = PredictorKind::omniscient;
  const auto lb = trial_losses(bayes, env, num_documents, length, options).loss;
  const auto li = trial_losses(informed, env, num_documents, length, options).loss;
  const auto lo = trial_losses(omniscient, env, num_documents, length, options).loss;
  const McEstimate total = summarize(lb), irr = summarize(lo);
  const McEstimate meta = paired_difference(lb, li), intra = paired_difference(li, lo);
  DecompositionReport r;
  r.mode = "monte_carlo";
  r.total_loss = total.mean;
  r.total_stderr = total.std_error;
  r.irreducible = irr.mean;
  r.irreducible_stderr = irr.std_error;
  r.meta_estimation = meta.mean;
  r.meta_stderr = meta.std_error;
  r.intra_estimation = intra.mean;
  r.intra_stderr = intra.std_error;
  r.residual = std::abs(r.total_loss - r.irreducible - r.meta_estimation - r.intra_estimation);
  r.n_trials = options.n_trials;
  return r;
}

IclTerms exact_icl_terms(const Environment& env, std::size_t num_documents, std::size_t length,
                         std::size_t tau, std::size_t cap) {
  if (tau < 1 || tau > length) throw InvalidArgument("in-context length τ must be in [1, T]");
  require_discrete_psi(env);
  const std::size_t M = num_documents;
  const JointTable table = enumerate_joint(env, M + 1, length, cap);
  std::size_t per_doc = 1;
  for (std::size_t t = 0; t < length; ++t) per_doc *= table.vocab;
  const double tau_d = static_cast<double>(tau);

  // Exact posterior loss on the first τ tokens of document M+1.
  double loss = 0.0;
  const auto marginal = table.sequence_marginal();
  for (std::size_t s = 0; s < table.num_sequences; ++s) {
    if (marginal[s] <= 0.0) continue;
    const Corpus corpus = table.decode(s);
    auto p = make_predictor(PredictorSpec{}, env, ParameterDraw{}, M + 1, RngStream(0, s));
    double seq_loss = 0.0;
    for (std::size_t m = 0; m <= M; ++m) {
      const std::size_t steps = m < M ? length : tau;
      for (std::size_t t = 0; t < steps; ++t) {
        if (m == M) {
          const Pmf q = p->predict(corpus, m, t);
          seq_loss -= std::log(q[static_cast<std::size_t>(corpus.documents[m].tokens[t])]);
        }
        p->observe(corpus, m, t);
      }
      p->end_document(corpus, m);
    }
    loss += marginal[s] * seq_loss;
  }

  const TableKey psi = [&](std::size_t l, std::size_t) -> std::uint64_t {
    return table.latents[l].psi;
  };
  const TableKey prefix = [&](std::size_t, std::size_t s) -> std::uint64_t {
    return table.document_prefix_index(s, M, tau);
  };
  const TableKey component = [&](std::size_t l, std::size_t) -> std::uint64_t {
    return table.latents[l].assignment[M];
  };
  const TableKey pretraining = [&](std::size_t, std::size_t s) -> std::uint64_t {
    return s / per_doc;
  };

  IclTerms r;
  r.loss = loss / tau_d;
  r.irreducible = conditional_entropy(table, prefix, component) / tau_d;
  r.meta = conditional_mutual_information(table, pretraining, psi, kConst) /
           (static_cast<double>(M) * tau_d);
  r.in_context = conditional_mutual_information(table, prefix, component, psi) / tau_d;
  r.bound = r.irreducible + r.meta + r.in_context;
  r.remark_form = r.irreducible + r.in_context;
  return r;
}

double iid_mixture_information(const std::vector<Pmf>& rows, const Pmf& weights, std::size_t tau) {
  if (rows.empty() || rows.size() != weights.size()) {
    throw InvalidArgument("iid_mixture_information: one weight per row required");
  }
  const std::size_t d = rows.front().size();
  const std::size_t B = rows.size();
  std::vector<std::size_t> counts(d, 0);
  double info = 0.0;
  std::vector<double> logp(B);
  // Enumerate every composition of τ into d parts.
  auto visit = [&](auto&& self, std::size_t i, std::size_t left) -> void {
    if (i + 1 == d) {
      counts[i] = left;
      double coef = std::lgamma(static_cast<double>(tau) + 1.0);
      for (auto c : counts) coef -= std::lgamma(static_cast<double>(c) + 1.0);
      for (std::size_t b = 0; b < B; ++b) {
        double v = coef;
        for (std::size_t x = 0; x < d && std::isfinite(v); ++x) {
          if (counts[x] == 0) continue;
          v = rows[b][x] > 0.0 ? v + static_cast<double>(counts[x]) * std::log(rows[b][x]) : -kInf;
        }
        logp[b] = v;
      }
      std::vector<double> joint(B);
      for (std::size_t b = 0; b < B; ++b) {
        joint[b] = weights[b] > 0.0 ? std::log(weights[b]) + logp[b] : -kInf;
      }
      const double lm = logsumexp(joint);
      if (!std::isfinite(lm)) return;
      for (std::size_t b = 0; b < B; ++b) {
        if (std::isfinite(joint[b])) info += std::exp(joint[b]) * (logp[b] - lm);
      }
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[i] = c;
      self(self, i + 1, left - c);
    }
  };
  visit(visit, 0, tau);
  return std::max(info, 0.0);
}

// ---------------------------------------------------------------------------
// Information bottleneck.

Eigen::MatrixXd latent_observation_joint(const JointTable& table, const TableKey& latent,
                                         std::size_t num_latents) {
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_latents),
                                                static_cast<Eigen::Index>(table.num_sequences));
  for (std::size_t l = 0; l < table.latents.size(); ++l) {
    for (std::size_t s = 0; s < table.num_sequences; ++s) {
      const auto k = latent(l, s);
      if (k >= num_latents) throw InvalidArgument("latent_observation_joint: key out of range");
      joint(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) += table.at(l, s);
    }
  }
  return joint;
}

std::vector<double> default_beta_grid(std::size_t points) {
  std::vector<double> betas{0.0};
  const double lo = std::log(1e-3), hi = std::log(1e4);
  for (std::size_t i = 0; i < points; ++i) {
    betas.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                      static_cast<double>(std::max<std::size_t>(points - 1, 1))));
  }
  return betas;
}

namespace {

struct IbProblem {
  Eigen::VectorXd px;
  Eigen::MatrixXd py_x;  // rows: p(y|x)
  Eigen::RowVectorXd py;
  double ixy = 0.0;
  double hx = 0.0;
};

IbProblem make_problem(const Eigen::MatrixXd& joint) {
  if (joint.size() == 0 || (joint.array() < 0.0).any() || !joint.allFinite()) {
    throw InvalidArgument("ib_curve: joint must be a nonempty nonnegative matrix");
  }
  const double total = joint.sum();
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("ib_curve: joint must sum to 1");
  IbProblem p;
  p.px = joint.rowwise().sum();
  p.py = joint.colwise().sum();
  p.py_x = Eigen::MatrixXd::Zero(joint.rows(), joint.cols());
  for (Eigen::Index x = 0; x < joint.rows(); ++x) {
    if (p.px(x) > 0.0) p.py_x.row(x) = joint.row(x) / p.px(x);
    if (p.px(x) > 0.0) p.hx -= p.px(x) * std::log(p.px(x));
    for (Eigen::Index y = 0; y < joint.cols(); ++y) {
      p.ixy += xlogy_ratio(joint(x, y), p.py_x(x, y), p.py(y));
    }
  }
  p.ixy = std::max(p.ixy, 0.0);
  return p;
}

struct IbSolution {
  bool converged = false;
  double rate = 0.0;
  double relevant = 0.0;
  std::size_t iterations = 0;
};

double kl_rows(const Eigen::MatrixXd& a, Eigen::Index ia, const Eigen::MatrixXd& b, Eigen::Index ib) {
  double kl = 0.0;
  for (Eigen::Index y = 0; y < a.cols(); ++y) {
    const double p = a(ia, y);
    if (p <= 0.0) continue;
    const double q = b(ib, y);
    if (q <= 0.0) return kInf;
    kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);
}

IbSolution solve_ib(const IbProblem& prob, double beta, Eigen::MatrixXd q,  // q(t|x), rows x
                    const IbOptions& options) {
  const Eigen::Index nx = prob.px.size();
  const Eigen::Index nt = q.cols();
  const Eigen::Index ny = prob.py.size();
  IbSolution sol;
  double prev_rate = kInf, prev_rel = kInf;
  Eigen::VectorXd qt(nt);
  Eigen::MatrixXd py_t(nt, ny);
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    qt = q.transpose() * prob.px;
    py_t.setZero();
    for (Eigen::Index x = 0; x < nx; ++x) {
      if (prob.px(x) <= 0.0) continue;
      for (Eigen::Index t = 0; t < nt; ++t) {
        if (q(x, t) > 0.0) py_t.row(t) += prob.px(x) * q(x, t) * prob.py_x.row(x);
      }
    }
    for (Eigen::Index t = 0; t < nt; ++t) {
      if (qt(t) > 0.0) py_t.row(t) /= qt(t);
    }
    // Objective terms of the current encoder.
    double rate = 0.0, rel = 0.0;
    for (Eigen::Index x = 0; x < nx; ++x) {
      for (Eigen::Index t = 0; t < nt; ++t) rate += xlogy_ratio(prob.px(x) * q(x, t), q(x, t), qt(t));
    }
    for (Eigen::Index t = 0; t < nt; ++t) {
      if (qt(t) <= 0.0) continue;
      for (Eigen::Index y = 0; y < ny; ++y) rel += xlogy_ratio(qt(t) * py_t(t, y), py_t(t, y), prob.py(y));
    }
    rate = std::max(rate, 0.0);
    rel = std::max(rel, 0.0);
    sol.rate = rate;
    sol.relevant = rel;
    sol.iterations = it + 1;
    if (std::abs(rate - prev_rate) < options.tolerance && std::abs(rel - prev_rel) < options.tolerance) {
      sol.converged = true;
      return sol;
    }
    prev_rate = rate;
    prev_rel = rel;
    // Self-consistent encoder update.
    std::vector<double> lw(static_cast<std::size_t>(nt));
    for (Eigen::Index x = 0; x < nx; ++x) {
      for (Eigen::Index t = 0; t < nt; ++t) {
        if (qt(t) <= 0.0) {
          lw[static_cast<std::size_t>(t)] = -kInf;
          continue;
        }
        const double d = beta > 0.0 ? kl_rows(prob.py_x, x, py_t, t) : 0.0;
        lw[static_cast<std::size_t>(t)] = std::isfinite(d) ? std::log(qt(t)) - beta * d : -kInf;
      }
      const double z = logsumexp(lw);
      for (Eigen::Index t = 0; t < nt; ++t) {
        q(x, t) = std::isfinite(z) ? std::exp(lw[static_cast<std::size_t>(t)] - z) : 0.0;
      }
      if (!std::isfinite(z)) q(x, 0) = 1.0;
    }
  }
  return sol;
}

Eigen::MatrixXd initial_encoder(std::size_t restart, Eigen::Index n, RngStream& rng) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  if (restart == 0) {
    q.setIdentity();
  } else if (restart == 1) {
    q.col(0).setOnes();
  } else {
    for (Eigen::Index x = 0; x < n; ++x) {
      for (Eigen::Index t = 0; t < n; ++t) q(x, t) = -std::log(1.0 - rng.uniform());
      q.row(x) /= q.row(x).sum();
    }
  }
  return q;
}

/// All converged restarts for one β. Throws when none converge.
std::vector<IbSolution> solve_restarts(const IbProblem& prob, double beta,
                                       const IbOptions& options, std::uint64_t stream) {
  RngStream rng(options.seed, stream);
  std::vector<IbSolution> out;
  std::size_t worst_iterations = 0;
  for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1); ++r) {
    auto sol = solve_ib(prob, beta, initial_encoder(r, prob.px.size(), rng), options);
    worst_iterations = std::max(worst_iterations, sol.iterations);
    if (sol.converged) out.push_back(sol);
  }
  if (out.empty()) {
    throw ConvergenceError("information bottleneck did not converge at beta=" +
                           std::to_string(beta) + " after " + std::to_string(worst_iterations) +
                           " iterations in every restart");
  }
  return out;
}

std::vector<RdPoint> pareto(std::vector<RdPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const RdPoint& a, const RdPoint& b) {
    return a.epsilon != b.epsilon ? a.epsilon < b.epsilon : a.rate < b.rate;
  });
  std::vector<RdPoint> out;
  double best = kInf;
  for (const auto& p : pts) {
    if (p.rate < best - 1e-15) {
      out.push_back(p);
      best = p.rate;
    }
  }
  return out;
}

RdPoint make_point(double beta, double rate, double relevant, double ixy, double horizon) {
  return {beta, std::max(ixy - relevant, 0.0) / horizon, rate, relevant};
}

}  // namespace

std::vector<RdPoint> ib_curve(const Eigen::MatrixXd& joint, const std::vector<double>& betas,
                              double horizon, const IbOptions& options) {
  if (!(horizon > 0.0)) throw InvalidArgument("ib_curve: horizon must be positive");
  const IbProblem prob = make_problem(joint);
  std::vector<RdPoint> pts;
  // Identity and constant encoders bracket the curve.
  pts.push_back(make_point(kInf, prob.hx, prob.ixy, prob.ixy, horizon));
  pts.push_back(make_point(0.0, 0.0, 0.0, prob.ixy, horizon));
  for (std::size_t b = 0; b < betas.size(); ++b) {
    if (!(betas[b] >= 0.0)) throw InvalidArgument("ib_curve: beta must be >= 0");
    for (const auto& s : solve_restarts(prob, betas[b], options, b)) {
      pts.push_back(make_point(betas[b], s.rate, s.relevant, prob.ixy, horizon));
    }
  }
  return pareto(std::move(pts));
}

std::vector<RdPoint> conditional_ib_curve(const std::vector<Eigen::MatrixXd>& joints,
                                          const Pmf& psi_weights,
                                          const std::vector<double>& betas, double horizon,
                                          const IbOptions& options) {
  if (joints.size() != psi_weights.size()) {
    throw InvalidArgument("conditional_ib_curve: one joint per ψ atom required");
  }
  if (!(horizon > 0.0)) throw InvalidArgument("conditional_ib_curve: horizon must be positive");
  std::vector<IbProblem> probs;
  double ixy = 0.0, hx = 0.0;
  for (std::size_t k = 0; k < joints.size(); ++k) {
    probs.push_back(make_problem(joints[k]));
    ixy += psi_weights[k] * probs.back().ixy;
    hx += psi_weights[k] * probs.back().hx;
  }
  std::vector<RdPoint> pts;
  pts.push_back(make_point(kInf, hx, ixy, ixy, horizon));
  pts.push_back(make_point(0.0, 0.0, 0.0, ixy, horizon));
  for (std::size_t b = 0; b < betas.size(); ++b) {
    double rate = 0.0, rel = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (psi_weights[k] == 0.0) continue;
      IbOptions opt = options;
      opt.seed = splitmix64(options.seed ^ (k + 1));
      const auto sols = solve_restarts(probs[k], betas[b], opt, b);
      // Lowest Lagrangian per atom: the shared-β optimum decomposes over ψ.
      const auto best = std::min_element(sols.begin(), sols.end(), [&](const auto& x, const auto& y) {
        return x.rate - betas[b] * x.relevant < y.rate - betas[b] * y.relevant;
      });
      rate += psi_weights[k] * best->rate;
      rel += psi_weights[k] * best->relevant;
    }
    pts.push_back(make_point(betas[b], rate, rel, ixy, horizon));
  }
  return pareto(std::move(pts));
}

ConditionalJoints component_document_joints(const Environment& env, std::size_t length,
                                            std::size_t cap) {
  const DiscretePsiPrior& disc = require_discrete_psi(env);
  const JointTable single = enumerate_joint(env, 1, length, cap);
  const auto n = static_cast<Eigen::Index>(hypothesis_laws(env).size());
  std::vector<Eigen::MatrixXd> joints(
      disc.atoms.size(), Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(single.num_sequences)));
  for (std::size_t l = 0; l < single.latents.size(); ++l) {
    const auto& lat = single.latents[l];
    for (std::size_t s = 0; s < single.num_sequences; ++s) {
      joints[lat.psi](static_cast<Eigen::Index>(lat.assignment[0]), static_cast<Eigen::Index>(s)) +=
          single.at(l, s);
    }
  }
  ConditionalJoints out;
  std::vector<double> w;
  for (std::size_t k = 0; k < joints.size(); ++k) {
    if (disc.weights[k] <= 0.0) continue;
    out.joints.push_back(joints[k] / joints[k].sum());
    w.push_back(disc.weights[k]);
  }
  out.weights = Pmf::normalized(std::move(w));
  return out;
}

double rd_rate_at(const std::vector<RdPoint>& curve, double epsilon) {
  double best = kInf;
  for (const auto& p : curve) {
    if (p.epsilon <= epsilon) best = std::min(best, p.rate);
  }
  return best;
}

Sandwich rd_sandwich(const std::vector<RdPoint>& curve, double info_per_step, double horizon,
                     std::size_t points) {
  if (points < 2) throw InvalidArgument("rd_sandwich: need at least 2 grid points");
  Sandwich s;
  const double lo = std::log(1e-4), hi = std::log(std::max(2.0 * info_per_step, 2e-4));
  s.lower = -kInf;
  s.upper = kInf;
  for (std::size_t i = 0; i < points; ++i) {
    const double eps = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
    s.grid.push_back(eps);
    const double h = rd_rate_at(curve, eps) / horizon;
    s.lower = std::max(s.lower, std::min(h, eps));
    s.upper = std::min(s.upper, h + eps);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Gaussian channels.

std::string to_string(ChannelConstruction c) {
  switch (c) {
    case ChannelConstruction::logistic: return "logistic";
    case ChannelConstruction::linrep_meta: return "linrep_meta";
    case ChannelConstruction::linrep_task: return "linrep_task";
    case ChannelConstruction::transformer_layer: return "transformer_layer";
  }
  return "unknown";
}

ChannelConstruction parse_channel(const std::string& name) {
  for (auto c : {ChannelConstruction::logistic, ChannelConstruction::linrep_meta,
                 ChannelConstruction::linrep_task, ChannelConstruction::transformer_layer}) {
    if (to_string(c) == name) return c;
  }
  throw InvalidArgument("unknown channel construction '" + name + "'");
}

double gaussian_channel_rate(ChannelConstruction c, const ChannelParams& p, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("gaussian_channel_rate: epsilon must be > 0");
  const double d = static_cast<double>(p.d), r = static_cast<double>(p.r);
  switch (c) {
    case ChannelConstruction::logistic:
      return 0.5 * d * std::log1p(1.0 / (8.0 * epsilon));
    case ChannelConstruction::linrep_meta:
      return 0.5 * d * r * std::log1p(1.0 / (r * epsilon));
    case ChannelConstruction::linrep_task:
      return 0.5 * r * std::log1p(1.0 / (r * epsilon));
    case ChannelConstruction::transformer_layer:
      return 0.5 * d * d * std::log1p(d / epsilon) + 0.5 * r * r * std::log1p(r / epsilon);
  }
  throw InvalidArgument("gaussian_channel_rate: unknown construction");
}

double gaussian_channel_distortion_bound(ChannelConstruction c, const ChannelParams& p,
                                         double epsilon) {
  switch (c) {
    case ChannelConstruction::logistic:
      return epsilon;
    case ChannelConstruction::linrep_task:
      return static_cast<double>(p.r) * epsilon;
    case ChannelConstruction::transformer_layer: {
      if (p.layer < 1 || p.layer > p.L) throw InvalidArgument("layer must be in [1, L]");
      const double K = static_cast<double>(p.K);
      return epsilon * K * static_cast<double>(p.d) *
             std::pow(2.0 * K + 2.0 * K * K, static_cast<double>(p.L - p.layer + 1));
    }
    case ChannelConstruction::linrep_meta:
      break;
  }
  throw UnsupportedMode("linrep_meta perturbs ψ; its distortion has no per-step KL form");
}

Eigen::MatrixXd random_unit_columns(std::size_t d, std::size_t K, RngStream& rng) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(K));
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    double n = 0.0;
    do {
      for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, k) = rng.normal();
      n = x.col(k).norm();
    } while (n == 0.0);
    x.col(k) /= n;
  }
  return x;
}

namespace {

double bernoulli_kl_logits(double a, double b) {
  auto log_sig = [](double z) { return z > 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); };
  const double pa = 1.0 / (1.0 + std::exp(-a));
  return std::max(0.0, pa * (log_sig(a) - log_sig(b)) + (1.0 - pa) * (log_sig(-a) - log_sig(-b)));
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double sd, RngStream& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = sd * rng.normal();
  return m;
}

}  // namespace

McEstimate gaussian_channel_distortion_mc(ChannelConstruction c, const ChannelParams& p,
                                          double epsilon, const TrialOptions& options) {
  if (!(epsilon >= 0.0)) throw InvalidArgument("distortion: epsilon must be >= 0");
  if (options.n_trials == 0) throw InvalidArgument("n_trials must be >= 1");
  if (c == ChannelConstruction::linrep_meta) {
    throw UnsupportedMode("linrep_meta perturbs ψ; its distortion has no per-step KL form");
  }
  std::vector<double> values(options.n_trials, 0.0);
  parallel_for(options.n_trials, options.threads, [&](std::size_t i) {
    RngStream rng(options.seed, i);
    switch (c) {
      case ChannelConstruction::logistic: {
        const Eigen::VectorXd theta = sample_unit_ball(p.d, rng);
        const double sd = std::sqrt(8.0 * epsilon / static_cast<double>(p.d));
        const Eigen::VectorXd noisy = theta + gaussian_matrix(theta.size(), 1, sd, rng);
        const Eigen::VectorXd x = gaussian_matrix(theta.size(), 1, 1.0, rng);
        values[i] = bernoulli_kl_logits(theta.dot(x), noisy.dot(x));
        break;
      }
      case ChannelConstruction::linrep_task: {
        const Eigen::MatrixXd psi = sample_orthonormal(p.d, p.r, rng);
        const auto r = static_cast<Eigen::Index>(p.r);
        const Eigen::VectorXd xi = gaussian_matrix(r, 1, 1.0 / std::sqrt(static_cast<double>(p.r)), rng);
        const Eigen::VectorXd noisy = xi + gaussian_matrix(r, 1, std::sqrt(epsilon), rng);
        values[i] = kl_divergence(softmax(Eigen::VectorXd(psi * xi)),
                                  softmax(Eigen::VectorXd(psi * noisy)));
        break;
      }
      case ChannelConstruction::transformer_layer: {
        TransformerConfig cfg{p.d, p.r, p.K, p.L};
        if (p.layer < 1 || p.layer > p.L) throw InvalidArgument("layer must be in [1, L]");
        const TransformerWeights w = sample_transformer_weights(cfg, rng);
        std::vector<Token> window(p.K);
        for (auto& tok : window) tok = static_cast<Token>(rng.uniform_index(p.d));
        TransformerWeights noisy = w;
        const auto d = static_cast<Eigen::Index>(p.d), r = static_cast<Eigen::Index>(p.r);
        const std::size_t li = p.layer - 1;
        noisy.value[li] += gaussian_matrix(d, d, std::sqrt(epsilon) / static_cast<double>(p.d), rng);
        noisy.attention[li] += gaussian_matrix(r, r, std::sqrt(epsilon / static_cast<double>(p.r)), rng);
        values[i] = kl_divergence(transformer_forward(w, window), transformer_forward(noisy, window));
        break;
      }
      case ChannelConstruction::linrep_meta:
        break;
    }
  });
  return summarize(values);
}

}  // namespace icl
