#include "icl/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "icl/bounds.hpp"

namespace icl {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(where, std::string("missing field '") + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

std::size_t count(const json& j, const std::string& where, std::size_t min = 1) {
  if (!j.is_number_integer() || j.get<long long>() < static_cast<long long>(min)) {
    fail(where, "expected an integer >= " + std::to_string(min));
  }
  return j.get<std::size_t>();
}

double number_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

std::size_t count_or(const json& j, const char* key, std::size_t fallback, const std::string& where,
                     std::size_t min = 1) {
  return j.contains(key) ? count(j.at(key), where + "." + key, min) : fallback;
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

Pmf pmf(const json& j, const std::string& where) {
  try {
    return Pmf(numbers(j, where));
  } catch (const InvalidArgument& e) {
    fail(where, e.what());
  }
}

std::vector<Pmf> pmfs(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a nonempty array of probability vectors");
  std::vector<Pmf> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(pmf(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::size_t> counts(const json& j, const std::string& where) {
  if (j.is_number()) return {count(j, where)};
  if (!j.is_array() || j.empty()) fail(where, "expected a positive integer or a nonempty array");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(count(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

TransformerConfig transformer_config(const json& j, const std::string& where) {
  return {count_or(j, "d", 2, where, 2), count_or(j, "r", 2, where), count_or(j, "K", 1, where),
          count_or(j, "L", 1, where)};
}

TabularSpec tabular(const json& j, const std::string& where) {
  const std::string type = j.value("type", "tabular");
  if (type == "two_coin") return make_two_coin(number_or(j, "p", 0.9, where));
  if (type == "iid_tabular") {
    auto rows = pmfs(require(j, "rows", where), where + ".rows");
    const Pmf prior = j.contains("prior") ? pmf(j.at("prior"), where + ".prior") : Pmf::uniform(rows.size());
    return make_iid_tabular(std::move(rows), prior);
  }
  if (type != "tabular") fail(where + ".type", "unknown tabular type '" + type + "'");
  TabularSpec spec;
  spec.vocab = count_or(j, "vocab", 2, where, 2);
  spec.window = count_or(j, "window", 0, where, 0);
  const json& states = require(j, "states", where);
  if (!states.is_array() || states.empty()) fail(where + ".states", "expected a nonempty array");
  for (std::size_t i = 0; i < states.size(); ++i) {
    const std::string w = where + ".states[" + std::to_string(i) + "]";
    TabularState st;
    st.name = states[i].value("name", std::string(1, static_cast<char>('A' + i % 26)));
    st.rows = pmfs(require(states[i], "rows", w), w + ".rows");
    if (states[i].contains("initial")) st.initial = pmf(states[i].at("initial"), w + ".initial");
    spec.states.push_back(std::move(st));
  }
  spec.prior = j.contains("prior") ? pmf(j.at("prior"), where + ".prior") : Pmf::uniform(spec.states.size());
  return spec;
}

bool enumerable(const Environment& env) {
  if (std::holds_alternative<TabularSpec>(env)) return true;
  const auto* mix = std::get_if<MixtureSpec>(&env);
  return mix && mix->known_components();
}

bool discrete_psi(const Environment& env) {
  const auto* mix = std::get_if<MixtureSpec>(&env);
  return mix && mix->known_components() && std::holds_alternative<DiscretePsiPrior>(mix->psi_prior);
}

double residual_of(double loss, double irr, double meta, double intra) {
  if (!std::isfinite(meta) || !std::isfinite(intra)) return kNaN;
  return std::abs(loss - irr - meta - intra);
}

ResultRow exact_row(const ExperimentConfig& c, std::size_t M, std::size_t T) {
  const Environment& env = c.environment;
  ResultRow row;
  row.loss_stderr = 0.0;
  row.ess = kNaN;
  double bayes_loss = 0.0;
  if (discrete_psi(env)) {
    const DecompositionReport d = exact_meta_decomposition(env, M, T, c.cap);
    double intra = 0.0;
    for (double v : d.intra_per_document) intra += v;
    row.irr = d.irreducible;
    row.meta_est = d.meta_estimation;
    row.intra_est = intra / static_cast<double>(M);
    bayes_loss = d.total_loss;
  } else {
    const DecompositionReport d = exact_decomposition(env, T, M, c.cap);
    row.irr = d.irreducible;
    // Tabular θ_m are iid: no shared parameter. A Dirichlet ψ is not
    // separable here, so the whole estimation term sits in intra_est.
    row.meta_est = std::holds_alternative<TabularSpec>(env) ? 0.0 : kNaN;
    row.intra_est = d.intra_estimation;
    bayes_loss = d.total_loss;
  }
  row.loss_mean = c.predictor.kind == PredictorKind::bayes
                      ? bayes_loss
                      : exact_loss(c.predictor, env, enumerate_joint(env, M, T, c.cap));
  const double meta = std::isfinite(row.meta_est) ? row.meta_est : 0.0;
  row.residual = residual_of(row.loss_mean, row.irr, meta, row.intra_est);
  return row;
}

double mean_finite(const std::vector<double>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  return n ? s / static_cast<double>(n) : kNaN;
}

ResultRow mc_row(const ExperimentConfig& c, std::size_t M, std::size_t T, std::size_t n) {
  const Environment& env = c.environment;
  const TrialOptions opts{n, c.seed, c.threads};
  PredictorSpec omni = c.predictor;
  omni.kind = PredictorKind::omniscient;
  const TrialLosses lp = trial_losses(c.predictor, env, M, T, opts);
  const TrialLosses lo =
      c.predictor.kind == PredictorKind::omniscient ? lp : trial_losses(omni, env, M, T, opts);
  const McEstimate loss = summarize(lp.loss);
  const McEstimate est = paired_difference(lp.loss, lo.loss);
  ResultRow row;
  row.loss_mean = loss.mean;
  row.loss_stderr = loss.std_error;
  row.irr = summarize(lo.loss).mean;
  row.ess = mean_finite(lp.ess);
  const bool bayesian = c.predictor.kind == PredictorKind::bayes || c.predictor.kind == PredictorKind::particle;
  const auto* mix = std::get_if<MixtureSpec>(&env);
  if (bayesian && mix && mix->known_components()) {
    PredictorSpec informed = c.predictor;
    informed.kind = PredictorKind::psi_informed;
    const TrialLosses li = trial_losses(informed, env, M, T, opts);
    row.meta_est = paired_difference(lp.loss, li.loss).mean;
    row.intra_est = paired_difference(li.loss, lo.loss).mean;
  } else if (bayesian && !mix && !std::holds_alternative<LinRepSpec>(env)) {
    row.meta_est = 0.0;
    row.intra_est = est.mean;
  } else {
    row.meta_est = kNaN;
    row.intra_est = kNaN;
  }
  row.residual = residual_of(row.loss_mean, row.irr, row.meta_est, row.intra_est);
  return row;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  return v.dump();
}

}  // namespace

// ---------------------------------------------------------------------------

Environment parse_environment(const json& j) {
  const std::string where = "environment";
  if (!j.is_object()) fail(where, "expected an object");
  const std::string type = j.value("type", "");
  Environment env;
  try {
    if (type == "tabular" || type == "two_coin" || type == "iid_tabular") {
      env = tabular(j, where);
    } else if (type == "transformer") {
      TransformerSpec s;
      s.config = transformer_config(j, where);
      if (j.contains("initial")) s.initial = pmf(j.at("initial"), where + ".initial");
      env = s;
    } else if (type == "logistic") {
      env = LogisticSpec{count_or(j, "d", 2, where)};
    } else if (type == "linrep") {
      env = LinRepSpec{count_or(j, "d", 4, where, 2), count_or(j, "r", 2, where)};
    } else if (type == "two_coin_mixture") {
      env = make_two_coin_mixture(number_or(j, "psi_bias", 0.9, where), number_or(j, "coin_bias", 0.9, where));
    } else if (type == "mixture") {
      const json& comp = require(j, "components", where);
      const std::string cw = where + ".components";
      const std::string ctype = comp.value("type", "");
      ComponentSource source;
      std::size_t N = 0;
      if (ctype == "transformer_pool") {
        source = TransformerPool{transformer_config(comp, cw), comp.value("seed", std::uint64_t{0})};
        N = count(require(j, "N", where), where + ".N");
      } else if (ctype == "latent_transformers") {
        source = LatentTransformers{transformer_config(comp, cw)};
        N = count(require(j, "N", where), where + ".N");
      } else {
        TabularSpec tab = tabular(comp, cw);
        N = tab.states.size();
        source = std::move(tab);
      }
      PsiPrior psi = DirichletPsiPrior{};
      if (j.contains("psi_prior")) {
        const json& p = j.at("psi_prior");
        const std::string ptype = p.value("type", "dirichlet");
        if (ptype == "discrete") {
          DiscretePsiPrior d;
          d.atoms = pmfs(require(p, "atoms", where + ".psi_prior"), where + ".psi_prior.atoms");
          d.weights = p.contains("weights") ? pmf(p.at("weights"), where + ".psi_prior.weights")
                                            : Pmf::uniform(d.atoms.size());
          psi = d;
        } else if (ptype != "dirichlet") {
          fail(where + ".psi_prior.type", "unknown ψ prior '" + ptype + "'");
        }
      }
      env = MixtureSpec::make(std::move(source), N, number_or(j, "R", 1.0, where), std::move(psi));
    } else {
      fail(where + ".type", "unknown environment type '" + type + "'");
    }
    validate(env);
  } catch (const InvalidArgument& e) {
    fail(where, e.what());
  }
  return env;
}

PredictorSpec parse_predictor(const json& input) {
  const std::string where = "predictor";
  PredictorSpec spec;
  const json j = input.is_string() ? json{{"kind", input}} : input;
  if (!j.is_object()) fail(where, "expected an object or a predictor name");
  try {
    spec.kind = parse_predictor_kind(j.value("kind", "bayes"));
  } catch (const InvalidArgument& e) {
    fail(where + ".kind", e.what());
  }
  spec.particles = count_or(j, "particles", spec.particles, where);
  if (j.contains("alternative_prior")) spec.alternative_prior = pmf(j.at("alternative_prior"), where + ".alternative_prior");
  if (spec.kind == PredictorKind::misspecified && !spec.alternative_prior) {
    fail(where + ".alternative_prior", "required for the misspecified predictor");
  }
  spec.hierarchical.cap = count_or(j, "hierarchical_cap", spec.hierarchical.cap, where);
  spec.hierarchical.allow_smc = j.value("allow_smc", false);
  spec.hierarchical.force_smc = j.value("force_smc", false);
  spec.hierarchical.particles = count_or(j, "smc_particles", spec.hierarchical.particles, where);
  return spec;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) fail("config", "expected a JSON object");
  ExperimentConfig c;
  c.raw = j;
  c.name = j.value("name", "experiment");
  if (j.contains("environment")) {
    c.environment = parse_environment(j.at("environment"));
  } else {
    c.environment = make_two_coin();
  }
  if (j.contains("predictor")) c.predictor = parse_predictor(j.at("predictor"));
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (!g.is_object()) fail("grid", "expected an object");
    if (g.contains("M")) c.grid.M = counts(g.at("M"), "grid.M");
    if (g.contains("T")) c.grid.T = counts(g.at("T"), "grid.T");
    if (g.contains("tau")) c.grid.tau = counts(g.at("tau"), "grid.tau");
    if (g.contains("n_trials")) c.grid.n_trials = counts(g.at("n_trials"), "grid.n_trials");
  }
  for (auto tau : c.grid.tau) {
    for (auto T : c.grid.T) {
      if (tau > T) {
        fail("grid.tau", "τ = " + std::to_string(tau) + " exceeds T = " + std::to_string(T));
      }
    }
  }
  c.method = j.value("method", "auto");
  if (c.method != "auto" && c.method != "exact" && c.method != "monte_carlo") {
    fail("method", "expected auto, exact or monte_carlo");
  }
  c.cap = count_or(j, "cap", c.cap, "config");
  if (j.contains("seed")) {
    const json& seed = j.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<long long>() < 0)) {
      fail("seed", "expected a nonnegative integer");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.threads = static_cast<unsigned>(count_or(j, "threads", 1, "config"));
  if (j.contains("checks")) {
    if (!j.at("checks").is_array()) fail("checks", "expected an array of names");
    for (const auto& n : j.at("checks")) {
      if (!n.is_string()) fail("checks", "expected check names");
      c.checks.push_back(n.get<std::string>());
    }
  }
  if (j.contains("rd")) c.rd = j.at("rd");
  if (j.contains("bounds")) c.bounds = j.at("bounds");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------

double environment_bound(const Environment& env, std::size_t M, std::size_t T) {
  try {
    return std::visit(
        [&](const auto& e) -> double {
          using E = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<E, TabularSpec>) {
            return bounds::entropy_bound(0.0, entropy(e.prior.probs()), M, T);
          } else if constexpr (std::is_same_v<E, TransformerSpec>) {
            return bounds::transformer_bound(e.config.vocab, e.config.attention_dim, e.config.context,
                                             e.config.depth, T);
          } else if constexpr (std::is_same_v<E, LogisticSpec>) {
            return bounds::logistic_bound(e.dim, T);
          } else if constexpr (std::is_same_v<E, LinRepSpec>) {
            return bounds::linrep_bound(e.vocab, e.rank, M, T);
          } else {
            if (const auto* d = std::get_if<DiscretePsiPrior>(&e.psi_prior)) {
              double h = 0.0;
              for (std::size_t k = 0; k < d->atoms.size(); ++k) h += d->weights[k] * entropy(d->atoms[k].probs());
              return bounds::entropy_bound(entropy(d->weights.probs()), h, M, T);
            }
            const TransformerConfig* cfg = nullptr;
            if (const auto* p = std::get_if<TransformerPool>(&e.source)) cfg = &p->config;
            if (const auto* l = std::get_if<LatentTransformers>(&e.source)) cfg = &l->config;
            if (cfg) {
              return bounds::mixture_transformer_bound(cfg->vocab, cfg->attention_dim, cfg->context,
                                                       cfg->depth, M, T, e.num_components,
                                                       e.concentration)
                  .total;
            }
            return bounds::sparse_meta_bound(e.concentration, M, e.num_components) /
                       static_cast<double>(M * T) +
                   std::log(static_cast<double>(e.num_components)) / static_cast<double>(T);
          }
        },
        env);
  } catch (const InvalidRegime&) {
    return kNaN;
  }
}

std::vector<ResultRow> run_simulation(const ExperimentConfig& c) {
  std::vector<ResultRow> rows;
  for (auto M : c.grid.M) {
    for (auto T : c.grid.T) {
      for (auto n : c.grid.n_trials) {
        ResultRow row;
        bool done = false;
        const bool try_exact = c.method == "exact" ||
                               (c.method == "auto" && enumerable(c.environment) &&
                                c.predictor.kind != PredictorKind::particle);
        if (try_exact) {
          try {
            row = exact_row(c, M, T);
            done = true;
          } catch (const CapacityError&) {
            if (c.method == "exact") throw;
          }
        }
        if (!done) row = mc_row(c, M, T, n);
        row.env = environment_name(c.environment);
        row.predictor = to_string(c.predictor.kind);
        row.M = M;
        row.T = T;
        row.tau = T;
        row.seed = c.seed;
        row.bound_value = environment_bound(c.environment, M, T);
        row.margin = row.bound_value - (row.loss_mean - row.irr);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<ResultRow> run_icl(const ExperimentConfig& c) {
  std::vector<ResultRow> rows;
  for (auto M : c.grid.M) {
    for (auto T : c.grid.T) {
      const std::vector<std::size_t> taus = c.grid.tau.empty() ? std::vector<std::size_t>{T} : c.grid.tau;
      for (auto tau : taus) {
        const IclTerms t = exact_icl_terms(c.environment, M, T, tau, c.cap);
        ResultRow row;
        row.env = environment_name(c.environment);
        row.predictor = to_string(PredictorKind::bayes);
        row.M = M;
        row.T = T;
        row.tau = tau;
        row.loss_mean = t.loss;
        row.loss_stderr = 0.0;
        row.irr = t.irreducible;
        row.meta_est = t.meta;
        row.intra_est = t.in_context;
        row.bound_value = t.bound;
        row.margin = t.bound - t.loss;
        row.ess = kNaN;
        row.seed = c.seed;
        row.residual = kNaN;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

Table results_table(const std::vector<ResultRow>& rows) {
  Table t;
  t.columns = {"env",       "predictor", "M",        "T",           "tau",    "loss_mean",
               "loss_stderr", "irr",     "meta_est", "intra_est",   "bound_value", "margin",
               "ess",       "seed",      "residual"};
  for (const auto& r : rows) {
    t.rows.push_back({r.env, r.predictor, r.M, r.T, r.tau, r.loss_mean, r.loss_stderr, r.irr,
                      r.meta_est, r.intra_est, r.bound_value, r.margin, r.ess, r.seed, r.residual});
  }
  return t;
}

Table run_rd_curve(const ExperimentConfig& c) {
  const json& rd = c.rd;
  const std::string mode = rd.value("mode", "single");
  const std::size_t M = c.grid.M.front(), T = c.grid.T.front();
  Table t;
  if (mode == "channel") {
    ChannelConstruction construction;
    try {
      construction = parse_channel(rd.value("construction", "logistic"));
    } catch (const InvalidArgument& e) {
      fail("rd.construction", e.what());
    }
    const ChannelParams p{count_or(rd, "d", 2, "rd"), count_or(rd, "r", 2, "rd"), count_or(rd, "K", 1, "rd"),
                          count_or(rd, "L", 1, "rd"), count_or(rd, "layer", 1, "rd")};
    const std::vector<double> eps =
        rd.contains("epsilon") ? numbers(rd.at("epsilon"), "rd.epsilon") : std::vector<double>{0.01, 0.1};
    t.columns = {"construction", "epsilon", "rate", "distortion_bound", "distortion_mc", "distortion_stderr"};
    for (double e : eps) {
      double bound = kNaN;
      McEstimate mc{kNaN, kNaN, 0};
      if (construction != ChannelConstruction::linrep_meta) {
        bound = gaussian_channel_distortion_bound(construction, p, e);
        mc = gaussian_channel_distortion_mc(construction, p, e,
                                            TrialOptions{c.grid.n_trials.front(), c.seed, c.threads});
      }
      t.rows.push_back({to_string(construction), e, gaussian_channel_rate(construction, p, e), bound,
                        mc.mean, mc.std_error});
    }
    return t;
  }

  IbOptions opts;
  opts.seed = c.seed;
  opts.restarts = count_or(rd, "restarts", opts.restarts, "rd");
  opts.tolerance = number_or(rd, "tolerance", opts.tolerance, "rd");
  const auto betas = default_beta_grid(count_or(rd, "betas", 80, "rd", 2));
  t.columns = {"part", "beta", "epsilon", "rate", "relevant_info", "info_per_step", "sandwich_lower",
               "sandwich_upper"};
  auto emit = [&](const std::string& part, const std::vector<RdPoint>& curve, double info, double horizon) {
    const Sandwich s = rd_sandwich(curve, info, horizon);
    for (const auto& pt : curve) {
      t.rows.push_back({part, pt.beta, pt.epsilon, pt.rate, pt.relevant_info, info, s.lower, s.upper});
    }
  };
  if (mode == "single") {
    const JointTable table = enumerate_joint(c.environment, M, T, c.cap);
    const DecompositionReport d = exact_decomposition(c.environment, T, M, c.cap);
    const TableKey latent = [](std::size_t l, std::size_t) -> std::uint64_t { return l; };
    emit("theta",
         ib_curve(latent_observation_joint(table, latent, table.latents.size()), betas,
                  static_cast<double>(M * T), opts),
         d.intra_estimation, static_cast<double>(M * T));
  } else if (mode == "meta") {
    const DecompositionReport d = exact_meta_decomposition(c.environment, M, T, c.cap);
    const JointTable table = enumerate_joint(c.environment, M, T, c.cap);
    const TableKey psi = [&](std::size_t l, std::size_t) -> std::uint64_t { return table.latents[l].psi; };
    emit("psi",
         ib_curve(latent_observation_joint(table, psi, table.num_psi), betas, static_cast<double>(M * T), opts),
         d.meta_estimation, static_cast<double>(M * T));
    const ConditionalJoints cj = component_document_joints(c.environment, T, c.cap);
    emit("theta_given_psi", conditional_ib_curve(cj.joints, cj.weights, betas, static_cast<double>(T), opts),
         d.intra_estimation, static_cast<double>(T));
  } else {
    fail("rd.mode", "expected single, meta or channel");
  }
  return t;
}

Table run_bounds(const json& g) {
  auto list = [&](const char* key, std::vector<double> fallback) {
    return g.contains(key) ? numbers(g.at(key), std::string("bounds.") + key) : fallback;
  };
  auto ints = [&](const char* key, std::size_t fallback) {
    return g.contains(key) ? counts(g.at(key), std::string("bounds.") + key) : std::vector<std::size_t>{fallback};
  };
  const auto d = ints("d", 10), r = ints("r", 2), K = ints("K", 1), L = ints("L", 1);
  const auto M = ints("M", 10), T = ints("T", 100), N = ints("N", 100);
  const auto R = list("R", {2.0});
  const auto Hpsi = list("H_psi", {std::log(2.0)}), Htheta = list("H_theta_given_psi", {std::log(2.0)});
  const auto kl = list("kl_prior", {std::log(2.0)});

  Table t;
  t.columns = {"bound", "d", "r", "K", "L", "M", "T", "N", "R", "H_psi", "H_theta_given_psi",
               "kl_prior", "value", "note"};
  auto add = [&](const std::string& name, std::map<std::string, json> params,
                 const std::function<double()>& eval) {
    double v = kNaN;
    std::string note;
    try {
      v = eval();
    } catch (const InvalidRegime& e) {
      note = e.what();
    }
    std::vector<json> row{name};
    for (std::size_t i = 1; i + 2 < t.columns.size(); ++i) {
      const auto it = params.find(t.columns[i]);
      row.push_back(it == params.end() ? json() : it->second);
    }
    row.push_back(v);
    row.push_back(note);
    t.rows.push_back(std::move(row));
  };

  for (auto dd : d)
    for (auto TT : T) add("logistic", {{"d", dd}, {"T", TT}}, [&] { return bounds::logistic_bound(dd, TT); });
  for (auto dd : d)
    for (auto rr : r)
      for (auto KK : K)
        for (auto LL : L)
          for (auto TT : T)
            add("transformer", {{"d", dd}, {"r", rr}, {"K", KK}, {"L", LL}, {"T", TT}},
                [&] { return bounds::transformer_bound(dd, rr, KK, LL, TT); });
  for (auto dd : d)
    for (auto rr : r)
      for (auto MM : M)
        for (auto TT : T)
          add("linrep", {{"d", dd}, {"r", rr}, {"M", MM}, {"T", TT}},
              [&] { return bounds::linrep_bound(dd, rr, MM, TT); });
  for (auto RR : R)
    for (auto MM : M)
      for (auto NN : N)
        add("sparse_meta", {{"R", RR}, {"M", MM}, {"N", NN}}, [&] { return bounds::sparse_meta_bound(RR, MM, NN); });
  for (auto dd : d)
    for (auto rr : r)
      for (auto KK : K)
        for (auto LL : L)
          for (auto MM : M)
            for (auto TT : T)
              for (auto NN : N)
                for (auto RR : R) {
                  std::map<std::string, json> p{{"d", dd}, {"r", rr}, {"K", KK}, {"L", LL},
                                                {"M", MM}, {"T", TT}, {"N", NN}, {"R", RR}};
                  auto term = [&](double bounds::MixtureTerms::*f) {
                    return [=] { return bounds::mixture_transformer_bound(dd, rr, KK, LL, MM, TT, NN, RR).*f; };
                  };
                  add("mixture_sparse", p, term(&bounds::MixtureTerms::sparse));
                  add("mixture_components", p, term(&bounds::MixtureTerms::components));
                  add("mixture_assignment", p, term(&bounds::MixtureTerms::assignment));
                  add("mixture_total", p, term(&bounds::MixtureTerms::total));
                }
  for (auto hp : Hpsi)
    for (auto ht : Htheta)
      for (auto MM : M)
        for (auto TT : T)
          add("entropy", {{"H_psi", hp}, {"H_theta_given_psi", ht}, {"M", MM}, {"T", TT}},
              [&] { return bounds::entropy_bound(hp, ht, MM, TT); });
  for (auto k : kl)
    for (auto MM : M)
      for (auto TT : T)
        add("misspecified", {{"kl_prior", k}, {"M", MM}, {"T", TT}},
            [&] { return bounds::misspecified_bound(k, MM, TT); });
  return t;
}

void write_csv(std::ostream& out, const Table& table) {
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell(row[i]);
    out << '\n';
  }
}

json table_json(const Table& table) {
  json arr = json::array();
  for (const auto& row : table.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) obj[table.columns[i]] = row[i];
    arr.push_back(std::move(obj));
  }
  return arr;
}

json manifest(const ExperimentConfig& c, const std::string& command) {
  return {{"name", c.name},
          {"command", command},
          {"config_hash", hex64(fnv1a(c.raw.dump()))},
          {"version", ICL_VERSION},
          {"seed", c.seed},
          {"threads", c.threads},
          {"environment", environment_name(c.environment)}};
}

}  // namespace icl
