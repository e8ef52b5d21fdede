// Acceptance run: one PASS/FAIL line per criterion, with the observed
// numbers and wall time. Exit status is the number of failures that are
// not explained by an inconsistent reference value.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <tuple>
#include <sstream>
#include <string>
#include <vector>

#include "icl/bounds.hpp"
#include "icl/experiment.hpp"
#include "icl/infotheory.hpp"
#include "icl/verify.hpp"

using namespace icl;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
  std::string unattainable;  // nonempty: the reference itself is inconsistent
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;  // 0: no budget
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

bool all_passed(const std::vector<CheckReport>& rs, double& worst) {
  worst = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (const auto& r : rs) {
    ok = ok && r.passed;
    worst = std::min(worst, r.margin);
  }
  return ok;
}

// Closed-form values recomputed from first principles in long double.
long double lnl(long double x) { return std::log(x); }

Outcome decomposition_identity() {
  Outcome o{true, {}, {}};
  double worst = 0.0;
  for (std::size_t T : {1, 2, 4}) {
    const auto r = exact_decomposition(make_two_coin(0.9), T);
    worst = std::max(worst, std::abs(r.residual));
    o.passed = o.passed && std::abs(r.residual) < 1e-9;
  }
  const auto r1 = exact_decomposition(make_two_coin(0.9), 1);
  const long double h = -(0.9L * lnl(0.9L) + 0.1L * lnl(0.1L));
  const long double ln2 = lnl(2.0L);
  const double oracle[3] = {double(ln2), double(h), double(ln2 - h)};
  const double got[3] = {r1.total_loss, r1.irreducible, r1.intra_estimation};
  const double shown[3] = {0.69315, 0.32508, 0.36807};
  const char* label[3] = {"loss", "irreducible", "estimation"};
  double dev = 0.0;
  std::vector<std::string> inconsistent;
  bool unexplained = false;
  for (int k = 0; k < 3; ++k) {
    dev = std::max(dev, std::abs(got[k] - oracle[k]));
    // displayed to five decimals
    if (std::abs(got[k] - shown[k]) > 5e-6 * (1 + 1e-9)) {
      const bool shown_matches_formula = std::abs(oracle[k] - shown[k]) <= 5e-6;
      unexplained = unexplained || shown_matches_formula;
      inconsistent.push_back(std::string(label[k]) + ": shown " + fmt("%.5f", shown[k]) +
                             ", closed form gives " + fmt("%.7f", oracle[k]));
    }
  }
  o.passed = o.passed && dev < 1e-6 && inconsistent.empty();
  o.detail = "max |residual| " + fmt("%.2e", worst) + ", T=1 (" + fmt("%.8f", got[0]) + ", " +
             fmt("%.8f", got[1]) + ", " + fmt("%.8f", got[2]) + "), max dev from closed form " +
             fmt("%.1e", dev);
  for (const auto& s : inconsistent) o.detail += "\n      " + s;
  if (!inconsistent.empty() && !unexplained && dev < 1e-6 && worst < 1e-9) {
    o.unattainable = "the displayed value is ln 2 - 0.32508 from rounded inputs; the exact value "
                     "rounds differently";
  }
  return o;
}

Outcome meta_identity() {
  const auto r = exact_meta_decomposition(make_two_coin_mixture(0.9, 0.9), 2, 2);
  const double spread = std::abs(r.intra_per_document[0] - r.intra_per_document[1]);
  Outcome o;
  o.passed = std::abs(r.residual) < 1e-9 && spread < 1e-10;
  o.detail = "residual " + fmt("%.2e", r.residual) + ", intra spread " + fmt("%.2e", spread) +
             ", terms (" + fmt("%.6f", r.irreducible) + ", " + fmt("%.6f", r.meta_estimation) +
             ", " + fmt("%.6f", r.intra_estimation) + ")";
  return o;
}

Outcome sandwich() {
  const auto a = check_rd_sandwich(make_two_coin(0.9), 2, SandwichMode::single, 1, 0);
  const auto b = check_rd_sandwich(make_two_coin_mixture(0.9, 0.9), 2, SandwichMode::meta, 2, 0);
  Outcome o;
  double worst = 0.0;
  o.passed = all_passed({a, b}, worst);
  const auto& th = a.details["theta"];
  const auto& ps = b.details["psi"];
  o.detail = "single " + fmt("%.6f", th["lower"].get<double>()) + " <= " +
             fmt("%.6f", th["info_per_step"].get<double>()) + " <= " +
             fmt("%.6f", th["upper"].get<double>()) + "; psi " + fmt("%.6f", ps["lower"].get<double>()) +
             " <= " + fmt("%.6f", ps["info_per_step"].get<double>()) + " <= " +
             fmt("%.6f", ps["upper"].get<double>()) + "; min margin " + fmt("%.2e", worst);
  return o;
}

Outcome from_reports(const std::vector<CheckReport>& rs, const std::string& extra = {}) {
  Outcome o;
  double worst = 0.0;
  o.passed = all_passed(rs, worst);
  std::size_t fails = 0;
  for (const auto& r : rs) fails += r.passed ? 0 : 1;
  o.detail = std::to_string(rs.size()) + " report(s), " + std::to_string(fails) +
             " failing, min margin " + fmt("%.3e", worst) + extra;
  return o;
}

Outcome softmax_kl() {
  const auto r = check_softmax_kl(100'000, 16, 10.0, 0);
  return from_reports({r}, ", violations " + r.details["violations"].dump());
}

Outcome logistic_pointwise() {
  const auto r = check_logistic_pointwise(-10.0, 10.0, 0.01);
  return from_reports({r}, ", grid points " + std::to_string(r.n_samples) + ", violations " +
                               r.details["violations"].dump());
}

Outcome lipschitz() {
  std::vector<CheckReport> rs;
  std::uint64_t k = 0;
  std::size_t skipped = 0;
  for (std::size_t d : {2, 4, 8})
    for (std::size_t r : {2, 4})
      for (std::size_t K : {1, 2, 4}) {
        ++k;
        if (r > d) {
          ++skipped;
          continue;
        }
        rs.push_back(check_layer_lipschitz(d, r, K, 10'000, splitmix64(k)));
      }
  return from_reports(rs, "; " + std::to_string(skipped) +
                              " of 18 grid points have r > d and are undefined (attention acts on "
                              "r <= d coordinates)");
}

Outcome perturbation() {
  std::vector<CheckReport> rs;
  std::uint64_t k = 0;
  for (auto [d, r, K] : {std::tuple<std::size_t, std::size_t, std::size_t>{2, 2, 1}, {4, 2, 2}})
    for (double eps : {0.01, 0.1})
      for (std::size_t L : {1, 2})
        rs.push_back(check_perturbation_distortion(d, r, K, L, eps, 10'000, splitmix64(++k)));
  return from_reports(rs);
}

Outcome logistic_bound_mc() {
  const auto r = check_logistic_bound(2, 20, 100'000, 200, 0);
  Outcome o = from_reports({r});
  o.detail += ", excess " + fmt("%.5f", r.details["excess_loss"].get<double>()) + " +- " +
              fmt("%.5f", r.std_error) + " vs bound " + fmt("%.6f", r.details["bound"].get<double>()) +
              ", mean ESS " + fmt("%.0f", r.details["mean_ess"].get<double>());
  return o;
}

Outcome icl_decay() { return from_reports({check_icl(default_icl_config())}); }

Outcome misspecified() {
  const auto r = check_misspecified(make_two_coin(0.9), Pmf({0.9, 0.1}), 1, 1);
  const double extra = r.details["extra_loss"].get<double>();
  const double bound = r.details["bound"].get<double>();
  // KL((.5,.5)||(.9,.1)) = 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1)
  const long double kl = 0.5L * lnl(0.5L / 0.9L) + 0.5L * lnl(0.5L / 0.1L);
  Outcome o;
  o.passed = r.passed && std::abs(extra - 0.26347) <= 1e-5 && extra <= bound &&
             std::abs(bound - double(kl)) < 1e-12 && std::abs(bound - 0.51083) <= 5e-6 &&
             r.details["residual"].get<double>() < 1e-9;
  o.detail = "extra loss " + fmt("%.8f", extra) + " <= " + fmt("%.8f", bound) + ", residual " +
             fmt("%.2e", r.details["residual"].get<double>());
  return o;
}

struct HandValue {
  std::string name;
  double computed;
  long double formula;  // the stated formula, recomputed here
  double shown;         // value as displayed
  int decimals;         // displayed precision
};

Outcome hand_values() {
  const auto mix = bounds::mixture_transformer_bound(2, 2, 1, 1, 10, 10, 2, 1.0);
  ChannelParams lp;
  lp.d = 10;
  ChannelParams tp;
  tp.r = 2;
  const long double R = 1, M = 10, T = 10, N = 2;
  const std::vector<HandValue> values = {
      {"logistic_bound(10,100)", bounds::logistic_bound(10, 100), 0.05L * (1 + lnl(3.5L)), 0.112638, 6},
      {"transformer_bound(2,2,1,1,100)", bounds::transformer_bound(2, 2, 1, 1, 100),
       8 * lnl(4) / 100 + 8 * lnl(20000) / 200, 0.50704, 5},
      {"linrep_bound(4,2,10,10)", bounds::linrep_bound(4, 2, 10, 10),
       8 * (1 + lnl(6)) / 200 + 2 * (1 + lnl(11)) / 20, 0.451460, 6},
      {"sparse_meta_bound(2,10,100)", bounds::sparse_meta_bound(2.0, 10, 100), 2 * lnl(6) * lnl(1000),
       24.7526, 4},
      {"mixture sparse term", mix.sparse, R * lnl(1 + M / R) * lnl(M * N) / (M * T), 0.07183, 5},
      {"mixture component term", mix.components, R * lnl(1 + M / R) * 8 * lnl(4 * M * T * T) / (M * T),
       1.59108, 5},
      {"mixture assignment term", mix.assignment, lnl(N) / T, 0.06931, 5},
      {"mixture total", mix.total,
       R * lnl(1 + M / R) * lnl(M * N) / (M * T) + R * lnl(1 + M / R) * 8 * lnl(4 * M * T * T) / (M * T) +
           lnl(N) / T,
       1.73223, 5},
      {"entropy_bound(ln2,ln3,4,5)", bounds::entropy_bound(std::log(2.0), std::log(3.0), 4, 5),
       lnl(2) / 20 + lnl(3) / 5, 0.254380, 6},
      {"misspecified_bound(KL,2,5)",
       bounds::misspecified_bound(0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 2, 5),
       (0.5L * lnl(0.5L / 0.9L) + 0.5L * lnl(5)) / 10, 0.051083, 6},
      {"logistic channel rate (d=10, eps=0.05)",
       gaussian_channel_rate(ChannelConstruction::logistic, lp, 0.05), 5 * lnl(3.5L), 6.26381, 5},
      {"linrep task channel rate (r=2, eps=0.25)",
       gaussian_channel_rate(ChannelConstruction::linrep_task, tp, 0.25), lnl(3), 1.09861, 5},
  };
  Outcome o{true, {}, {}};
  std::size_t formula_fail = 0;
  std::vector<std::string> inconsistent;
  for (const auto& v : values) {
    const double rel = std::abs(v.computed - double(v.formula)) / std::abs(double(v.formula));
    if (rel > 1e-6) ++formula_fail;
    const double half_ulp = 0.5 * std::pow(10.0, -v.decimals) * (1 + 1e-9);
    if (std::abs(v.computed - v.shown) > half_ulp) {
      const bool shown_matches_formula = std::abs(double(v.formula) - v.shown) <= half_ulp;
      inconsistent.push_back(v.name + ": shown " + fmt("%.6g", v.shown) + ", formula gives " +
                             fmt("%.7g", double(v.formula)) +
                             (shown_matches_formula ? "" : " (shown value disagrees with its own formula)"));
      if (shown_matches_formula) ++formula_fail;
    }
  }
  o.passed = formula_fail == 0 && inconsistent.empty();
  o.detail = std::to_string(values.size()) + " values, " + std::to_string(formula_fail) +
             " off their formula at 1e-6 rel";
  if (!inconsistent.empty()) {
    o.detail += "; " + std::to_string(inconsistent.size()) + " displayed value(s) not reproducible:";
    for (const auto& s : inconsistent) o.detail += "\n      " + s;
    if (formula_fail == 0) {
      o.unattainable = "every mismatch is a displayed value that its own stated formula does not give";
    }
  }
  return o;
}

Outcome determinism() {
  const std::string dir = ICL_CONFIG_DIR;
  const std::vector<std::string> sims = {"e2_exact",        "hierarchical_exact", "misspecified",
                                         "logistic_particle", "transformer_mc",   "linrep_mc",
                                         "pool_mixture_mc"};
  auto csv = [](const Table& t) {
    std::ostringstream out;
    write_csv(out, t);
    return out.str();
  };
  std::size_t same = 0, total = 0;
  std::string differing;
  auto compare = [&](const std::string& name, const std::function<Table(const ExperimentConfig&)>& run) {
    auto one = load_config(dir + "/" + name + ".json");
    auto many = one;
    one.threads = 1;
    many.threads = 8;
    ++total;
    if (csv(run(one)) == csv(run(many))) {
      ++same;
    } else {
      differing += " " + name;
    }
  };
  for (const auto& n : sims)
    compare(n, [](const ExperimentConfig& c) { return results_table(run_simulation(c)); });
  compare("icl_hierarchical", [](const ExperimentConfig& c) { return results_table(run_icl(c)); });
  for (const char* n : {"rd_e2", "rd_meta", "channel_transformer"})
    compare(n, [](const ExperimentConfig& c) { return run_rd_curve(c); });
  compare("bounds_grid", [](const ExperimentConfig& c) { return run_bounds(c.bounds); });
  Outcome o;
  o.passed = same == total;
  o.detail = std::to_string(same) + "/" + std::to_string(total) +
             " configs byte-identical at 1 and 8 threads" + (differing.empty() ? "" : ";" + differing);
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "single-task decomposition identity", 1, decomposition_identity},
      {2, "hierarchical four-term identity", 10, meta_identity},
      {3, "rate-distortion sandwich", 60, sandwich},
      {4, "softmax KL vs squared logit distance", 10, softmax_kl},
      {5, "logistic pointwise inequality", 30, logistic_pointwise},
      {6, "transformer layer Lipschitz constant", 60, lipschitz},
      {7, "parameter perturbation distortion", 120, perturbation},
      {8, "logistic regression bound, particle predictor", 120, logistic_bound_mc},
      {9, "in-context decay and bound", 60, icl_decay},
      {10, "misspecified prior", 1, misspecified},
      {11, "bound calculators vs hand values", 1, hand_values},
      {12, "determinism across thread counts", 0, determinism},
  };
  int unexplained = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = c.budget_seconds == 0 || secs <= c.budget_seconds;
    const bool passed = o.passed && in_budget;
    std::printf("%s criterion %2d: %s [%.2f s%s]\n    %s\n", passed ? "PASS" : "FAIL", c.id,
                c.title.c_str(), secs,
                in_budget ? "" : (", over " + fmt("%.0f", c.budget_seconds) + " s budget").c_str(),
                o.detail.c_str());
    if (!passed) {
      if (!o.unattainable.empty() && in_budget) {
        std::printf("    unattainable as stated: %s\n", o.unattainable.c_str());
      } else {
        ++unexplained;
      }
    }
    std::fflush(stdout);
  }
  return unexplained;
}
