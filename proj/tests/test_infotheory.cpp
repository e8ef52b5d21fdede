#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "icl/infotheory.hpp"

using namespace icl;

namespace {

// Reference values evaluated in 30-digit arithmetic from the closed forms.
constexpr double kLn2 = 0.693147180559945309;
constexpr double kH09 = 0.325082973391448255;  // -(0.9 ln 0.9 + 0.1 ln 0.1)
constexpr double kE2T2Loss = 0.582270333685019740;
constexpr double kE2T2Intra = 0.257187360293571500;

}  // namespace

TEST_CASE("two-coin decomposition, T = 1") {
  const auto r = exact_decomposition(make_two_coin(0.9), 1);
  CHECK(r.total_loss == doctest::Approx(kLn2).epsilon(1e-13));
  CHECK(r.irreducible == doctest::Approx(kH09).epsilon(1e-13));
  CHECK(r.intra_estimation == doctest::Approx(kLn2 - kH09).epsilon(1e-13));
  CHECK(std::abs(r.residual) < 1e-12);
}

TEST_CASE("two-coin decomposition, T = 2") {
  const auto r = exact_decomposition(make_two_coin(0.9), 2);
  CHECK(r.total_loss == doctest::Approx(kE2T2Loss).epsilon(1e-13));
  CHECK(r.intra_estimation == doctest::Approx(kE2T2Intra).epsilon(1e-13));
  CHECK(r.irreducible == doctest::Approx(kH09).epsilon(1e-13));
}

TEST_CASE("point-mass prior has no estimation error") {
  const auto r = exact_decomposition(make_iid_tabular({Pmf({0.3, 0.7}), Pmf({0.6, 0.4})},
                                                      Pmf({1.0, 0.0})),
                                     3);
  CHECK(std::abs(r.intra_estimation) < 1e-14);
}

TEST_CASE("hierarchical decomposition") {
  const auto r = exact_meta_decomposition(make_two_coin_mixture(0.9, 0.9), 2, 2);
  CHECK(r.total_loss == doctest::Approx(0.548791407383089867).epsilon(1e-12));
  CHECK(r.irreducible == doctest::Approx(0.325082973391448240).epsilon(1e-12));
  CHECK(r.meta_estimation == doctest::Approx(0.108849328348596562).epsilon(1e-12));
  CHECK(std::abs(r.residual) < 1e-12);
  REQUIRE(r.intra_per_document.size() == 2);
  CHECK(r.intra_per_document[0] == doctest::Approx(0.114859105643045066).epsilon(1e-12));
  CHECK(std::abs(r.intra_per_document[0] - r.intra_per_document[1]) < 1e-10);
}

TEST_CASE("exact loss of simple predictors") {
  const Environment env = make_two_coin(0.9);
  const JointTable t = enumerate_joint(env, 1, 2);
  PredictorSpec s;
  s.kind = PredictorKind::uniform;
  CHECK(exact_loss(s, env, t) == doctest::Approx(kLn2).epsilon(1e-14));
  s.kind = PredictorKind::omniscient;
  CHECK(exact_loss(s, env, t) == doctest::Approx(kH09).epsilon(1e-13));
  s.kind = PredictorKind::bayes;
  CHECK(exact_loss(s, env, t) == doctest::Approx(kE2T2Loss).epsilon(1e-13));
  s.kind = PredictorKind::misspecified;
  s.alternative_prior = Pmf({0.9, 0.1});
  const JointTable t1 = enumerate_joint(env, 1, 1);
  CHECK(exact_loss(s, env, t1) - kLn2 == doctest::Approx(0.263477502847937156).epsilon(1e-12));
}

TEST_CASE("conditional entropy and information keys") {
  const JointTable t = enumerate_joint(make_two_coin(0.9), 1, 1);
  const TableKey seq = [](std::size_t, std::size_t s) -> std::uint64_t { return s; };
  const TableKey lat = [](std::size_t l, std::size_t) -> std::uint64_t { return l; };
  const TableKey none = [](std::size_t, std::size_t) -> std::uint64_t { return 0; };
  CHECK(conditional_entropy(t, seq, none) == doctest::Approx(kLn2).epsilon(1e-14));
  CHECK(conditional_entropy(t, seq, lat) == doctest::Approx(kH09).epsilon(1e-13));
  CHECK(conditional_mutual_information(t, seq, lat, none) ==
        doctest::Approx(kLn2 - kH09).epsilon(1e-13));
  CHECK(std::abs(conditional_mutual_information(t, seq, seq, seq)) < 1e-15);
}

TEST_CASE("in-context information of an iid mixture") {
  std::vector<Pmf> rows;
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> p(4, 0.1);
    p[i] = 0.7;
    rows.emplace_back(p);
  }
  // ln 4 - H(0.7, 0.1, 0.1, 0.1)
  CHECK(iid_mixture_information(rows, Pmf::uniform(4), 1) ==
        doctest::Approx(0.445846372464564248).epsilon(1e-13));
  for (std::size_t tau : {1, 4, 16})
    CHECK(iid_mixture_information(rows, Pmf::uniform(4), tau) <= std::log(4.0) + 1e-12);

  CHECK(iid_mixture_information({rows[0]}, Pmf::uniform(1), 5) == doctest::Approx(0.0));
  CHECK(std::abs(iid_mixture_information({rows[0], rows[0]}, Pmf::uniform(2), 5)) < 1e-12);
}

TEST_CASE("icl terms on the hierarchical environment") {
  const Environment env = make_two_coin_mixture(0.9, 0.9);
  for (std::size_t tau = 1; tau <= 2; ++tau) {
    const IclTerms t = exact_icl_terms(env, 2, 2, tau);
    CHECK(t.loss <= t.bound + 1e-12);
    CHECK(t.remark_form <= t.bound + 1e-12);
    CHECK(t.in_context <= std::log(2.0) / static_cast<double>(tau) + 1e-12);
  }
  CHECK_THROWS(exact_icl_terms(env, 2, 2, 3));
}

TEST_CASE("information bottleneck anchors on the two-coin environment") {
  const JointTable t = enumerate_joint(make_two_coin(0.9), 1, 2);
  const TableKey lat = [](std::size_t l, std::size_t) -> std::uint64_t { return l; };
  const Eigen::MatrixXd joint = latent_observation_joint(t, lat, 2);
  CHECK(joint.sum() == doctest::Approx(1.0).epsilon(1e-14));
  const auto curve = ib_curve(joint, default_beta_grid(40), 2.0);
  REQUIRE(!curve.empty());
  // full identification: rate H(θ) = ln 2 at zero distortion
  CHECK(rd_rate_at(curve, 1e-12) == doctest::Approx(kLn2).epsilon(1e-9));
  // constant encoder: rate 0 at distortion I/T
  CHECK(rd_rate_at(curve, kE2T2Intra + 1e-12) == doctest::Approx(0.0));
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].epsilon > curve[i - 1].epsilon);
    CHECK(curve[i].rate < curve[i - 1].rate);
  }
  for (const auto& p : curve) {
    CHECK(p.rate <= kLn2 + 1e-9);
    CHECK(p.relevant_info <= p.rate + 1e-9);  // data processing
  }
  CHECK(std::isinf(rd_rate_at(curve, -1.0)));

  const Sandwich s = rd_sandwich(curve, kE2T2Intra, 2.0);
  CHECK(s.grid.size() == 50);
  CHECK(s.lower <= kE2T2Intra + 1e-6);
  CHECK(kE2T2Intra <= s.upper + 1e-6);
}

TEST_CASE("gaussian channel rates") {
  ChannelParams p;
  p.d = 10;
  CHECK(gaussian_channel_rate(ChannelConstruction::logistic, p, 0.05) ==
        doctest::Approx(6.26381484247683998).epsilon(1e-13));
  p.r = 2;
  CHECK(gaussian_channel_rate(ChannelConstruction::linrep_task, p, 0.25) ==
        doctest::Approx(1.09861228866810969).epsilon(1e-13));
  CHECK_THROWS_AS(gaussian_channel_rate(ChannelConstruction::logistic, p, 0.0), InvalidArgument);
  CHECK_THROWS_AS(gaussian_channel_distortion_bound(ChannelConstruction::linrep_meta, p, 0.1),
                  UnsupportedMode);
  CHECK(parse_channel("transformer_layer") == ChannelConstruction::transformer_layer);
}

TEST_CASE("zero noise gives zero distortion") {
  TrialOptions o;
  o.n_trials = 50;
  ChannelParams p;
  for (auto c : {ChannelConstruction::logistic, ChannelConstruction::linrep_task,
                 ChannelConstruction::transformer_layer}) {
    const McEstimate e = gaussian_channel_distortion_mc(c, p, 0.0, o);
    CHECK(e.mean == 0.0);
  }
  CHECK_THROWS_AS(gaussian_channel_distortion_mc(ChannelConstruction::linrep_meta, p, 0.1, o),
                  UnsupportedMode);
}

TEST_CASE("logistic channel meets its distortion bound") {
  TrialOptions o;
  o.n_trials = 20'000;
  o.seed = 3;
  ChannelParams p;
  p.d = 5;
  const McEstimate e = gaussian_channel_distortion_mc(ChannelConstruction::logistic, p, 0.1, o);
  CHECK(e.mean <= 0.1 + 3 * e.std_error);
}

TEST_CASE("single transformer layer meets its distortion bound") {
  TrialOptions o;
  o.n_trials = 10'000;
  o.seed = 4;
  ChannelParams p;  // d = r = 2, K = L = 1
  const double eps = 0.1;
  const McEstimate e =
      gaussian_channel_distortion_mc(ChannelConstruction::transformer_layer, p, eps, o);
  CHECK(e.mean <= eps * 1 * 2 * 4 + 3 * e.std_error);
}

TEST_CASE("Monte Carlo losses agree with enumeration") {
  const Environment env = make_two_coin(0.9);
  TrialOptions o;
  o.n_trials = 4000;
  o.seed = 17;
  PredictorSpec s;
  s.kind = PredictorKind::omniscient;
  const McEstimate omni = estimate_log_loss(s, env, 1, 1, o);
  CHECK(std::abs(omni.mean - kH09) <= 3 * omni.std_error);
  s.kind = PredictorKind::bayes;
  const McEstimate bayes = estimate_log_loss(s, env, 1, 1, o);
  CHECK(std::abs(bayes.mean - kLn2) <= 4 * bayes.std_error + 1e-12);
}

TEST_CASE("Monte Carlo meta terms agree with enumeration") {
  const Environment env = make_two_coin_mixture(0.9, 0.9);
  const auto exact = exact_meta_decomposition(env, 2, 2);
  TrialOptions o;
  o.n_trials = 20'000;
  o.seed = 23;
  const auto mc = mc_meta_terms(env, 2, 2, o);
  CHECK(std::abs(mc.total_loss - exact.total_loss) <= 4 * mc.total_stderr);
  CHECK(std::abs(mc.irreducible - exact.irreducible) <= 4 * mc.irreducible_stderr);
  CHECK(std::abs(mc.meta_estimation - exact.meta_estimation) <= 4 * mc.meta_stderr);
  CHECK(std::abs(mc.intra_estimation - exact.intra_estimation) <= 4 * mc.intra_stderr);
}

TEST_CASE("paired trials share parameters and corpora") {
  const Environment env = make_two_coin(0.9);
  TrialOptions o;
  o.n_trials = 200;
  PredictorSpec a, b;
  a.kind = PredictorKind::omniscient;
  b.kind = PredictorKind::omniscient;
  const auto la = trial_losses(a, env, 1, 3, o);
  const auto lb = trial_losses(b, env, 1, 3, o);
  const McEstimate diff = paired_difference(la.loss, lb.loss);
  CHECK(diff.mean == 0.0);
  CHECK(diff.std_error == 0.0);
}

TEST_CASE("psi-informed predictor is unsupported for linear representation") {
  TrialOptions o;
  o.n_trials = 2;
  CHECK_THROWS_AS(mc_meta_terms(LinRepSpec{4, 2}, 2, 2, o), UnsupportedMode);
}
