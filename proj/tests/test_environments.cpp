#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "icl/environments.hpp"

using namespace icl;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("two-coin state A emits token 0 with frequency 0.9") {
  const auto spec = std::make_shared<const TabularSpec>(make_two_coin(0.9));
  const LawPtr law = tabular_law(spec, 0);
  ParameterDraw params;
  params.laws.push_back(law);
  params.assignment.push_back(0);
  const Environment env = *spec;
  RngStream rng(3, 0);
  const std::size_t n = 10'000;
  const Document doc = sample_document(env, params, 0, n, rng);
  const double zeros = static_cast<double>(std::count(doc.tokens.begin(), doc.tokens.end(), 0));
  const double freq = zeros / n;
  const double se = std::sqrt(0.9 * 0.1 / n);
  CHECK(std::abs(freq - 0.9) <= 3 * se);
}

TEST_CASE("two-coin marginal at T=1") {
  const Environment env = make_two_coin(0.9);
  const JointTable t = enumerate_joint(env, 1, 1);
  const auto marg = t.sequence_marginal();
  REQUIRE(marg.size() == 2);
  CHECK(marg[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sum(t.prob) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("enumeration sums to one and matches document probabilities") {
  const Environment env = make_two_coin(0.8);
  const JointTable t = enumerate_joint(env, 2, 3);
  CHECK(t.num_sequences == 64);
  CHECK(sum(t.prob) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(sum(t.latent_marginal()) == doctest::Approx(1.0).epsilon(1e-13));

  const auto spec = std::make_shared<const TabularSpec>(make_two_coin(0.8));
  const auto docs = document_probabilities(*tabular_law(spec, 0), 3);
  CHECK(sum(docs) == doctest::Approx(1.0).epsilon(1e-14));
  // all-zero document under state A
  CHECK(docs[0] == doctest::Approx(0.8 * 0.8 * 0.8).epsilon(1e-14));
}

TEST_CASE("hierarchical mixture enumeration") {
  const Environment env = make_two_coin_mixture(0.9, 0.9);
  const JointTable t = enumerate_joint(env, 2, 2);
  CHECK(t.num_psi == 2);
  CHECK(sum(t.prob) == doctest::Approx(1.0).epsilon(1e-13));
  const Corpus c = t.decode(5);
  CHECK(c.num_documents() == 2);
  CHECK(c.length() == 2);
}

TEST_CASE("enumeration cap") {
  const Environment env = make_two_coin(0.9);
  CHECK_THROWS_AS(enumerate_joint(env, 4, 4, 1000), CapacityError);
}

TEST_CASE("transformer weights") {
  TransformerConfig cfg{4, 2, 3, 2};
  RngStream rng(11, 0);
  const TransformerWeights w = sample_transformer_weights(cfg, rng);
  CHECK(w.attention.size() == 2);
  CHECK(w.attention[0].rows() == 2);
  CHECK(w.value[0].rows() == 4);
  for (Eigen::Index j = 0; j < w.embeddings.cols(); ++j)
    CHECK(w.embeddings.col(j).norm() == doctest::Approx(1.0).epsilon(1e-14));

  const std::vector<Token> window{0, 3};
  const Pmf p = transformer_forward(w, window);
  CHECK(p.size() == 4);

  const auto trace = transformer_trace(w, window);
  CHECK(trace.size() == 3);
  // padding repeats the first token of the window
  CHECK(trace[0].col(0) == trace[0].col(1));
  for (const auto& u : trace)
    for (Eigen::Index j = 0; j < u.cols(); ++j) CHECK(u.col(j).norm() <= 1.0 + 1e-12);
}

TEST_CASE("attention columns are distributions") {
  RngStream rng(2, 0);
  const Eigen::MatrixXd u = Eigen::MatrixXd::Random(3, 5);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(3, 3);
  const Eigen::MatrixXd attn = attention_matrix(u, a, 3);
  for (Eigen::Index j = 0; j < attn.cols(); ++j) {
    CHECK(attn.col(j).sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(attn.col(j).minCoeff() >= 0.0);
  }
}

TEST_CASE("invalid transformer configs") {
  CHECK_THROWS_AS((TransformerConfig{2, 4, 1, 1}.validate()), InvalidArgument);
  CHECK_THROWS_AS((TransformerConfig{2, 0, 1, 1}.validate()), InvalidArgument);
  CHECK_THROWS_AS((TransformerConfig{2, 2, 0, 1}.validate()), InvalidArgument);
}

TEST_CASE("orthonormal basis and unit ball") {
  RngStream rng(4, 0);
  const Eigen::MatrixXd q = sample_orthonormal(6, 3, rng);
  CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 200; ++i) CHECK(sample_unit_ball(3, rng).norm() <= 1.0);
}

TEST_CASE("sampling is reproducible") {
  const Environment env = LinRepSpec{4, 2};
  RngStream a(8, 1), b(8, 1);
  const ParameterDraw pa = sample_parameters(env, 3, a);
  const ParameterDraw pb = sample_parameters(env, 3, b);
  REQUIRE(pa.basis.has_value());
  CHECK(*pa.basis == *pb.basis);
  const Corpus ca = sample_corpus(env, pa, 5, a);
  const Corpus cb = sample_corpus(env, pb, 5, b);
  for (std::size_t m = 0; m < 3; ++m) CHECK(ca.documents[m].tokens == cb.documents[m].tokens);
}

TEST_CASE("logistic documents carry inputs") {
  const Environment env = LogisticSpec{3};
  RngStream rng(6, 0);
  const ParameterDraw p = sample_parameters(env, 1, rng);
  const Document d = sample_document(env, p, 0, 4, rng);
  CHECK(d.has_inputs());
  CHECK(d.inputs.size() == 4);
  CHECK(input_dim(env) == 3);
}

TEST_CASE("windowed tabular rows pad with the first token") {
  TabularSpec spec;
  spec.vocab = 2;
  spec.window = 2;
  // context index = 2 * older + newer
  spec.states.push_back({"s", {Pmf({1, 0}), Pmf({0, 1}), Pmf({0.5, 0.5}), Pmf({0.25, 0.75})}, {}});
  spec.prior = Pmf::uniform(1);
  CHECK_NOTHROW(spec.validate());
  Document doc{{1, 0}, {}};
  // after one token (1), the context is (1, 1)
  CHECK(spec.row(0, doc, 1) == Pmf({0.25, 0.75}));
  CHECK(spec.row(0, doc, 2) == Pmf({0.5, 0.5}));
}
