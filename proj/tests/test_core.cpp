#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "icl/core.hpp"

using namespace icl;

TEST_CASE("pmf validation") {
  CHECK_NOTHROW(Pmf({0.25, 0.75}));
  CHECK_THROWS_AS(Pmf({}), InvalidArgument);
  CHECK_THROWS_AS(Pmf({0.5, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(Pmf({-0.1, 1.1}), InvalidArgument);
  CHECK_THROWS_AS(Pmf({std::nan(""), 1.0}), InvalidArgument);
  const Pmf n = Pmf::normalized({1.0, 3.0});
  CHECK(n[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(Pmf::uniform(4)[2] == 0.25);
  CHECK(Pmf::point(3, 1)[1] == 1.0);
  CHECK_THROWS_AS(Pmf::normalized({0.0, 0.0}), InvalidArgument);
}

TEST_CASE("logsumexp is shift-stable") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  const std::vector<double> ninf{-std::numeric_limits<double>::infinity(), 0.0};
  CHECK(logsumexp(ninf) == doctest::Approx(0.0));
}

TEST_CASE("softmax of log-weights") {
  const std::vector<double> logits{std::log(1.0), std::log(2.0), std::log(3.0)};
  const Pmf p = softmax(logits);
  CHECK(std::abs(p[0] - 1.0 / 6) < 1e-15);
  CHECK(std::abs(p[1] - 2.0 / 6) < 1e-15);
  CHECK(std::abs(p[2] - 3.0 / 6) < 1e-15);

  const std::vector<double> shifted{1e4 + 1.0, 1e4 + 2.0};
  const std::vector<double> plain{1.0, 2.0};
  CHECK(softmax(shifted)[0] == doctest::Approx(softmax(plain)[0]).epsilon(1e-14));

  CHECK_THROWS_AS(softmax(std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(softmax(std::vector<double>{0.0, std::numeric_limits<double>::infinity()}),
                  InvalidArgument);
}

TEST_CASE("kl divergence and entropy") {
  // 0.5 ln(0.5/0.75) + 0.5 ln(0.5/0.25)
  const double oracle = 0.143841036225890464;
  CHECK(kl_divergence(Pmf({0.5, 0.5}), Pmf({0.75, 0.25})) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(kl_divergence(Pmf({0.3, 0.7}), Pmf({0.3, 0.7})) == 0.0);
  CHECK(kl_divergence(Pmf({0.0, 1.0}), Pmf({0.5, 0.5})) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(kl_divergence(Pmf({0.5, 0.5}), Pmf({1.0, 0.0})), DivergenceInfinite);
  CHECK_THROWS_AS(kl_divergence(Pmf({0.5, 0.5}), Pmf::uniform(3)), InvalidArgument);

  const std::vector<double> coin{0.9, 0.1};
  CHECK(entropy(coin) == doctest::Approx(0.325082973391448255).epsilon(1e-14));
  const std::vector<double> with_zero{0.0, 1.0};
  CHECK(entropy(with_zero) == 0.0);
}

TEST_CASE("clip_columns") {
  Eigen::MatrixXd m(2, 3);
  m << 3.0, 0.1, 0.0,
       4.0, 0.2, 1.0;
  const Eigen::MatrixXd c = clip_columns(m);
  CHECK(c.col(0).norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(clip_columns(Eigen::MatrixXd::Constant(1, 1, 1.0 + 1e-15))(0, 0) == 1.0 + 1e-15);
  CHECK(c(0, 0) == doctest::Approx(0.6));
  CHECK(c.col(1) == m.col(1));
  CHECK(c.col(2) == m.col(2));
  CHECK(clip_columns(c) == c);
}

TEST_CASE("splitmix64 reference values") {
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 3), b(42, 3), c(42, 4);
  std::vector<double> xa, xb, xc;
  for (int i = 0; i < 8; ++i) {
    xa.push_back(a.normal());
    xb.push_back(b.normal());
    xc.push_back(c.normal());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);

  RngStream p(7, 0);
  RngStream d1 = p.derive(1), d2 = p.derive(1), d3 = p.derive(2);
  const double u1 = d1.uniform();
  CHECK(u1 == d2.uniform());
  CHECK(u1 != d3.uniform());
}

TEST_CASE("categorical respects zero mass") {
  RngStream rng(1, 0);
  const Pmf p({0.0, 1.0, 0.0});
  for (int i = 0; i < 100; ++i) CHECK(rng.categorical(p) == 1);
}

TEST_CASE("log gamma variate stays finite for tiny shapes") {
  RngStream rng(5, 0);
  for (int i = 0; i < 1000; ++i) CHECK(std::isfinite(rng.log_gamma_variate(1e-3)));
}

TEST_CASE("summarize") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const McEstimate e = summarize(v);
  CHECK(e.mean == 2.5);
  // sample sd sqrt(5/3), divided by sqrt(4)
  CHECK(e.std_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-14));
  CHECK(e.n_trials == 4);
}

TEST_CASE("parallel_for is deterministic and rethrows the lowest index") {
  std::vector<double> one(1000), many(1000);
  auto fill = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      RngStream rng(9, i);
      out[i] = rng.normal();
    };
  };
  parallel_for(one.size(), 1, fill(one));
  parallel_for(many.size(), 8, fill(many));
  CHECK(one == many);

  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 17 || i == 60) throw std::runtime_error(std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "17");
  }
}

TEST_CASE("corpus validation and csv export") {
  Corpus c;
  c.vocab = 2;
  c.documents.push_back({{0, 1}, {}});
  c.documents.push_back({{1, 1}, {}});
  CHECK_NOTHROW(c.validate());
  CHECK(c.length() == 2);

  std::ostringstream out;
  write_corpus_csv(out, std::span<const Corpus>(&c, 1));
  const std::string csv = out.str();
  CHECK(csv.rfind("trial,document,step,token\n", 0) == 0);
  CHECK(csv.find("0,1,1,1\n") != std::string::npos);
  CHECK(csv.find("0,2,2,2\n") != std::string::npos);

  c.documents.push_back({{0}, {}});
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.documents.back() = {{0, 2}, {}};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}
