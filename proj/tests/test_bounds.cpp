#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "icl/bounds.hpp"
#include "icl/errors.hpp"

using namespace icl;
using namespace icl::bounds;

// Reference values evaluated in 30-digit arithmetic from the closed forms.

TEST_CASE("logistic") {
  CHECK(logistic_bound(10, 100) == doctest::Approx(0.112638148424768400).epsilon(1e-13));
  CHECK(logistic_bound(2, 20) == doctest::Approx(0.05 * (1 + std::log(1 + 20.0 / 8))).epsilon(1e-15));
}

TEST_CASE("transformer") {
  CHECK(transformer_bound(2, 2, 1, 1, 100) == doctest::Approx(0.507043050991036371).epsilon(1e-13));
  // 2KT²/L = 2 * 1 * 1 / 4 <= 1
  CHECK_THROWS_AS(transformer_bound(2, 2, 1, 4, 1), InvalidRegime);
}

TEST_CASE("linear representation") {
  CHECK(linrep_bound(4, 2, 10, 10) == doctest::Approx(0.451459906048959254).epsilon(1e-13));
  // meta term vanishes as M grows
  CHECK(linrep_bound(4, 2, 1'000'000, 10) < linrep_bound(4, 2, 10, 10));
}

TEST_CASE("sparse meta") {
  CHECK(sparse_meta_bound(2.0, 10, 100) == doctest::Approx(24.7540718644526577).epsilon(1e-13));
}

TEST_CASE("mixture of transformers") {
  const MixtureTerms t = mixture_transformer_bound(2, 2, 1, 1, 10, 10, 2, 1.0);
  CHECK(t.sparse == doctest::Approx(0.0718345225732463).epsilon(1e-12));
  CHECK(t.components == doctest::Approx(1.59106099394845429).epsilon(1e-12));
  CHECK(t.assignment == doctest::Approx(0.0693147180559945).epsilon(1e-12));
  CHECK(t.total == doctest::Approx(1.73221023457769513).epsilon(1e-12));
  CHECK(t.total == doctest::Approx(t.sparse + t.components + t.assignment).epsilon(1e-15));
  CHECK_THROWS_AS(mixture_transformer_bound(2, 4, 1, 1, 10, 10, 2, 1.0), InvalidRegime);
}

TEST_CASE("entropy and misspecified") {
  CHECK(entropy_bound(std::log(2.0), std::log(3.0), 4, 5) ==
        doctest::Approx(0.254379816761619204).epsilon(1e-13));
  CHECK(misspecified_bound(0.510825623765990683, 2, 5) ==
        doctest::Approx(0.0510825623765990683).epsilon(1e-13));
}

TEST_CASE("icl bound forms") {
  const IclBound b = icl_bound(0.3, 0.4, 0.5, 2, 4);
  CHECK(b.full == doctest::Approx(0.3 + 0.4 / 8 + 0.5 / 4));
  CHECK(b.remark == doctest::Approx(0.3 + 0.5 / 4));
}

TEST_CASE("bounds decrease in T") {
  for (std::size_t T = 10; T < 1000; T *= 2) {
    CHECK(logistic_bound(3, 2 * T) < logistic_bound(3, T));
    CHECK(transformer_bound(2, 2, 2, 1, 2 * T) < transformer_bound(2, 2, 2, 1, T));
  }
}
