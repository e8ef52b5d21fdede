#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "icl/experiment.hpp"

using namespace icl;
using nlohmann::json;

namespace {

std::string csv(const Table& t) {
  std::ostringstream out;
  write_csv(out, t);
  return out.str();
}

std::string error_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("config errors name the field") {
  CHECK(error_of(json{{"grid", {{"T", {2}}, {"tau", {3}}}}}).find("grid.tau") == 0);
  CHECK(error_of(json{{"grid", {{"T", json::array()}}}}).find("grid.T") == 0);
  CHECK(error_of(json{{"environment", {{"type", "unicorn"}}}}).find("environment.type") == 0);
  CHECK(error_of(json{{"predictor", "oracle"}}).find("predictor.kind") == 0);
  CHECK(error_of(json{{"predictor", {{"kind", "misspecified"}}}}).find("predictor.alternative_prior") == 0);
  CHECK(error_of(json{{"method", "guess"}}).find("method") == 0);
  CHECK(error_of(json{{"seed", -1}}).find("seed") == 0);
  CHECK(error_of(json{{"environment", {{"type", "transformer"}, {"d", 2}, {"r", 4}}}}).find("environment") == 0);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("environment shorthands") {
  const auto c = parse_config(json{{"environment", {{"type", "two_coin_mixture"}}}, {"predictor", "omniscient"}});
  CHECK(std::holds_alternative<MixtureSpec>(c.environment));
  CHECK(c.predictor.kind == PredictorKind::omniscient);
  const auto p = parse_config(json{{"environment", {{"type", "mixture"},
                                                    {"N", 3},
                                                    {"R", 2.0},
                                                    {"components", {{"type", "transformer_pool"}, {"d", 2}, {"r", 2}}},
                                                    {"psi_prior", {{"type", "dirichlet"}}}}}});
  CHECK(std::get<MixtureSpec>(p.environment).known_components());
}

TEST_CASE("minimal two-coin simulation") {
  const auto c = parse_config(json{{"environment", {{"type", "two_coin"}}}, {"method", "exact"}});
  const auto rows = run_simulation(c);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].residual < 1e-9);
  CHECK(rows[0].loss_mean == doctest::Approx(0.693147180559945309).epsilon(1e-13));
  CHECK(rows[0].irr == doctest::Approx(0.325082973391448255).epsilon(1e-13));

  const std::string text = csv(results_table(rows));
  CHECK(text.rfind("env,predictor,M,T,tau,loss_mean,loss_stderr,irr,meta_est,intra_est,bound_value,"
                   "margin,ess,seed,residual\n",
                   0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}

TEST_CASE("misspecified residual is the extra loss") {
  const auto c = parse_config(json{{"environment", {{"type", "two_coin"}}},
                                   {"predictor", {{"kind", "misspecified"}, {"alternative_prior", {0.9, 0.1}}}},
                                   {"method", "exact"}});
  const auto rows = run_simulation(c);
  CHECK(rows[0].residual == doctest::Approx(0.263477502847937156).epsilon(1e-12));
}

TEST_CASE("csv formatting") {
  Table t;
  t.columns = {"a", "b", "c"};
  t.rows.push_back({json("x"), json(0.1), json(std::nan(""))});
  CHECK(csv(t) == "a,b,c\nx,0.10000000000000001,nan\n");
  const json j = table_json(t);
  CHECK(j.is_array());
}

TEST_CASE("results do not depend on the worker count") {
  json j = {{"environment", {{"type", "logistic"}, {"d", 2}}},
            {"predictor", {{"kind", "particle"}, {"particles", 500}}},
            {"grid", {{"T", {4}}, {"n_trials", {40}}}},
            {"method", "monte_carlo"},
            {"seed", 5}};
  auto one = parse_config(j);
  auto many = parse_config(j);
  many.threads = 8;
  CHECK(csv(results_table(run_simulation(one))) == csv(results_table(run_simulation(many))));
}

TEST_CASE("icl rows respect their bound") {
  const auto c = parse_config(json{{"environment", {{"type", "two_coin_mixture"}}},
                                   {"grid", {{"M", {2}}, {"T", {2}}, {"tau", {1, 2}}}}});
  for (const auto& r : run_icl(c)) CHECK(r.margin >= -1e-9);
}

TEST_CASE("bounds table") {
  const Table t = run_bounds(json::object());
  CHECK(!t.rows.empty());
  CHECK(t.columns.front() == "bound");
}

TEST_CASE("manifest") {
  const auto c = parse_config(json{{"name", "m"}, {"seed", 3}});
  const json m = manifest(c, "simulate");
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  CHECK(m["command"] == "simulate");
  CHECK(m.contains("version"));
}
