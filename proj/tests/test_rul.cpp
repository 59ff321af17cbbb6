#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "srla/error.hpp"
#include "srla/rul.hpp"
#include "srla/synthetic.hpp"

using namespace srla;

namespace {

// Geometric-survival model: leave state 0 with probability `advance`.
IohmmParams geometric_model(double advance) {
  IohmmParams p = fixture::two_state();
  p.pi = Eigen::Vector2d(1.0, 0.0);
  p.trans[0] << 1.0 - advance, advance, 0.0, 1.0;
  p.emis[0][0].mean(0) = 0.0;
  p.emis[1][0].mean(0) = 10.0;
  p.emis[0][0].var(0) = 0.04;
  p.emis[1][0].var(0) = 0.04;
  return p;
}

Eigen::MatrixXd healthy_prefix(int T) { return Eigen::MatrixXd::Zero(T, 1); }

}  // namespace

TEST_CASE("a prefix already decoded into a failure state has zero remaining life") {
  IohmmParams p = geometric_model(0.1);
  Eigen::MatrixXd obs(3, 1);
  obs << 0.0, 0.0, 10.0;  // last observation pins state 1
  RulConfig config;
  config.seed = 7;
  RulEstimate est = estimate_rul(p, {0, 0, 0}, obs, {1}, config);
  CHECK(est.mean_rul == 0.0);
  CHECK(est.std_rul == 0.0);
  CHECK(est.cycle == 3);
}

TEST_CASE("geometric survival matches both the closed form and the hitting-time oracle") {
  const double advance = 0.1;
  IohmmParams p = geometric_model(advance);
  RulConfig config;
  config.n_rollouts = 10000;
  config.horizon_cap = 5000;
  config.seed = 3;
  RulEstimate est = estimate_rul(p, {0}, healthy_prefix(1), {1}, config);

  const double expected = 1.0 / advance;
  Eigen::VectorXd hit = oracle::expected_hitting_steps(p.trans[0], {1});
  CHECK(hit(0) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(hit(1) == 0.0);

  CHECK(est.n_rollouts == 10000);
  CHECK(est.truncated_fraction == 0.0);
  CHECK(std::abs(est.mean_rul - expected) / expected < 0.1);
  // Geometric std is sqrt(1-p)/p; the sample mean must sit within 3 standard errors.
  const double se = std::sqrt(1.0 - advance) / advance / std::sqrt(10000.0);
  CHECK(std::abs(est.mean_rul - hit(0)) < 3.0 * se);
  CHECK(est.std_rul == doctest::Approx(std::sqrt(1.0 - advance) / advance).epsilon(0.1));
}

TEST_CASE("multi-state chain agrees with the fundamental-matrix oracle") {
  SyntheticConfig config = fixture::chain_config(4, 1, 1);
  IohmmParams p = fixture::params_from(config);

  Eigen::VectorXd hit = oracle::expected_hitting_steps(p.trans[0], {3});
  RulConfig rc;
  rc.n_rollouts = 20000;
  rc.horizon_cap = 2000;
  rc.seed = 11;

  Eigen::MatrixXd obs(1, 3);
  obs << config.emission_mean.row(0);
  RulEstimate est = estimate_rul(p, {0}, obs, {3}, rc);

  const double se_bound = hit(0) / std::sqrt(static_cast<double>(rc.n_rollouts));
  CHECK(std::abs(est.mean_rul - hit(0)) < 3.0 * se_bound);
}

TEST_CASE("same seed, same estimate; different seed, different draw") {
  IohmmParams p = geometric_model(0.2);
  RulConfig a;
  a.seed = 5;
  RulConfig b;
  b.seed = 5;
  RulConfig c;
  c.seed = 6;
  RulEstimate ra = estimate_rul(p, {0}, healthy_prefix(1), {1}, a);
  RulEstimate rb = estimate_rul(p, {0}, healthy_prefix(1), {1}, b);
  RulEstimate rc = estimate_rul(p, {0}, healthy_prefix(1), {1}, c);
  CHECK(ra.mean_rul == rb.mean_rul);
  CHECK(ra.std_rul == rb.std_rul);
  CHECK(ra.mean_rul != rc.mean_rul);
}

TEST_CASE("degenerate arguments raise") {
  IohmmParams p = geometric_model(0.1);
  RulConfig config;
  CHECK_THROWS_AS(estimate_rul(p, {0}, healthy_prefix(1), {}, config), Error);

  RulConfig zero_rollouts;
  zero_rollouts.n_rollouts = 0;
  CHECK_THROWS_AS(estimate_rul(p, {0}, healthy_prefix(1), {1}, zero_rollouts), Error);

  CHECK_THROWS_AS(estimate_rul(p, {}, Eigen::MatrixXd(0, 1), {1}, config), Error);
  CHECK_THROWS_AS(estimate_rul(p, {0, 0}, healthy_prefix(1), {1}, config), Error);
}

TEST_CASE("hard horizon cap reports the truncated share") {
  IohmmParams p = geometric_model(0.01);
  RulConfig config;
  config.n_rollouts = 500;
  config.horizon_cap = 5;  // nearly every rollout outlives this
  config.seed = 2;
  RulEstimate est = estimate_rul(p, {0}, healthy_prefix(1), {1}, config);
  CHECK(est.truncated_fraction > 0.5);
  CHECK(est.mean_rul <= 5.0);
}

TEST_CASE("trend over a degrading unit falls with age") {
  // Brisk chain: units advance most cycles, so the remaining-life signal has
  // little flat-stretch rank noise and the trend must be near-monotone.
  std::vector<Eigen::VectorXd> fwd{Eigen::VectorXd::Constant(7, 0.65)};
  SyntheticConfig config = SyntheticConfig::left_to_right(fwd, 3, 1.0, 0.0625, 12);
  SyntheticResult gen = generate_synthetic(config, 17);
  IohmmParams p = fixture::params_from(config);

  // Pick a unit long enough for a meaningful trend.
  const UnitTrajectory* unit = &gen.data.units.front();
  for (const auto& u : gen.data.units) {
    if (u.cycles() > unit->cycles()) unit = &u;
  }
  REQUIRE(unit->cycles() >= 8);

  RulConfig rc;
  rc.n_rollouts = 3000;
  rc.seed = 23;
  std::vector<RulEstimate> trend = rul_trend(p, *unit, 1, {config.failure_state}, rc);
  REQUIRE(static_cast<int>(trend.size()) == unit->cycles());

  CHECK(trend.front().cycle == 1);
  CHECK(trend.back().cycle == unit->cycles());
  CHECK(trend.back().mean_rul <= 2.0);

  std::vector<double> cycles, ruls;
  for (const auto& e : trend) {
    cycles.push_back(static_cast<double>(e.cycle));
    ruls.push_back(e.mean_rul);
  }
  CHECK(oracle::spearman_rho(cycles, ruls) < -0.9);
}

TEST_CASE("stride covering the whole unit leaves a single estimate at cycle 1") {
  SyntheticConfig config = fixture::chain_config(3, 1, 4);
  SyntheticResult gen = generate_synthetic(config, 29);
  IohmmParams p = fixture::params_from(config);
  const UnitTrajectory& unit = gen.data.units.front();

  RulConfig rc;
  rc.n_rollouts = 50;
  rc.seed = 1;
  std::vector<RulEstimate> trend = rul_trend(p, unit, unit.cycles() + 5, {2}, rc);
  REQUIRE(trend.size() == 1);
  CHECK(trend.front().cycle == 1);

  CHECK_THROWS_AS(rul_trend(p, unit, 0, {2}, rc), Error);
  CHECK_THROWS_AS(rul_trend(p, unit, -3, {2}, rc), Error);
}

TEST_CASE("trend CSV round-trips the estimates") {
  std::vector<RulEstimate> trend(2);
  trend[0] = {1, 12.5, 3.25, 100, 0.0};
  trend[1] = {2, 11.0, 3.0, 100, 0.02};
  auto file = std::filesystem::temp_directory_path() / "srla_test_rul.csv";
  write_rul_csv(file, 7, trend);

  std::ifstream in(file);
  std::string header, row1;
  std::getline(in, header);
  std::getline(in, row1);
  CHECK(header == "unit,cycle,mean_rul,std_rul,truncated_fraction");
  CHECK(row1.rfind("7,1,12.5", 0) == 0);
  std::filesystem::remove(file);
}
