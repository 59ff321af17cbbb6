#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "fixtures.hpp"
#include "srla/dataset.hpp"
#include "srla/error.hpp"
#include "srla/normalizer.hpp"
#include "srla/synthetic.hpp"

using namespace srla;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("srla_test_" + name);
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

}  // namespace

TEST_CASE("csv load: two units with T 5 and 3") {
  const fs::path p = temp_file("two_units.csv");
  std::string body = "unit,cycle,op_1,s_1\n";
  for (int t = 1; t <= 5; ++t) body += "1," + std::to_string(t) + ",0.5," + std::to_string(t * 1.0) + "\n";
  for (int t = 1; t <= 3; ++t) body += "2," + std::to_string(t) + ",0.5," + std::to_string(t * 2.0) + "\n";
  write_file(p, body);

  RunToFailureDataset data = load_run_to_failure(p, DataFormat::csv);
  REQUIRE(data.units.size() == 2);
  CHECK(data.unit_by_id(1).cycles() == 5);
  CHECK(data.unit_by_id(2).cycles() == 3);
  CHECK(data.sensor_names == std::vector<std::string>{"s_1"});
  CHECK(data.unit_by_id(2).sensors(1, 0) == doctest::Approx(4.0));
  fs::remove(p);
}

TEST_CASE("csv load: cycle gap raises a parse error naming the unit") {
  const fs::path p = temp_file("gap.csv");
  write_file(p, "unit,cycle,s_1\n1,1,0\n1,2,0\n1,4,0\n");
  CHECK_THROWS_WITH_AS(load_run_to_failure(p, DataFormat::csv),
                       doctest::Contains("unit 1"), Error);
  try {
    load_run_to_failure(p, DataFormat::csv);
  } catch (const Error& e) {
    CHECK(std::string(e.code()) == "ParseError");
  }
  fs::remove(p);
}

TEST_CASE("csv load: non-numeric field raises") {
  const fs::path p = temp_file("nonnum.csv");
  write_file(p, "unit,cycle,s_1\n1,1,abc\n1,2,0\n");
  CHECK_THROWS_AS(load_run_to_failure(p, DataFormat::csv), Error);
  fs::remove(p);
}

TEST_CASE("cmapss load: 26-column whitespace format") {
  const fs::path p = temp_file("fd.txt");
  std::string body;
  for (int t = 1; t <= 3; ++t) {
    body += "1 " + std::to_string(t);
    for (int j = 0; j < 24; ++j) body += " " + std::to_string(0.1 * j + t);
    body += "\n";
  }
  write_file(p, body);
  RunToFailureDataset data = load_run_to_failure(p, DataFormat::cmapss_txt);
  REQUIRE(data.units.size() == 1);
  CHECK(data.op_dim() == 3);
  CHECK(data.sensor_dim() == 21);
  CHECK(data.unit_by_id(1).cycles() == 3);
  fs::remove(p);
}

TEST_CASE("minmax normalizer maps [2,4,6] to [0, 0.5, 1]") {
  RunToFailureDataset data = fixture::tiny_dataset();
  RunToFailureDataset one;
  one.sensor_names = {"s_1"};
  one.op_setting_names = {};
  UnitTrajectory u;
  u.unit_id = 1;
  u.sensors = Eigen::MatrixXd(3, 1);
  u.sensors << 2.0, 4.0, 6.0;
  u.op_settings = Eigen::MatrixXd(3, 0);
  one.units = {u};

  NormalizationSpec spec = fit_normalizer(one, NormMode::minmax, FeatureSet::sensors);
  RunToFailureDataset out = apply_normalizer(spec, one);
  CHECK(out.units[0].sensors(0, 0) == doctest::Approx(0.0));
  CHECK(out.units[0].sensors(1, 0) == doctest::Approx(0.5));
  CHECK(out.units[0].sensors(2, 0) == doctest::Approx(1.0));
  CHECK(one.units[0].sensors(0, 0) == doctest::Approx(2.0));  // original untouched
}

TEST_CASE("zscore normalizer yields mean 0 and std 1 on its training data") {
  RunToFailureDataset one;
  one.sensor_names = {"s_1"};
  UnitTrajectory u;
  u.unit_id = 1;
  u.sensors = Eigen::MatrixXd(3, 1);
  u.sensors << 2.0, 4.0, 6.0;
  u.op_settings = Eigen::MatrixXd(3, 0);
  one.units = {u};

  NormalizationSpec spec = fit_normalizer(one, NormMode::zscore, FeatureSet::sensors);
  RunToFailureDataset out = apply_normalizer(spec, one);
  const auto& col = out.units[0].sensors.col(0);
  const double mean = col.mean();
  const double var = (col.array() - mean).square().sum() / col.size();
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
}

TEST_CASE("constant feature under minmax maps to 0 with a warning") {
  RunToFailureDataset one;
  one.sensor_names = {"s_1", "s_2"};
  UnitTrajectory u;
  u.unit_id = 1;
  u.sensors = Eigen::MatrixXd(3, 2);
  u.sensors << 5.0, 1.0, 5.0, 2.0, 5.0, 3.0;
  u.op_settings = Eigen::MatrixXd(3, 0);
  one.units = {u};

  NormalizationSpec spec = fit_normalizer(one, NormMode::minmax, FeatureSet::sensors);
  REQUIRE(spec.warnings.size() == 1);
  CHECK(spec.warnings[0].find("s_1") != std::string::npos);
  RunToFailureDataset out = apply_normalizer(spec, one);
  CHECK(out.units[0].sensors.col(0).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(out.units[0].sensors(2, 1) == doctest::Approx(1.0));
}

TEST_CASE("normalizer statistics are frozen: test data can leave [0,1]") {
  RunToFailureDataset train;
  train.sensor_names = {"s_1"};
  UnitTrajectory u;
  u.unit_id = 1;
  u.sensors = Eigen::MatrixXd(2, 1);
  u.sensors << 0.0, 10.0;
  u.op_settings = Eigen::MatrixXd(2, 0);
  train.units = {u};

  NormalizationSpec spec = fit_normalizer(train, NormMode::minmax, FeatureSet::sensors);
  RunToFailureDataset test = train;
  test.units[0].sensors << -5.0, 20.0;
  RunToFailureDataset out = apply_normalizer(spec, test);
  CHECK(out.units[0].sensors(0, 0) == doctest::Approx(-0.5));
  CHECK(out.units[0].sensors(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("discretization: distinct rounded rows define the alphabet") {
  RunToFailureDataset data;
  data.sensor_names = {"s_1"};
  data.op_setting_names = {"op_1"};
  UnitTrajectory u;
  u.unit_id = 1;
  u.sensors = Eigen::MatrixXd::Zero(4, 1);
  u.op_settings = Eigen::MatrixXd(4, 1);
  u.op_settings << 10.0, 20.0, 10.0, 20.0;
  data.units = {u};

  DiscretizationResult res = discretize_operating_conditions(data);
  CHECK(res.data.input_alphabet_size() == 2);
  CHECK(res.centroids.rows() == 2);
  CHECK(res.data.units[0].input_symbols ==
        std::vector<int>{0, 1, 0, 1});  // symbols ranked by centroid order

  SUBCASE("single regime collapses to one symbol") {
    RunToFailureDataset flat = data;
    flat.units[0].op_settings.setConstant(42.0);
    DiscretizationResult one = discretize_operating_conditions(flat);
    CHECK(one.data.input_alphabet_size() == 1);
  }

  SUBCASE("pure function of inputs") {
    DiscretizationResult again = discretize_operating_conditions(data);
    CHECK(again.data.units[0].input_symbols == res.data.units[0].input_symbols);
  }

  SUBCASE("k above the distinct row count raises") {
    CHECK_THROWS_AS(discretize_operating_conditions(data, 3), Error);
  }

  SUBCASE("k-means with k equal to regime count recovers the regimes") {
    DiscretizationResult km = discretize_operating_conditions(data, 2, 1e-3, 5);
    CHECK(km.data.units[0].input_symbols == std::vector<int>{0, 1, 0, 1});
  }
}

TEST_CASE("synthetic generator: seeded determinism") {
  SyntheticConfig config = fixture::chain_config(4, 1, 2);
  SyntheticResult a = generate_synthetic(config, 123);
  SyntheticResult b = generate_synthetic(config, 123);
  REQUIRE(a.data.units.size() == b.data.units.size());
  for (std::size_t i = 0; i < a.data.units.size(); ++i) {
    CHECK(a.data.units[i].sensors == b.data.units[i].sensors);
    CHECK(a.hidden_states[i] == b.hidden_states[i]);
  }
  SyntheticResult c = generate_synthetic(config, 124);
  CHECK(a.data.units[0].sensors != c.data.units[0].sensors);
}

TEST_CASE("synthetic generator: non-absorbing failure state is rejected") {
  SyntheticConfig config = fixture::chain_config(3, 1, 1);
  config.transition[0](2, 0) = 0.1;  // leak out of the failure state
  config.transition[0](2, 2) = 0.9;
  CHECK_THROWS_AS(generate_synthetic(config, 1), Error);
}

TEST_CASE("synthetic generator: mean lifetime matches the geometric-sum expectation") {
  // 10 states (9 transient), forward probability 0.02 -> E[T] = 9/0.02 = 450.
  std::vector<Eigen::VectorXd> fwd{Eigen::VectorXd::Constant(9, 0.02)};
  SyntheticConfig config = SyntheticConfig::left_to_right(fwd, 2, 1.0, 0.05, 50);
  SyntheticResult res = generate_synthetic(config, 42);
  double mean_T = 0.0;
  for (const auto& u : res.data.units) mean_T += u.cycles();
  mean_T /= static_cast<double>(res.data.units.size());
  const double expect = 9.0 / 0.02;
  CHECK(mean_T > expect * 0.85);
  CHECK(mean_T < expect * 1.15);
}

TEST_CASE("synthetic generator: empirical transition frequencies match the config") {
  std::vector<Eigen::VectorXd> fwd{(Eigen::VectorXd(2) << 0.3, 0.45).finished()};
  SyntheticConfig config = SyntheticConfig::left_to_right(fwd, 1, 1.0, 0.1, 40000);
  SyntheticResult res = generate_synthetic(config, 9);

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(3, 3);
  std::size_t transitions = 0;
  for (const auto& states : res.hidden_states) {
    for (std::size_t t = 1; t < states.size(); ++t) {
      counts(states[t - 1], states[t]) += 1.0;
      ++transitions;
    }
  }
  REQUIRE(transitions > 100000);
  double max_err = 0.0;
  for (int i = 0; i < 2; ++i) {  // transient rows only; the absorbing row ends units
    const double row = counts.row(i).sum();
    for (int j = 0; j < 3; ++j) {
      max_err = std::max(max_err, std::abs(counts(i, j) / row - config.transition[0](i, j)));
    }
  }
  CHECK(max_err < 0.05);
}

TEST_CASE("split: sizes, determinism, degenerate input") {
  RunToFailureDataset data = fixture::chain_dataset(4, 1, 10, 3);
  auto [train, test] = split_units(data, 0.8, 7);
  CHECK(train.units.size() == 8);
  CHECK(test.units.size() == 2);

  auto [train2, test2] = split_units(data, 0.8, 7);
  for (std::size_t i = 0; i < train.units.size(); ++i) {
    CHECK(train.units[i].unit_id == train2.units[i].unit_id);
  }

  RunToFailureDataset one;
  one.sensor_names = data.sensor_names;
  one.op_setting_names = data.op_setting_names;
  one.units = {data.units[0]};
  CHECK_THROWS_AS(split_units(one, 0.8, 7), Error);
  CHECK_THROWS_AS(split_units(data, 1.5, 7), Error);
}

TEST_CASE("save -> load round-trips the dataset including input symbols") {
  RunToFailureDataset data = fixture::chain_dataset(4, 2, 3, 11);
  REQUIRE(data.has_input_symbols());
  const fs::path p = temp_file("roundtrip.csv");
  save_csv(data, p);
  RunToFailureDataset back = load_run_to_failure(p, DataFormat::csv);
  REQUIRE(back.units.size() == data.units.size());
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    CHECK(back.units[i].unit_id == data.units[i].unit_id);
    CHECK(back.units[i].input_symbols == data.units[i].input_symbols);
    CHECK((back.units[i].sensors - data.units[i].sensors).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((back.units[i].op_settings - data.units[i].op_settings).cwiseAbs().maxCoeff() < 1e-15);
  }
  fs::remove(p);
}

TEST_CASE("validate: single-cycle unit and mixed symbol presence are rejected") {
  RunToFailureDataset data = fixture::tiny_dataset();
  RunToFailureDataset bad = data;
  bad.units[0].sensors = Eigen::MatrixXd::Zero(1, 1);
  bad.units[0].op_settings = Eigen::MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(bad.validate(), Error);

  RunToFailureDataset mixed = data;
  mixed.units[0].input_symbols = {0, 0, 0};
  CHECK_THROWS_AS(mixed.validate(), Error);
}

TEST_CASE("select_sensors keeps only the named columns") {
  RunToFailureDataset data = fixture::chain_dataset(4, 1, 2, 5);
  REQUIRE(data.sensor_dim() == 3);
  RunToFailureDataset cut = select_sensors(data, {"s_3", "s_1"});
  CHECK(cut.sensor_names == std::vector<std::string>{"s_3", "s_1"});
  CHECK(cut.units[0].sensors.col(0) == data.units[0].sensors.col(2));
  CHECK_THROWS_AS(select_sensors(data, {"s_9"}), Error);
}
