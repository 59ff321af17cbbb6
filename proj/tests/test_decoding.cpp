#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "srla/decoding.hpp"
#include "srla/error.hpp"
#include "srla/synthetic.hpp"

using namespace srla;

namespace {

IohmmParams five_state_chain() {
  // 0 -> 1 -> 2 -> 3 -> 4(absorbing), one input, well separated 1-d emissions.
  IohmmParams p;
  p.n_states = 5;
  p.n_inputs = 1;
  p.pi = Eigen::VectorXd::Zero(5);
  p.pi(0) = 1.0;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i < 4; ++i) {
    A(i, i) = 0.7;
    A(i, i + 1) = 0.3;
  }
  A(4, 4) = 1.0;
  p.trans = {A};
  p.emis.resize(5);
  for (int s = 0; s < 5; ++s) {
    GaussianDiag g;
    g.mean = Eigen::VectorXd::Constant(1, 2.0 * s);
    g.var = Eigen::VectorXd::Constant(1, 0.04);
    p.emis[static_cast<std::size_t>(s)] = {g};
  }
  p.validate();
  return p;
}

ViterbiPath path_of(std::vector<int> states) {
  ViterbiPath p;
  p.states = std::move(states);
  p.log_prob = 0.0;
  return p;
}

}  // namespace

TEST_CASE("failure states are the final decoded states of the training units") {
  SyntheticConfig config = fixture::chain_config(4, 1, 15);
  SyntheticResult gen = generate_synthetic(config, 9);
  std::set<int> failures = decode_failure_states(fixture::params_from(config), gen.data);
  CHECK(failures == std::set<int>{config.failure_state});
  CHECK(decode_failure_states(fixture::params_from(config), gen.data) == failures);
}

TEST_CASE("specialized set by transition radius") {
  IohmmParams p = five_state_chain();
  std::set<int> failures{4};
  SpecializedConfig config;

  config.radius = 0;
  CHECK(build_specialized_set(p, failures, config) == std::set<int>{4});

  config.radius = 1;
  CHECK(build_specialized_set(p, failures, config) == std::set<int>{3, 4});

  config.radius = 2;
  CHECK(build_specialized_set(p, failures, config) == std::set<int>{2, 3, 4});

  config.radius = 10;
  CHECK(build_specialized_set(p, failures, config) == std::set<int>{0, 1, 2, 3, 4});
}

TEST_CASE("radius growth never drops a state") {
  IohmmParams p = five_state_chain();
  std::set<int> failures{4};
  SpecializedConfig config;
  std::set<int> prev;
  for (int r = 0; r <= 5; ++r) {
    config.radius = r;
    std::set<int> cur = build_specialized_set(p, failures, config);
    CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    prev = cur;
  }
}

TEST_CASE("edge threshold prunes weak links") {
  IohmmParams p = five_state_chain();
  p.trans[0].row(2) << 0.0, 0.0, 0.9995, 0.0005, 0.0;
  std::set<int> failures{4};
  SpecializedConfig config;
  config.radius = 3;
  config.edge_threshold = 1e-3;  // severs 2 -> 3
  CHECK(build_specialized_set(p, failures, config) == std::set<int>{3, 4});
}

TEST_CASE("specialized set by value quantile keeps the lowest-value states") {
  IohmmParams p = five_state_chain();
  std::set<int> failures{4};
  SpecializedConfig config;
  config.mode = SpecializedConfig::Mode::value_quantile;
  config.quantile = 0.4;  // 2 of 5 states
  Eigen::VectorXd values(5);
  values << -0.1, -5.0, -0.3, -2.0, -0.2;
  CHECK(build_specialized_set(p, failures, config, values) == std::set<int>{1, 3, 4});

  config.quantile = 0.2;
  CHECK(build_specialized_set(p, failures, config, values) == std::set<int>{1, 4});

  CHECK_THROWS_AS(build_specialized_set(p, failures, config), Error);
}

TEST_CASE("condition map orders a left-to-right decode into bands") {
  // 1 unit, T=10: states appear in blocks 0..3 / 4..6 / 7..8 / 9.
  std::vector<ViterbiPath> paths{path_of({0, 0, 0, 0, 1, 1, 1, 2, 2, 3})};
  ConditionMap map = map_states_to_conditions(paths, {10}, 5);

  CHECK(map.label_of(0) == "normal");
  CHECK(map.label_of(3) == "failure");
  CHECK(map.label_of(4) == "unobserved");
  CHECK_FALSE(map.dispersed);

  std::vector<int> seen;
  for (const auto& band : map.bands) {
    for (int s : band.states) seen.push_back(s);
  }
  CHECK(seen == std::vector<int>{0, 1, 2, 3});
  for (const auto& band : map.bands) CHECK(band.lo_frac <= band.hi_frac);
}

TEST_CASE("condition map flags heavy revisits instead of raising") {
  // State 0 shows up at birth and again at death: its life-position spread is
  // far too wide for the band ordering to mean anything.
  std::vector<ViterbiPath> paths{path_of({0, 1, 1, 1, 1, 1, 1, 1, 1, 0})};
  ConditionMap map = map_states_to_conditions(paths, {10}, 2);
  CHECK(map.dispersed);

  std::vector<ViterbiPath> clean{path_of({0, 0, 0, 0, 0, 1, 1, 1, 1, 1})};
  CHECK_FALSE(map_states_to_conditions(clean, {10}, 2).dispersed);
}

TEST_CASE("single decoded state lands in a single band") {
  std::vector<ViterbiPath> paths{path_of({2, 2, 2})};
  ConditionMap map = map_states_to_conditions(paths, {3}, 4);
  int with_states = 0;
  for (const auto& band : map.bands) {
    if (!band.states.empty()) ++with_states;
  }
  CHECK(with_states == 1);
}

TEST_CASE("posterior failure mass") {
  Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(4);
  one_hot(3) = 1.0;
  CHECK(posterior_failure_mass(one_hot, {3}) == doctest::Approx(1.0));
  CHECK(posterior_failure_mass(one_hot, {1}) == doctest::Approx(0.0));

  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(10, 0.1);
  CHECK(posterior_failure_mass(uniform, {7}) == doctest::Approx(0.1));
  CHECK(posterior_failure_mass(uniform, {}) == doctest::Approx(0.0));
  CHECK(posterior_failure_mass(uniform, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}) == doctest::Approx(1.0));
}

TEST_CASE("annotation bundles decode artifacts and validates containment") {
  SyntheticConfig config = fixture::chain_config(4, 1, 15);
  SyntheticResult gen = generate_synthetic(config, 9);
  SpecializedConfig spec;
  spec.radius = 1;
  StateAnnotation ann = annotate_states(fixture::params_from(config), gen.data, spec);

  CHECK(ann.n_states == 4);
  CHECK(ann.failure_states == std::set<int>{config.failure_state});
  CHECK(std::includes(ann.specialized.begin(), ann.specialized.end(), ann.failure_states.begin(),
                      ann.failure_states.end()));
  CHECK_NOTHROW(ann.validate());

  StateAnnotation broken = ann;
  broken.specialized.erase(config.failure_state);
  CHECK_THROWS_AS(broken.validate(), Error);

  StateAnnotation out_of_range = ann;
  out_of_range.failure_states.insert(99);
  CHECK_THROWS_AS(out_of_range.validate(), Error);
}

TEST_CASE("decode CSV lists every cycle with its band label") {
  RunToFailureDataset data = fixture::tiny_dataset();
  std::vector<ViterbiPath> paths{path_of({0, 0, 1}), path_of({0, 1, 1, 1})};
  ConditionMap map = map_states_to_conditions(paths, {3, 4}, 2);

  auto file = std::filesystem::temp_directory_path() / "srla_test_decode.csv";
  write_decode_csv(file, data, paths, map);
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  CHECK(line == "unit,cycle,viterbi_state,condition_label");
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 7);
  std::filesystem::remove(file);
}
