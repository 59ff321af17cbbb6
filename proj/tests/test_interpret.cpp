#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "srla/error.hpp"
#include "srla/interpret.hpp"
#include "srla/synthetic.hpp"

using namespace srla;

namespace {

// Two well-separated clusters in 2-d, labels 0/1.
std::pair<Eigen::MatrixXd, std::vector<int>> separable_data(int per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  Eigen::MatrixXd X(2 * per_class, 2);
  std::vector<int> y;
  for (int i = 0; i < per_class; ++i) {
    X.row(i) << -2.0 + noise(rng), -2.0 + noise(rng);
    y.push_back(0);
  }
  for (int i = 0; i < per_class; ++i) {
    X.row(per_class + i) << 2.0 + noise(rng), 2.0 + noise(rng);
    y.push_back(1);
  }
  return {X, y};
}

}  // namespace

TEST_CASE("separable two-class problem is fit to full training accuracy") {
  auto [X, y] = separable_data(40, 1);
  ClassifierConfig config;
  StateClassifier clf = fit_state_classifier(X, y, config);
  CHECK(clf.train_accuracy == doctest::Approx(1.0));
  CHECK(clf.classes == std::vector<int>{0, 1});
  CHECK(clf.W.rows() == 2);
  CHECK(clf.W.cols() == 2);

  Eigen::VectorXd probs = clf.probabilities(Eigen::Vector2d(-2.0, -2.0));
  CHECK(probs.size() == 2);
  CHECK(std::abs(probs.sum() - 1.0) < 1e-12);
  CHECK(probs(0) > 0.9);
  CHECK(clf.predict(Eigen::Vector2d(-2.0, -2.0)) == 0);
  CHECK(clf.predict(Eigen::Vector2d(2.0, 2.0)) == 1);
}

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, 2);

  for (int rep = 0; rep < 10; ++rep) {
    const int n = 6, d = 3, C = 3;
    Eigen::MatrixXd X(n, d);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) X(i, j) = gauss(rng);
      y.push_back(label(rng));
    }
    const std::set<int> distinct(y.begin(), y.end());
    if (distinct.size() < 2) continue;
    // Remap to dense class indices for the raw loss functions.
    const std::vector<int> sorted(distinct.begin(), distinct.end());
    for (auto& t : y) {
      t = static_cast<int>(std::find(sorted.begin(), sorted.end(), t) - sorted.begin());
    }
    const int k = static_cast<int>(sorted.size());

    Eigen::MatrixXd W(d, k);
    Eigen::VectorXd b(k);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < k; ++j) W(i, j) = 0.3 * gauss(rng);
    }
    for (int j = 0; j < k; ++j) b(j) = 0.3 * gauss(rng);
    const double l2 = 1e-2;

    Eigen::MatrixXd dW;
    Eigen::VectorXd db;
    classifier_gradients(W, b, X, y, l2, dW, db);

    Eigen::VectorXd packed(d * k + k);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < k; ++j) packed(i * k + j) = W(i, j);
    }
    packed.tail(k) = b;
    auto unpack_loss = [&](const Eigen::VectorXd& v) {
      Eigen::MatrixXd Wv(d, k);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < k; ++j) Wv(i, j) = v(i * k + j);
      }
      return classifier_loss(Wv, v.tail(k), X, y, l2);
    };
    Eigen::VectorXd fd = oracle::finite_diff(unpack_loss, packed);

    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < k; ++j) {
        const double exact = dW(i, j), approx = fd(i * k + j);
        CHECK(std::abs(exact - approx) / std::max(1.0, std::abs(approx)) < 1e-4);
      }
    }
    for (int j = 0; j < k; ++j) {
      CHECK(std::abs(db(j) - fd(d * k + j)) / std::max(1.0, std::abs(fd(d * k + j))) < 1e-4);
    }
  }
}

TEST_CASE("training loss never increases") {
  auto [X, y] = separable_data(25, 3);
  ClassifierConfig config;
  config.max_epochs = 300;
  StateClassifier clf = fit_state_classifier(X, y, config);
  REQUIRE(clf.loss_trace.size() >= 2);
  for (std::size_t i = 1; i < clf.loss_trace.size(); ++i) {
    CHECK(clf.loss_trace[i] <= clf.loss_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("duplicated feature column leaves predictions intact") {
  auto [X, y] = separable_data(30, 5);
  Eigen::MatrixXd X2(X.rows(), 3);
  X2 << X, X.col(0);

  ClassifierConfig config;
  StateClassifier base = fit_state_classifier(X, y, config);
  StateClassifier dup = fit_state_classifier(X2, y, config);

  int agree = 0;
  for (int i = 0; i < X.rows(); ++i) {
    Eigen::Vector3d xi(X(i, 0), X(i, 1), X(i, 0));
    if (dup.predict(xi) == base.predict(X.row(i).transpose())) ++agree;
  }
  CHECK(agree == X.rows());
}

TEST_CASE("single-class targets are rejected") {
  Eigen::MatrixXd X(4, 2);
  X.setRandom();
  std::vector<int> y{3, 3, 3, 3};
  ClassifierConfig config;
  try {
    fit_state_classifier(X, y, config);
    FAIL("expected a SingleClass error");
  } catch (const Error& e) {
    CHECK(e.code() == "SingleClass");
  }

  CHECK_THROWS_AS(fit_state_classifier(Eigen::MatrixXd(0, 2), {}, config), Error);
  CHECK_THROWS_AS(fit_state_classifier(X, {0, 1}, config), Error);  // row/target mismatch
}

TEST_CASE("feature importance ranks by magnitude and keeps signs") {
  StateClassifier clf;
  clf.W.resize(3, 2);
  clf.W << 2.0, -2.0, -5.0, 5.0, 0.1, -0.1;
  clf.b = Eigen::Vector2d(0.0, 0.0);
  clf.classes = {0, 4};
  std::vector<std::string> names{"f1", "f2", "f3"};

  auto top2 = feature_importance(clf, 0, 2, names);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0].first == "f2");
  CHECK(top2[0].second == doctest::Approx(-5.0));
  CHECK(top2[1].first == "f1");
  CHECK(top2[1].second == doctest::Approx(2.0));

  auto all = feature_importance(clf, 4, 10, names);  // top_k > feature count
  CHECK(all.size() == 3);
  CHECK(all[2].first == "f3");

  CHECK_THROWS_AS(feature_importance(clf, 2, 2, names), Error);  // unknown state
  CHECK_THROWS_AS(feature_importance(clf, 0, 2, {"f1"}), Error);  // name count mismatch
}

TEST_CASE("failure report pins the shifted sensor as the top discriminator") {
  // 4-state chain where only sensor 3 moves when the failure state is entered.
  SyntheticConfig config = fixture::chain_config(4, 1, 30, 4);
  config.emission_mean.setZero();
  config.emission_mean(3, 3) = 6.0;
  SyntheticResult gen = generate_synthetic(config, 41);

  ClassifierConfig cc;
  FailureModeReport report =
      failure_mode_report(fixture::params_from(config), gen.data, {3}, std::nullopt, cc, 4);

  REQUIRE(report.per_failure_state.count(3) == 1);
  const auto& ranked = report.per_failure_state.at(3);
  REQUIRE_FALSE(ranked.empty());
  CHECK(ranked.front().feature == gen.data.sensor_names[3]);
  CHECK(report.classifier_accuracy > 0.9);
  CHECK(ranked.front().symbol.empty());
}

TEST_CASE("two failure modes surface their own sensors") {
  // Split units between two absorbing failure states with disjoint signatures.
  SyntheticConfig config;
  config.n_states = 3;
  config.n_inputs = 1;
  config.failure_state = 2;
  config.pi = Eigen::Vector3d(1.0, 0.0, 0.0);
  Eigen::MatrixXd A(3, 3);
  A << 0.8, 0.0, 0.2, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
  config.transition = {A};
  config.emission_mean.resize(3, 2);
  config.emission_mean << 0.0, 0.0, 5.0, 0.0, 0.0, 5.0;
  config.emission_var = Eigen::MatrixXd::Constant(3, 2, 0.04);
  config.input_probs = Eigen::VectorXd::Ones(1);
  config.n_units = 20;
  SyntheticResult gen_a = generate_synthetic(config, 43);

  // Second batch fails into state 1 instead (sensor 0 shifts).
  Eigen::MatrixXd B(3, 3);
  B << 0.8, 0.2, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
  config.transition = {B};
  config.failure_state = 1;
  SyntheticResult gen_b = generate_synthetic(config, 44);
  RunToFailureDataset merged = gen_a.data;
  for (auto u : gen_b.data.units) {
    u.unit_id += 1000;
    merged.units.push_back(std::move(u));
  }

  IohmmParams p;
  p.n_states = 3;
  p.n_inputs = 1;
  p.pi = Eigen::Vector3d(1.0, 0.0, 0.0);
  Eigen::MatrixXd M(3, 3);
  M << 0.8, 0.1, 0.1, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
  p.trans = {M};
  p.emis.resize(3);
  for (int s = 0; s < 3; ++s) {
    GaussianDiag g;
    g.mean = config.emission_mean.row(s).transpose();
    g.var = config.emission_var.row(s).transpose();
    p.emis[static_cast<std::size_t>(s)] = {g};
  }

  ClassifierConfig cc;
  FailureModeReport report = failure_mode_report(p, merged, {1, 2}, std::nullopt, cc, 2);
  REQUIRE(report.per_failure_state.count(1) == 1);
  REQUIRE(report.per_failure_state.count(2) == 1);
  CHECK(report.per_failure_state.at(1).front().feature == merged.sensor_names[0]);
  CHECK(report.per_failure_state.at(2).front().feature == merged.sensor_names[1]);
}

TEST_CASE("failure state never decoded in the data is an error") {
  SyntheticConfig config = fixture::chain_config(3, 1, 5);
  SyntheticResult gen = generate_synthetic(config, 47);
  ClassifierConfig cc;
  CHECK_THROWS_AS(
      failure_mode_report(fixture::params_from(config), gen.data, {17}, std::nullopt, cc, 3), Error);
}

TEST_CASE("descriptions decorate the report when given") {
  SyntheticConfig config = fixture::chain_config(3, 1, 15);
  SyntheticResult gen = generate_synthetic(config, 53);

  SensorDescriptions desc;
  for (const auto& name : gen.data.sensor_names) {
    desc[name] = SensorDescription{"SYM_" + name, "reads " + name};
  }
  ClassifierConfig cc;
  FailureModeReport report =
      failure_mode_report(fixture::params_from(config), gen.data, {2}, desc, cc, 3);
  const auto& ranked = report.per_failure_state.at(2);
  REQUIRE_FALSE(ranked.empty());
  CHECK(ranked.front().symbol == "SYM_" + ranked.front().feature);
  CHECK_FALSE(ranked.front().description.empty());
}

TEST_CASE("description CSV loads and importance CSV writes") {
  auto dir = std::filesystem::temp_directory_path();
  auto desc_file = dir / "srla_test_desc.csv";
  {
    std::ofstream out(desc_file);
    out << "feature,symbol,description\n";
    out << "s_1,T24,total temperature at LPC outlet\n";
    out << "s_2,P30,\"pressure, HPC outlet\"\n";
  }
  SensorDescriptions desc = load_sensor_descriptions(desc_file);
  REQUIRE(desc.size() == 2);
  CHECK(desc.at("s_1").symbol == "T24");
  CHECK(desc.at("s_2").description == "pressure, HPC outlet");
  std::filesystem::remove(desc_file);

  auto [X, y] = separable_data(20, 7);
  ClassifierConfig config;
  StateClassifier clf = fit_state_classifier(X, y, config);
  auto imp_file = dir / "srla_test_importance.csv";
  write_importance_csv(imp_file, clf, {"fa", "fb"}, 2);
  std::ifstream in(imp_file);
  std::string header;
  std::getline(in, header);
  CHECK(header == "state,rank,feature,coefficient");
  std::filesystem::remove(imp_file);
}
