#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "srla/error.hpp"
#include "srla/iohmm.hpp"
#include "srla/synthetic.hpp"
#include "srla/util.hpp"

using namespace srla;

namespace {

IohmmParams random_model(std::mt19937_64& rng, int n_states, int n_inputs, int d_y) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  std::uniform_real_distribution<double> mean_d(-2.0, 2.0);
  std::uniform_real_distribution<double> var_d(0.3, 1.5);

  IohmmParams p;
  p.n_states = n_states;
  p.n_inputs = n_inputs;
  p.pi.resize(n_states);
  for (int i = 0; i < n_states; ++i) p.pi(i) = unif(rng);
  p.pi /= p.pi.sum();
  for (int u = 0; u < n_inputs; ++u) {
    Eigen::MatrixXd A(n_states, n_states);
    for (int i = 0; i < n_states; ++i) {
      for (int j = 0; j < n_states; ++j) A(i, j) = unif(rng);
      A.row(i) /= A.row(i).sum();
    }
    p.trans.push_back(A);
  }
  p.emis.resize(static_cast<std::size_t>(n_states));
  for (int s = 0; s < n_states; ++s) {
    for (int u = 0; u < n_inputs; ++u) {
      GaussianDiag g;
      g.mean.resize(d_y);
      g.var.resize(d_y);
      for (int d = 0; d < d_y; ++d) {
        g.mean(d) = mean_d(rng);
        g.var(d) = var_d(rng);
      }
      p.emis[static_cast<std::size_t>(s)].push_back(g);
    }
  }
  p.validate();
  return p;
}

struct RandomSequence {
  std::vector<int> inputs;
  Eigen::MatrixXd obs;
};

RandomSequence random_sequence(std::mt19937_64& rng, int T, int n_inputs, int d_y) {
  std::uniform_int_distribution<int> input_d(0, n_inputs - 1);
  std::uniform_real_distribution<double> obs_d(-3.0, 3.0);
  RandomSequence s;
  s.inputs.resize(static_cast<std::size_t>(T));
  s.obs.resize(T, d_y);
  for (int t = 0; t < T; ++t) {
    s.inputs[static_cast<std::size_t>(t)] = input_d(rng);
    for (int d = 0; d < d_y; ++d) s.obs(t, d) = obs_d(rng);
  }
  return s;
}

}  // namespace

TEST_CASE("params validation rejects broken rows and tiny variances") {
  IohmmParams p = fixture::two_state();
  CHECK_NOTHROW(p.validate());

  IohmmParams bad_row = p;
  bad_row.trans[0](0, 0) = 0.95;  // row sums to 1.05
  CHECK_THROWS_AS(bad_row.validate(), Error);

  IohmmParams bad_var = p;
  bad_var.emis[0][0].var(0) = 1e-9;
  CHECK_THROWS_AS(bad_var.validate(), Error);

  IohmmParams bad_pi = p;
  bad_pi.pi(0) = 0.8;
  CHECK_THROWS_AS(bad_pi.validate(), Error);
}

TEST_CASE("posterior matches exhaustive enumeration on a 2-state, T=3 model") {
  IohmmParams p = fixture::two_state();
  std::vector<int> inputs{0, 0, 0};
  Eigen::MatrixXd obs(3, 1);
  obs << 0.5, 2.5, 3.2;

  PosteriorSequence post = posterior_gamma(p, inputs, obs);
  oracle::EnumerationResult ref = oracle::enumerate_paths(p, inputs, obs);
  CHECK((post.gamma - ref.gamma).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(post.log_likelihood == doctest::Approx(ref.log_likelihood).epsilon(1e-12));
  CHECK(log_likelihood(p, inputs, obs) == doctest::Approx(ref.log_likelihood).epsilon(1e-12));
}

TEST_CASE("deterministic model pins the posterior to the forced path") {
  IohmmParams p = fixture::two_state();
  p.pi = Eigen::Vector2d(1.0, 0.0);
  p.trans[0] = Eigen::MatrixXd::Identity(2, 2);
  std::vector<int> inputs{0, 0, 0, 0};
  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(4, 1);
  PosteriorSequence post = posterior_gamma(p, inputs, obs);
  CHECK((post.gamma.col(0).array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("gamma rows always sum to one") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    IohmmParams p = random_model(rng, 3, 2, 2);
    RandomSequence s = random_sequence(rng, 6, 2, 2);
    PosteriorSequence post = posterior_gamma(p, s.inputs, s.obs);
    for (int t = 0; t < post.gamma.rows(); ++t) {
      CHECK(std::abs(post.gamma.row(t).sum() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("viterbi equals the enumerated argmax on a 3-state, T=8 model") {
  std::mt19937_64 rng(5);
  IohmmParams p = random_model(rng, 3, 2, 2);
  RandomSequence s = random_sequence(rng, 8, 2, 2);
  ViterbiPath path = viterbi(p, s.inputs, s.obs);
  oracle::EnumerationResult ref = oracle::enumerate_paths(p, s.inputs, s.obs);
  CHECK(path.states == ref.best_path);
  CHECK(path.log_prob == doctest::Approx(ref.best_log_prob).epsilon(1e-12));
  CHECK(sequence_log_prob(p, path.states, s.inputs, s.obs) ==
        doctest::Approx(path.log_prob).epsilon(1e-12));
}

TEST_CASE("deterministic left-to-right model decodes 0,1,2") {
  IohmmParams p = fixture::three_state_two_input();
  p.trans[0] << 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0;
  std::vector<int> inputs{0, 0, 0};
  Eigen::MatrixXd obs(3, 2);
  obs << 0.0, 0.0, 2.0, 2.0, 4.0, 4.0;
  ViterbiPath path = viterbi(p, inputs, obs);
  CHECK(path.states == std::vector<int>{0, 1, 2});
}

TEST_CASE("exactly tied paths resolve to the lower state indices") {
  // Symmetric two-state model: every path has identical joint probability.
  IohmmParams p = fixture::two_state();
  p.pi = Eigen::Vector2d(0.5, 0.5);
  p.trans[0].setConstant(0.5);
  p.emis[1][0] = p.emis[0][0];
  std::vector<int> inputs{0, 0, 0};
  Eigen::MatrixXd obs(3, 1);
  obs << 0.1, -0.2, 0.3;
  ViterbiPath path = viterbi(p, inputs, obs);
  CHECK(path.states == std::vector<int>{0, 0, 0});
  oracle::EnumerationResult ref = oracle::enumerate_paths(p, inputs, obs);
  CHECK(path.log_prob == doctest::Approx(ref.best_log_prob).epsilon(1e-12));
}

TEST_CASE("property: inference agrees with enumeration over 200 random models") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n_d(2, 3), t_d(2, 8), k_d(1, 2), d_d(1, 2);
  int gamma_vs_viterbi_disagreements = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int N = n_d(rng), T = t_d(rng), K = k_d(rng), D = d_d(rng);
    IohmmParams p = random_model(rng, N, K, D);
    RandomSequence s = random_sequence(rng, T, K, D);

    oracle::EnumerationResult ref = oracle::enumerate_paths(p, s.inputs, s.obs);
    PosteriorSequence post = posterior_gamma(p, s.inputs, s.obs);
    ViterbiPath path = viterbi(p, s.inputs, s.obs);

    REQUIRE((post.gamma - ref.gamma).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE(std::abs(post.log_likelihood - ref.log_likelihood) < 1e-9);
    REQUIRE(path.states == ref.best_path);

    for (int t = 0; t < T; ++t) {
      int marginal_best = 0;
      post.gamma.row(t).maxCoeff(&marginal_best);
      if (marginal_best != path.states[static_cast<std::size_t>(t)]) ++gamma_vs_viterbi_disagreements;
    }
  }
  // The per-cycle posterior argmax and the joint best path are distinct
  // quantities; over this many random models they must differ somewhere.
  CHECK(gamma_vs_viterbi_disagreements > 0);
}

TEST_CASE("log-likelihood stays finite on far-out observations") {
  IohmmParams p = fixture::two_state();
  std::vector<int> inputs{0, 0};
  Eigen::MatrixXd near(2, 1), far(2, 1);
  near << 0.0, 3.0;
  far << 0.0, 1000.0;
  const double ll_near = log_likelihood(p, inputs, near);
  const double ll_far = log_likelihood(p, inputs, far);
  CHECK(std::isfinite(ll_far));
  CHECK(ll_far < ll_near - 1000.0);
  CHECK(log_likelihood(p, inputs, far) == ll_far);
}

TEST_CASE("sample_next: degenerate row, frequencies, determinism") {
  IohmmParams p = fixture::three_state_two_input();
  p.trans[0].row(0) << 0.0, 1.0, 0.0;
  std::mt19937_64 rng = make_rng(3);
  for (int i = 0; i < 50; ++i) {
    auto [next, obs] = sample_next(p, 0, 0, rng);
    CHECK(next == 1);
    CHECK(obs.size() == 2);
  }

  IohmmParams q = fixture::two_state();
  q.trans[0].row(0) << 0.3, 0.7;
  std::mt19937_64 rng2 = make_rng(4);
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    ones += sample_next(q, 0, 0, rng2).first;
  }
  CHECK(std::abs(static_cast<double>(ones) / n - 0.7) < 0.01);

  std::mt19937_64 ra = make_rng(11), rb = make_rng(11);
  for (int i = 0; i < 20; ++i) {
    auto a = sample_next(q, 0, 0, ra);
    auto b = sample_next(q, 0, 0, rb);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }

  CHECK_THROWS_AS(sample_next(q, 5, 0, rng2), Error);
}

TEST_CASE("EM: monotone trace, tolerance stop, stochastic rows at convergence") {
  RunToFailureDataset data = fixture::chain_dataset(3, 2, 20, 21);
  EmConfig config;
  config.seed = 5;
  config.max_epochs = 200;
  EmFitResult fit = fit_em(data, 3, config);

  REQUIRE(fit.ll_trace.size() >= 2);
  for (std::size_t i = 1; i < fit.ll_trace.size(); ++i) {
    CHECK(fit.ll_trace[i] >= fit.ll_trace[i - 1] - 1e-9);
  }
  if (fit.converged) {
    const std::size_t n = fit.ll_trace.size();
    CHECK(std::abs(fit.ll_trace[n - 1] - fit.ll_trace[n - 2]) < config.tol);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      CHECK(std::abs(fit.ll_trace[i] - fit.ll_trace[i - 1]) >= config.tol);
    }
  }
  CHECK_NOTHROW(fit.params.validate());
}

TEST_CASE("EM: recovers the generator's transient transition rows") {
  // 3-state chain; the absorbing row is unobservable in run-to-failure data
  // (no unit survives past entry) and is excluded from the comparison.
  SyntheticConfig config = fixture::chain_config(3, 1, 60);
  SyntheticResult gen = generate_synthetic(config, 31);

  EmConfig em;
  em.seed = 13;
  EmFitResult fit = fit_em(gen.data, 3, em);

  Eigen::MatrixXd cost(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      cost(i, j) = (fit.params.emis[static_cast<std::size_t>(i)][0].mean -
                    config.emission_mean.row(j).transpose())
                       .norm();
    }
  }
  auto [perm, total] = oracle::min_cost_assignment(cost);

  double linf = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (perm[static_cast<std::size_t>(i)] == config.failure_state) continue;
    for (int j = 0; j < 3; ++j) {
      linf = std::max(linf, std::abs(fit.params.trans[0](i, j) -
                                     config.transition[0](perm[static_cast<std::size_t>(i)],
                                                          perm[static_cast<std::size_t>(j)])));
    }
  }
  CHECK(linf < 0.05);
}

TEST_CASE("EM: single-input fit is the plain-HMM special case and is reproducible") {
  RunToFailureDataset data = fixture::chain_dataset(3, 1, 10, 8);
  EmConfig config;
  config.seed = 21;
  EmFitResult a = fit_em(data, 3, config);
  EmFitResult b = fit_em(data, 3, config);
  CHECK(a.params.n_inputs == 1);
  CHECK(a.ll_trace == b.ll_trace);
  CHECK(a.params.pi == b.params.pi);
  for (int u = 0; u < 1; ++u) CHECK(a.params.trans[u] == b.params.trans[u]);
}

TEST_CASE("EM: degenerate inputs raise") {
  RunToFailureDataset empty;
  empty.sensor_names = {"s_1"};
  EmConfig config;
  CHECK_THROWS_AS(fit_em(empty, 2, config), Error);

  RunToFailureDataset data = fixture::tiny_dataset();
  CHECK_THROWS_AS(fit_em(data, 1000, config), Error);
  CHECK_THROWS_AS(fit_em(data, 1, config), Error);
}

TEST_CASE("prefix decoder tracks full-sequence inference") {
  std::mt19937_64 rng(8);
  IohmmParams p = random_model(rng, 3, 2, 2);
  RandomSequence s = random_sequence(rng, 7, 2, 2);

  PrefixDecoder dec(p);
  for (int t = 0; t < 7; ++t) {
    dec.push(s.inputs[static_cast<std::size_t>(t)], s.obs.row(t).transpose());
    CHECK(std::abs(dec.filtered().sum() - 1.0) < 1e-9);
  }
  CHECK(dec.length() == 7);
  CHECK(dec.log_likelihood() == doctest::Approx(log_likelihood(p, s.inputs, s.obs)).epsilon(1e-12));
  ViterbiPath path = viterbi(p, s.inputs, s.obs);
  CHECK(dec.map_state() == path.states.back());

  dec.reset();
  CHECK(dec.length() == 0);
}
