#include "srla/synthetic.hpp"

#include <cmath>
#include <random>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {

void SyntheticConfig::validate() const {
  if (n_states < 2) fail("InvalidArgument", "synthetic chain needs at least 2 states");
  if (n_inputs < 1) fail("InvalidArgument", "synthetic chain needs at least 1 input symbol");
  if (failure_state < 0 || failure_state >= n_states) {
    fail("InvalidArgument", cat("failure state ", failure_state, " out of range"));
  }
  if (n_units < 1) fail("InvalidArgument", "need at least 1 unit");
  if (max_horizon < 2) fail("InvalidArgument", "max horizon must be at least 2");
  if (pi.size() != n_states) fail("InvalidArgument", "initial distribution size mismatch");
  if (std::abs(pi.sum() - 1.0) > 1e-9 || pi.minCoeff() < 0.0) {
    fail("InvalidArgument", "initial distribution is not a probability vector");
  }
  if (pi(failure_state) != 0.0) {
    fail("InvalidArgument", "initial distribution must put no mass on the failure state");
  }
  if (static_cast<int>(transition.size()) != n_inputs) {
    fail("InvalidArgument", "need one transition matrix per input symbol");
  }
  for (int u = 0; u < n_inputs; ++u) {
    const auto& A = transition[u];
    if (A.rows() != n_states || A.cols() != n_states) {
      fail("InvalidArgument", cat("transition matrix for input ", u, " has wrong shape"));
    }
    for (int i = 0; i < n_states; ++i) {
      if (std::abs(A.row(i).sum() - 1.0) > 1e-9 || A.row(i).minCoeff() < 0.0) {
        fail("InvalidArgument", cat("transition row ", i, " for input ", u, " is not a distribution"));
      }
    }
    if (A(failure_state, failure_state) != 1.0) {
      fail("InvalidArgument", cat("failure state must be absorbing; row ", failure_state, " for input ", u,
                                  " leaks probability"));
    }
  }
  if (emission_mean.rows() != n_states || emission_var.rows() != n_states ||
      emission_mean.cols() != emission_var.cols() || emission_mean.cols() < 1) {
    fail("InvalidArgument", "emission parameter shape mismatch");
  }
  if (emission_var.minCoeff() <= 0.0) fail("InvalidArgument", "emission variances must be positive");
  if (input_probs.size() != n_inputs || std::abs(input_probs.sum() - 1.0) > 1e-9 ||
      input_probs.minCoeff() < 0.0) {
    fail("InvalidArgument", "input distribution is not a probability vector");
  }
}

SyntheticConfig SyntheticConfig::left_to_right(const std::vector<Eigen::VectorXd>& forward_probs_per_input,
                                               int d_y, double separation, double noise_var, int n_units) {
  if (forward_probs_per_input.empty()) fail("InvalidArgument", "need forward probabilities for at least one input");
  const int n_transient = static_cast<int>(forward_probs_per_input.front().size());
  const int n = n_transient + 1;

  SyntheticConfig cfg;
  cfg.n_states = n;
  cfg.n_inputs = static_cast<int>(forward_probs_per_input.size());
  cfg.failure_state = n - 1;
  cfg.pi = Eigen::VectorXd::Zero(n);
  cfg.pi(0) = 1.0;
  for (const auto& fp : forward_probs_per_input) {
    if (fp.size() != n_transient) fail("InvalidArgument", "forward probability vectors differ in length");
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < n_transient; ++s) {
      double p = fp(s);
      if (!(p > 0.0 && p <= 1.0)) fail("InvalidArgument", cat("forward probability ", p, " out of (0,1]"));
      A(s, s) = 1.0 - p;
      A(s, s + 1) = p;
    }
    A(n - 1, n - 1) = 1.0;
    cfg.transition.push_back(A);
  }
  cfg.emission_mean.resize(n, d_y);
  cfg.emission_var = Eigen::MatrixXd::Constant(n, d_y, noise_var);
  for (int s = 0; s < n; ++s) {
    for (int j = 0; j < d_y; ++j) cfg.emission_mean(s, j) = separation * s;
  }
  cfg.input_probs = Eigen::VectorXd::Constant(cfg.n_inputs, 1.0 / cfg.n_inputs);
  cfg.n_units = n_units;
  return cfg;
}

SyntheticResult generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  const int d_y = config.obs_dim();

  SyntheticResult res;
  for (int j = 1; j <= d_y; ++j) res.data.sensor_names.push_back("s_" + std::to_string(j));
  res.data.op_setting_names.push_back("op_1");

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int unit = 0; unit < config.n_units; ++unit) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(unit));
    std::vector<int> states, inputs;

    auto draw_categorical = [&](const Eigen::VectorXd& p) {
      std::discrete_distribution<int> d(p.data(), p.data() + p.size());
      return d(rng);
    };

    int u0 = draw_categorical(config.input_probs);
    int x = draw_categorical(config.pi);
    states.push_back(x);
    inputs.push_back(u0);
    while (x != config.failure_state) {
      int u = draw_categorical(config.input_probs);
      if (static_cast<int>(states.size()) + 1 >= config.max_horizon) {
        x = config.failure_state;  // horizon guard keeps every run finite
      } else {
        x = draw_categorical(config.transition[u].row(states.back()).transpose());
      }
      states.push_back(x);
      inputs.push_back(u);
    }

    const int T = static_cast<int>(states.size());
    UnitTrajectory traj;
    traj.unit_id = unit + 1;
    traj.sensors.resize(T, d_y);
    traj.op_settings.resize(T, 1);
    traj.input_symbols.resize(T);
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < d_y; ++j) {
        traj.sensors(t, j) = config.emission_mean(states[t], j) +
                             std::sqrt(config.emission_var(states[t], j)) * gauss(rng);
      }
      traj.op_settings(t, 0) = static_cast<double>(inputs[t]);
      traj.input_symbols[t] = inputs[t];
    }
    res.data.units.push_back(std::move(traj));
    res.hidden_states.push_back(std::move(states));
  }
  res.data.validate();
  return res;
}

}  // namespace srla
