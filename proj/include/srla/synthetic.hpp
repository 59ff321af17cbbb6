#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "srla/dataset.hpp"

namespace srla {

// Degradation-chain generator.  Hidden state follows per-input transition
// matrices until it enters the absorbing failure state; the entry cycle is the
// unit's failure cycle T.  Observations are diagonal Gaussians per state.
struct SyntheticConfig {
  int n_states = 0;
  int n_inputs = 1;
  int failure_state = -1;            // must be absorbing under every input
  Eigen::VectorXd pi;                // initial distribution, no mass on failure
  std::vector<Eigen::MatrixXd> transition;  // n_inputs matrices, N x N row-stochastic
  Eigen::MatrixXd emission_mean;     // N x d_y
  Eigen::MatrixXd emission_var;      // N x d_y, strictly positive
  Eigen::VectorXd input_probs;       // iid per-cycle input distribution
  int n_units = 0;
  int max_horizon = 100000;          // failure is forced if not reached by then

  int obs_dim() const { return static_cast<int>(emission_mean.cols()); }
  void validate() const;

  // Chain 0 -> 1 -> ... -> failure (last state).  forward_probs_per_input[u][s]
  // is the advance probability from transient state s under input u; state
  // means are spaced `separation` apart per dimension.
  static SyntheticConfig left_to_right(const std::vector<Eigen::VectorXd>& forward_probs_per_input,
                                       int d_y, double separation, double noise_var, int n_units);
};

struct SyntheticResult {
  RunToFailureDataset data;
  std::vector<std::vector<int>> hidden_states;  // ground truth per unit, size T each
};

SyntheticResult generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace srla
