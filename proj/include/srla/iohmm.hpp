#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "srla/dataset.hpp"

namespace srla {

// Diagonal Gaussian observation model for one (state, input) cell.
struct GaussianDiag {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& y) const;
};

// Input-conditioned hidden Markov model: transitions and emissions both switch
// on a discrete input symbol.  A plain HMM is the n_inputs == 1 case.
struct IohmmParams {
  static constexpr double kVarFloor = 1e-6;
  static constexpr double kStochasticTol = 1e-9;

  int n_states = 0;
  int n_inputs = 0;
  Eigen::VectorXd pi;                        // initial state distribution
  std::vector<Eigen::MatrixXd> trans;        // per input, N x N rows P(x_t | x_{t-1}, u_t)
  std::vector<std::vector<GaussianDiag>> emis;  // [state][input]

  int obs_dim() const;
  // Row sums within kStochasticTol of 1, variances >= kVarFloor, shapes consistent.
  void validate() const;
};

struct PosteriorSequence {
  Eigen::MatrixXd gamma;      // T x N smoothed state posteriors, rows sum to 1
  Eigen::VectorXd log_scale;  // per-step log normalizers; sum == log_likelihood
  double log_likelihood = 0.0;
};

struct ViterbiPath {
  std::vector<int> states;
  double log_prob = 0.0;  // joint log p(states, Y | U); ties broken toward lower index
};

PosteriorSequence posterior_gamma(const IohmmParams& params, const std::vector<int>& inputs,
                                  const Eigen::MatrixXd& obs);
ViterbiPath viterbi(const IohmmParams& params, const std::vector<int>& inputs, const Eigen::MatrixXd& obs);
double log_likelihood(const IohmmParams& params, const std::vector<int>& inputs, const Eigen::MatrixXd& obs);
// Joint log p(states, Y | U) of an explicit state sequence; -inf if impossible.
double sequence_log_prob(const IohmmParams& params, const std::vector<int>& states,
                         const std::vector<int>& inputs, const Eigen::MatrixXd& obs);

// One-step ancestral sampling: next state from trans[input].row(state), then
// an observation from the (next_state, input) Gaussian.
std::pair<int, Eigen::VectorXd> sample_next(const IohmmParams& params, int state, int input,
                                            std::mt19937_64& rng);

struct EmConfig {
  double tol = 1e-5;            // stop when absolute log-likelihood gain < tol
  int max_epochs = 1000;
  int n_restarts = 3;
  std::uint64_t seed = 0;
  enum class Init { kmeans, random } init = Init::kmeans;
  double transition_smoothing = 1e-3;  // pseudo-count anchored at previous parameters
  int n_inputs = 0;                    // 0: infer alphabet size from the data
  bool validate_each_epoch = true;
};

struct EmFitResult {
  IohmmParams params;
  std::vector<double> ll_trace;  // total train log-likelihood per epoch (best restart)
  int best_restart = 0;
  bool converged = false;        // tolerance reached before the epoch cap
};

// Multi-sequence EM over all units (scaled forward-backward).  Restarts run
// concurrently on independent derived seeds; the best final log-likelihood
// wins, ties resolved toward the lowest restart index.
EmFitResult fit_em(const RunToFailureDataset& train, int n_states, const EmConfig& config);

// Filtered forward pass plus best-path tracking over a growing prefix.
// push() consumes one cycle; map_state()/filtered() reflect the prefix so far.
class PrefixDecoder {
 public:
  explicit PrefixDecoder(const IohmmParams& params);
  void reset();
  void push(int input, const Eigen::Ref<const Eigen::VectorXd>& obs);
  int length() const { return length_; }
  int map_state() const;                      // argmax best-path score, ties to lower index
  const Eigen::VectorXd& filtered() const;    // P(x_t | prefix), sums to 1
  double log_likelihood() const { return ll_; }

 private:
  const IohmmParams* params_;
  Eigen::VectorXd delta_;     // log best-path scores
  Eigen::VectorXd alpha_;     // filtered posterior
  double ll_ = 0.0;
  int length_ = 0;
};

}  // namespace srla
