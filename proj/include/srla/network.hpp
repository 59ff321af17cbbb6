#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace srla {

// Fully connected net: ReLU hidden layers, linear outputs (one per action).
// Weights initialize uniform in ±1/sqrt(fan_in).
struct FeedforwardNet {
  std::vector<Eigen::MatrixXd> W;  // layer l: out x in
  std::vector<Eigen::VectorXd> b;

  static FeedforwardNet init(int d_in, int n_actions, std::uint64_t seed,
                             const std::vector<int>& hidden = {128, 256});

  int in_dim() const { return static_cast<int>(W.front().cols()); }
  int out_dim() const { return static_cast<int>(W.back().rows()); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct Gradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
  double l2_norm() const;
  void scale(double f);
};

struct Batch {
  Eigen::MatrixXd x;           // n x d_in
  std::vector<int> action;     // selected output per row
  Eigen::VectorXd target;      // regression target for that output
};

// Mean squared error over the selected action outputs only; other outputs
// carry no gradient.
double q_loss(const FeedforwardNet& net, const Batch& batch);
std::pair<double, Gradients> q_loss_and_gradients(const FeedforwardNet& net, const Batch& batch);

struct TrainStepConfig {
  double lr = 1e-4;
  double grad_clip_norm = 10.0;  // 0 disables clipping
};

// One full-batch gradient-descent step; returns the pre-update loss.
// Non-finite targets or a non-finite post-update parameter raise.
double train_step(FeedforwardNet& net, const Batch& batch, const TrainStepConfig& config);

struct BcConfig {
  TrainStepConfig step{1e-2, 0.0};
  int epochs = 500;
  int batch_size = 32;
  double loss_tol = 1e-10;          // early stop on loss change, once agreement holds
  double agreement_target = 0.99;
  std::uint64_t seed = 0;
};

struct BcResult {
  FeedforwardNet net;
  double final_loss = 0.0;
  double agreement = 0.0;  // greedy-argmax match rate against the expert labels
  int epochs_run = 0;
};

// Behavioral cloning: regresses the per-action output vector toward a one-hot
// encoding of the expert action (loss 0.5 * ||out - onehot||^2 averaged over
// pairs), minibatch gradient descent with a seeded shuffle.
BcResult clone_behavior(FeedforwardNet net, const Eigen::MatrixXd& states,
                        const std::vector<int>& expert_actions, const BcConfig& config);

}  // namespace srla
