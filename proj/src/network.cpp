#include "srla/network.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {

FeedforwardNet FeedforwardNet::init(int d_in, int n_actions, std::uint64_t seed,
                                    const std::vector<int>& hidden) {
  if (d_in < 1 || n_actions < 1) fail("InvalidArgument", "network needs positive input and output sizes");
  for (int h : hidden) {
    if (h < 1) fail("InvalidArgument", "hidden layer sizes must be positive");
  }
  std::vector<int> sizes;
  sizes.push_back(d_in);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(n_actions);

  FeedforwardNet net;
  auto rng = make_rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-s, s);
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
    }
    net.W.push_back(std::move(w));
    net.b.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }
  return net;
}

std::size_t FeedforwardNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < W.size(); ++l) n += static_cast<std::size_t>(W[l].size()) + b[l].size();
  return n;
}

bool FeedforwardNet::all_finite() const {
  for (std::size_t l = 0; l < W.size(); ++l) {
    if (!W[l].allFinite() || !b[l].allFinite()) return false;
  }
  return true;
}

Eigen::VectorXd FeedforwardNet::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != in_dim()) fail("DimensionMismatch", cat("input size ", x.size(), " != ", in_dim()));
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < W.size(); ++l) {
    a = W[l] * a + b[l];
    if (l + 1 < W.size()) a = a.cwiseMax(0.0);  // ReLU on hidden layers only
  }
  return a;
}

double Gradients::l2_norm() const {
  double sq = 0.0;
  for (std::size_t l = 0; l < dW.size(); ++l) sq += dW[l].squaredNorm() + db[l].squaredNorm();
  return std::sqrt(sq);
}

void Gradients::scale(double f) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    dW[l] *= f;
    db[l] *= f;
  }
}

namespace {

// Shared forward/backward over a batch.  output_delta(row, out) receives the
// dLoss/dOutput values; returns the loss.
struct BatchWork {
  std::vector<Eigen::MatrixXd> activations;  // per layer, n x width (post-ReLU)
  Eigen::MatrixXd outputs;                   // n x n_out
};

BatchWork batch_forward(const FeedforwardNet& net, const Eigen::MatrixXd& x) {
  BatchWork work;
  Eigen::MatrixXd a = x;
  work.activations.push_back(a);
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    a = (a * net.W[l].transpose()).rowwise() + net.b[l].transpose();
    if (l + 1 < net.W.size()) {
      a = a.cwiseMax(0.0);
      work.activations.push_back(a);
    }
  }
  work.outputs = a;
  return work;
}

Gradients backprop(const FeedforwardNet& net, const BatchWork& work, Eigen::MatrixXd delta) {
  const int n = static_cast<int>(delta.rows());
  Gradients g;
  g.dW.resize(net.W.size());
  g.db.resize(net.W.size());
  for (int l = static_cast<int>(net.W.size()) - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_in = work.activations[l];
    g.dW[l] = delta.transpose() * a_in / n;
    g.db[l] = delta.colwise().sum().transpose() / n;
    if (l > 0) {
      delta = delta * net.W[l];
      delta = delta.cwiseProduct((work.activations[l].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

void check_batch(const FeedforwardNet& net, const Batch& batch) {
  const int n = static_cast<int>(batch.x.rows());
  if (n == 0) fail("InvalidArgument", "empty batch");
  if (batch.x.cols() != net.in_dim()) fail("DimensionMismatch", "batch feature size mismatch");
  if (static_cast<int>(batch.action.size()) != n || batch.target.size() != n) {
    fail("DimensionMismatch", "batch action/target count mismatch");
  }
  for (int a : batch.action) {
    if (a < 0 || a >= net.out_dim()) fail("InvalidArgument", cat("action index ", a, " out of range"));
  }
  if (!batch.target.allFinite()) fail("NumericalError", "non-finite regression target");
}

}  // namespace

double q_loss(const FeedforwardNet& net, const Batch& batch) {
  check_batch(net, batch);
  BatchWork work = batch_forward(net, batch.x);
  const int n = static_cast<int>(batch.x.rows());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = work.outputs(i, batch.action[i]) - batch.target(i);
    loss += r * r;
  }
  return loss / n;
}

std::pair<double, Gradients> q_loss_and_gradients(const FeedforwardNet& net, const Batch& batch) {
  check_batch(net, batch);
  BatchWork work = batch_forward(net, batch.x);
  const int n = static_cast<int>(batch.x.rows());
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, net.out_dim());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = work.outputs(i, batch.action[i]) - batch.target(i);
    loss += r * r;
    delta(i, batch.action[i]) = 2.0 * r;  // d/dq of (q - y)^2
  }
  return {loss / n, backprop(net, work, std::move(delta))};
}

double train_step(FeedforwardNet& net, const Batch& batch, const TrainStepConfig& config) {
  auto [loss, grads] = q_loss_and_gradients(net, batch);
  if (config.grad_clip_norm > 0.0) {
    const double norm = grads.l2_norm();
    if (norm > config.grad_clip_norm) grads.scale(config.grad_clip_norm / norm);
  }
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    net.W[l] -= config.lr * grads.dW[l];
    net.b[l] -= config.lr * grads.db[l];
  }
  if (!net.all_finite()) fail("NumericalError", "non-finite parameters after update");
  return loss;
}

BcResult clone_behavior(FeedforwardNet net, const Eigen::MatrixXd& states,
                        const std::vector<int>& expert_actions, const BcConfig& config) {
  const int n = static_cast<int>(states.rows());
  if (n == 0) fail("EmptyInput", "empty expert set");
  if (static_cast<int>(expert_actions.size()) != n) fail("DimensionMismatch", "expert action count mismatch");
  const int n_out = net.out_dim();
  for (int a : expert_actions) {
    if (a < 0 || a >= n_out) fail("InvalidArgument", cat("expert action ", a, " out of range"));
  }

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, n_out);
  for (int i = 0; i < n; ++i) onehot(i, expert_actions[i]) = 1.0;

  auto full_loss = [&]() {
    BatchWork work = batch_forward(net, states);
    return 0.5 * (work.outputs - onehot).squaredNorm() / n;
  };
  auto agreement = [&]() {
    BatchWork work = batch_forward(net, states);
    int match = 0;
    for (int i = 0; i < n; ++i) {
      int arg = 0;
      for (int c = 1; c < n_out; ++c) {
        if (work.outputs(i, c) > work.outputs(i, arg)) arg = c;
      }
      if (arg == expert_actions[i]) ++match;
    }
    return static_cast<double>(match) / n;
  };

  BcResult res;
  auto rng = make_rng(config.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  double prev_loss = full_loss();
  const int bs = std::max(1, config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += bs) {
      const int m = std::min(bs, n - start);
      Eigen::MatrixXd xb(m, states.cols());
      Eigen::MatrixXd yb(m, n_out);
      for (int i = 0; i < m; ++i) {
        xb.row(i) = states.row(order[start + i]);
        yb.row(i) = onehot.row(order[start + i]);
      }
      BatchWork work = batch_forward(net, xb);
      Eigen::MatrixXd delta = work.outputs - yb;  // d/dq of 0.5*||q - y||^2
      Gradients g = backprop(net, work, std::move(delta));
      if (config.step.grad_clip_norm > 0.0) {
        const double norm = g.l2_norm();
        if (norm > config.step.grad_clip_norm) g.scale(config.step.grad_clip_norm / norm);
      }
      for (std::size_t l = 0; l < net.W.size(); ++l) {
        net.W[l] -= config.step.lr * g.dW[l];
        net.b[l] -= config.step.lr * g.db[l];
      }
    }
    if (!net.all_finite()) fail("NumericalError", "non-finite parameters during cloning");
    res.epochs_run = epoch + 1;
    const double loss = full_loss();
    if (std::abs(prev_loss - loss) < config.loss_tol && agreement() >= config.agreement_target) {
      prev_loss = loss;
      break;
    }
    prev_loss = loss;
  }

  res.final_loss = prev_loss;
  res.net = std::move(net);
  // Recompute on the final parameters (res.net may have moved from net).
  BatchWork work = batch_forward(res.net, states);
  int match = 0;
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    for (int c = 1; c < n_out; ++c) {
      if (work.outputs(i, c) > work.outputs(i, arg)) arg = c;
    }
    if (arg == expert_actions[i]) ++match;
  }
  res.agreement = static_cast<double>(match) / n;
  return res;
}

}  // namespace srla
