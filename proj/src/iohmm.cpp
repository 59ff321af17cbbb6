#include "srla/iohmm.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Sequence {
  std::vector<int> inputs;
  Eigen::MatrixXd obs;  // T x d
};

void check_sequence(const IohmmParams& params, const std::vector<int>& inputs, const Eigen::MatrixXd& obs) {
  if (obs.rows() == 0) fail("InvalidArgument", "empty observation sequence");
  if (static_cast<int>(inputs.size()) != obs.rows()) {
    fail("DimensionMismatch", cat("input length ", inputs.size(), " != observation length ", obs.rows()));
  }
  if (obs.cols() != params.obs_dim()) {
    fail("DimensionMismatch", cat("observation dimension ", obs.cols(), " != model dimension ", params.obs_dim()));
  }
  for (int u : inputs) {
    if (u < 0 || u >= params.n_inputs) fail("InvalidArgument", cat("input symbol ", u, " out of range"));
  }
}

// T x N matrix of per-state emission log densities.
Eigen::MatrixXd emission_log_densities(const IohmmParams& params, const std::vector<int>& inputs,
                                       const Eigen::MatrixXd& obs) {
  const int T = static_cast<int>(obs.rows());
  Eigen::MatrixXd logb(T, params.n_states);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < params.n_states; ++i) {
      logb(t, i) = params.emis[i][inputs[t]].log_density(obs.row(t).transpose());
    }
  }
  return logb;
}

// Scaled forward-backward.  Each step shifts emission densities by their
// row max before exponentiating, so even extremely unlikely observations
// stay in range; a zero normalizer means the sequence is impossible under
// the model and raises NumericalError.
struct ForwardBackward {
  Eigen::MatrixXd alpha_hat;  // T x N filtered/scaled forward variables
  Eigen::MatrixXd beta_hat;   // T x N scaled backward variables
  Eigen::MatrixXd bshift;     // T x N exp(logb - m_t)
  Eigen::VectorXd m;          // per-step shift
  Eigen::VectorXd cshift;     // per-step normalizer in shifted space
  Eigen::VectorXd log_scale;  // log c_t = log cshift + m
  double ll = 0.0;
};

ForwardBackward forward_backward(const IohmmParams& params, const std::vector<int>& inputs,
                                 const Eigen::MatrixXd& obs, bool need_backward) {
  check_sequence(params, inputs, obs);
  const int T = static_cast<int>(obs.rows());
  const int N = params.n_states;

  ForwardBackward fb;
  Eigen::MatrixXd logb = emission_log_densities(params, inputs, obs);
  fb.alpha_hat.resize(T, N);
  fb.bshift.resize(T, N);
  fb.m.resize(T);
  fb.cshift.resize(T);
  fb.log_scale.resize(T);

  for (int t = 0; t < T; ++t) {
    fb.m(t) = logb.row(t).maxCoeff();
    if (!std::isfinite(fb.m(t))) fail("NumericalError", cat("non-finite emission density at step ", t + 1));
    fb.bshift.row(t) = (logb.row(t).array() - fb.m(t)).exp();
  }

  Eigen::VectorXd a = params.pi.array() * fb.bshift.row(0).transpose().array();
  double c = a.sum();
  if (!(c > 0.0) || !std::isfinite(c)) fail("NumericalError", "forward pass underflow at step 1");
  fb.alpha_hat.row(0) = (a / c).transpose();
  fb.cshift(0) = c;
  fb.log_scale(0) = std::log(c) + fb.m(0);

  for (int t = 1; t < T; ++t) {
    Eigen::VectorXd pred = params.trans[inputs[t]].transpose() * fb.alpha_hat.row(t - 1).transpose();
    a = pred.array() * fb.bshift.row(t).transpose().array();
    c = a.sum();
    if (!(c > 0.0) || !std::isfinite(c)) fail("NumericalError", cat("forward pass underflow at step ", t + 1));
    fb.alpha_hat.row(t) = (a / c).transpose();
    fb.cshift(t) = c;
    fb.log_scale(t) = std::log(c) + fb.m(t);
  }
  fb.ll = fb.log_scale.sum();

  if (need_backward) {
    fb.beta_hat.resize(T, N);
    fb.beta_hat.row(T - 1).setOnes();
    for (int t = T - 2; t >= 0; --t) {
      Eigen::VectorXd w =
          fb.bshift.row(t + 1).transpose().array() * fb.beta_hat.row(t + 1).transpose().array();
      fb.beta_hat.row(t) = (params.trans[inputs[t + 1]] * w).transpose() / fb.cshift(t + 1);
    }
  }
  return fb;
}

}  // namespace

double GaussianDiag::log_density(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  double acc = 0.0;
  for (int k = 0; k < mean.size(); ++k) {
    const double d = y(k) - mean(k);
    acc += std::log(var(k)) + d * d / var(k);
  }
  return -0.5 * (acc + kLog2Pi * static_cast<double>(mean.size()));
}

int IohmmParams::obs_dim() const {
  if (emis.empty() || emis.front().empty()) return 0;
  return static_cast<int>(emis.front().front().mean.size());
}

void IohmmParams::validate() const {
  if (n_states < 2) fail("InvariantViolation", cat("need at least 2 states, have ", n_states));
  if (n_inputs < 1) fail("InvariantViolation", "need at least 1 input symbol");
  if (pi.size() != n_states) fail("InvariantViolation", "initial distribution size mismatch");
  if (std::abs(pi.sum() - 1.0) > kStochasticTol || pi.minCoeff() < 0.0) {
    fail("InvariantViolation", "initial distribution is not a probability vector");
  }
  if (static_cast<int>(trans.size()) != n_inputs) fail("InvariantViolation", "transition matrix count mismatch");
  for (int u = 0; u < n_inputs; ++u) {
    if (trans[u].rows() != n_states || trans[u].cols() != n_states) {
      fail("InvariantViolation", cat("transition matrix for input ", u, " has wrong shape"));
    }
    for (int i = 0; i < n_states; ++i) {
      if (std::abs(trans[u].row(i).sum() - 1.0) > kStochasticTol || trans[u].row(i).minCoeff() < 0.0) {
        fail("InvariantViolation", cat("transition row ", i, " for input ", u, " is not row-stochastic"));
      }
    }
  }
  if (static_cast<int>(emis.size()) != n_states) fail("InvariantViolation", "emission table state count mismatch");
  const int d = obs_dim();
  if (d < 1) fail("InvariantViolation", "empty emission model");
  for (int i = 0; i < n_states; ++i) {
    if (static_cast<int>(emis[i].size()) != n_inputs) {
      fail("InvariantViolation", cat("emission table for state ", i, " has wrong input count"));
    }
    for (int u = 0; u < n_inputs; ++u) {
      const auto& g = emis[i][u];
      if (g.mean.size() != d || g.var.size() != d) {
        fail("InvariantViolation", cat("emission cell (", i, ",", u, ") has wrong dimension"));
      }
      if (!g.mean.allFinite() || !g.var.allFinite()) {
        fail("InvariantViolation", cat("emission cell (", i, ",", u, ") has non-finite parameters"));
      }
      if (g.var.minCoeff() < kVarFloor - 1e-15) {
        fail("InvariantViolation", cat("emission cell (", i, ",", u, ") violates variance floor"));
      }
    }
  }
}

PosteriorSequence posterior_gamma(const IohmmParams& params, const std::vector<int>& inputs,
                                  const Eigen::MatrixXd& obs) {
  ForwardBackward fb = forward_backward(params, inputs, obs, true);
  PosteriorSequence out;
  out.gamma = fb.alpha_hat.cwiseProduct(fb.beta_hat);
  out.log_scale = fb.log_scale;
  out.log_likelihood = fb.ll;
  return out;
}

double log_likelihood(const IohmmParams& params, const std::vector<int>& inputs, const Eigen::MatrixXd& obs) {
  return forward_backward(params, inputs, obs, false).ll;
}

ViterbiPath viterbi(const IohmmParams& params, const std::vector<int>& inputs, const Eigen::MatrixXd& obs) {
  check_sequence(params, inputs, obs);
  const int T = static_cast<int>(obs.rows());
  const int N = params.n_states;
  Eigen::MatrixXd logb = emission_log_densities(params, inputs, obs);

  Eigen::MatrixXd delta(T, N);
  Eigen::MatrixXi back(T, N);
  for (int i = 0; i < N; ++i) {
    delta(0, i) = (params.pi(i) > 0.0 ? std::log(params.pi(i)) : kNegInf) + logb(0, i);
  }
  back.row(0).setZero();

  for (int t = 1; t < T; ++t) {
    const Eigen::MatrixXd& A = params.trans[inputs[t]];
    for (int j = 0; j < N; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (int i = 0; i < N; ++i) {
        const double cand = delta(t - 1, i) + (A(i, j) > 0.0 ? std::log(A(i, j)) : kNegInf);
        if (cand > best) {  // strict: ties keep the lowest predecessor index
          best = cand;
          arg = i;
        }
      }
      delta(t, j) = best + logb(t, j);
      back(t, j) = arg;
    }
  }

  ViterbiPath path;
  path.states.resize(T);
  int arg = 0;
  double best = delta(T - 1, 0);
  for (int j = 1; j < N; ++j) {
    if (delta(T - 1, j) > best) {
      best = delta(T - 1, j);
      arg = j;
    }
  }
  if (!std::isfinite(best)) fail("NumericalError", "no feasible state path for this sequence");
  path.log_prob = best;
  path.states[T - 1] = arg;
  for (int t = T - 1; t > 0; --t) path.states[t - 1] = back(t, path.states[t]);
  return path;
}

double sequence_log_prob(const IohmmParams& params, const std::vector<int>& states,
                         const std::vector<int>& inputs, const Eigen::MatrixXd& obs) {
  check_sequence(params, inputs, obs);
  if (states.size() != inputs.size()) fail("DimensionMismatch", "state sequence length mismatch");
  for (int s : states) {
    if (s < 0 || s >= params.n_states) fail("InvalidArgument", cat("state ", s, " out of range"));
  }
  const int T = static_cast<int>(states.size());
  double lp = params.pi(states[0]) > 0.0 ? std::log(params.pi(states[0])) : kNegInf;
  lp += params.emis[states[0]][inputs[0]].log_density(obs.row(0).transpose());
  for (int t = 1; t < T; ++t) {
    const double a = params.trans[inputs[t]](states[t - 1], states[t]);
    lp += a > 0.0 ? std::log(a) : kNegInf;
    lp += params.emis[states[t]][inputs[t]].log_density(obs.row(t).transpose());
  }
  return lp;
}

std::pair<int, Eigen::VectorXd> sample_next(const IohmmParams& params, int state, int input,
                                            std::mt19937_64& rng) {
  if (state < 0 || state >= params.n_states) fail("InvalidArgument", cat("state ", state, " out of range"));
  if (input < 0 || input >= params.n_inputs) fail("InvalidArgument", cat("input symbol ", input, " out of range"));
  const Eigen::MatrixXd& A = params.trans[input];
  std::vector<double> row(params.n_states);  // discrete_distribution needs contiguous values
  for (int j = 0; j < params.n_states; ++j) row[j] = A(state, j);
  std::discrete_distribution<int> dist(row.begin(), row.end());
  const int next = dist(rng);
  const auto& g = params.emis[next][input];
  Eigen::VectorXd y(g.mean.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < y.size(); ++k) y(k) = g.mean(k) + std::sqrt(g.var(k)) * gauss(rng);
  return {next, y};
}

// ---------------------------------------------------------------------------
// EM training
// ---------------------------------------------------------------------------

namespace {

std::vector<Sequence> gather_sequences(const RunToFailureDataset& train) {
  std::vector<Sequence> seqs;
  for (const auto& u : train.units) {
    Sequence s;
    s.obs = u.sensors;
    s.inputs = u.input_symbols.empty() ? std::vector<int>(u.cycles(), 0) : u.input_symbols;
    seqs.push_back(std::move(s));
  }
  return seqs;
}

Eigen::MatrixXd pool_observations(const std::vector<Sequence>& seqs) {
  int total = 0;
  for (const auto& s : seqs) total += static_cast<int>(s.obs.rows());
  Eigen::MatrixXd all(total, seqs.front().obs.cols());
  int r = 0;
  for (const auto& s : seqs) {
    all.middleRows(r, static_cast<int>(s.obs.rows())) = s.obs;
    r += static_cast<int>(s.obs.rows());
  }
  return all;
}

// Lloyd k-means over pooled observations; returns per-cluster means and
// within-cluster variances (global variance where a cluster is empty).
void kmeans_moments(const Eigen::MatrixXd& all, int k, std::mt19937_64& rng, Eigen::MatrixXd& means,
                    Eigen::MatrixXd& vars) {
  const int n = static_cast<int>(all.rows());
  const int d = static_cast<int>(all.cols());
  Eigen::RowVectorXd gmean = all.colwise().mean();
  Eigen::RowVectorXd gvar = (all.rowwise() - gmean).array().square().colwise().mean();

  means.resize(k, d);
  std::uniform_int_distribution<int> pick(0, n - 1);
  Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::max());
  means.row(0) = all.row(pick(rng));
  for (int c = 1; c < k; ++c) {
    for (int r = 0; r < n; ++r) d2(r) = std::min(d2(r), (all.row(r) - means.row(c - 1)).squaredNorm());
    std::discrete_distribution<int> far(d2.data(), d2.data() + n);
    means.row(c) = all.row(far(rng));
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (int r = 0; r < n; ++r) {
      int best = 0;
      double bd = (all.row(r) - means.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double dd = (all.row(r) - means.row(c)).squaredNorm();
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      if (assign[r] != best) {
        assign[r] = best;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (int r = 0; r < n; ++r) {
      sums.row(assign[r]) += all.row(r);
      counts(assign[r]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) means.row(c) = sums.row(c) / counts(c);
    }
    if (!changed && iter > 0) break;
  }

  vars.resize(k, d);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(k, d);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (int r = 0; r < n; ++r) {
    sq.row(assign[r]) += (all.row(r) - means.row(assign[r])).array().square().matrix();
    counts(assign[r]) += 1.0;
  }
  for (int c = 0; c < k; ++c) {
    vars.row(c) = counts(c) > 1 ? (sq.row(c) / counts(c)).eval() : gvar;
    for (int j = 0; j < d; ++j) vars(c, j) = std::max(vars(c, j), IohmmParams::kVarFloor);
  }
}

IohmmParams init_params(const std::vector<Sequence>& seqs, int n_states, int n_inputs,
                        EmConfig::Init init, std::mt19937_64& rng) {
  Eigen::MatrixXd all = pool_observations(seqs);
  const int d = static_cast<int>(all.cols());

  Eigen::MatrixXd means, vars;
  if (init == EmConfig::Init::kmeans) {
    kmeans_moments(all, n_states, rng, means, vars);
  } else {
    Eigen::RowVectorXd gmean = all.colwise().mean();
    Eigen::RowVectorXd gvar = (all.rowwise() - gmean).array().square().colwise().mean();
    means.resize(n_states, d);
    vars.resize(n_states, d);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(all.rows()) - 1);
    for (int i = 0; i < n_states; ++i) {
      means.row(i) = all.row(pick(rng));
      for (int j = 0; j < d; ++j) vars(i, j) = std::max(gvar(j), IohmmParams::kVarFloor);
    }
  }

  IohmmParams p;
  p.n_states = n_states;
  p.n_inputs = n_inputs;
  p.pi = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
  std::uniform_real_distribution<double> jitter(0.0, 0.05);
  for (int u = 0; u < n_inputs; ++u) {
    Eigen::MatrixXd A(n_states, n_states);
    for (int i = 0; i < n_states; ++i) {
      for (int j = 0; j < n_states; ++j) A(i, j) = 1.0 + jitter(rng);
      A.row(i) /= A.row(i).sum();
    }
    p.trans.push_back(A);
  }
  p.emis.assign(n_states, std::vector<GaussianDiag>(n_inputs));
  for (int i = 0; i < n_states; ++i) {
    for (int u = 0; u < n_inputs; ++u) {
      p.emis[i][u].mean = means.row(i).transpose();
      p.emis[i][u].var = vars.row(i).transpose();
    }
  }
  return p;
}

struct RestartOutcome {
  IohmmParams params;
  std::vector<double> ll_trace;
  bool converged = false;
};

RestartOutcome run_restart(const std::vector<Sequence>& seqs, int n_states, int n_inputs,
                           const EmConfig& config, std::uint64_t restart_seed) {
  auto rng = make_rng(config.seed, restart_seed);
  IohmmParams params = init_params(seqs, n_states, n_inputs, config.init, rng);
  params.validate();

  const int N = n_states;
  const int K = n_inputs;
  const int d = params.obs_dim();
  const double kappa = config.transition_smoothing;

  RestartOutcome out;
  double prev_ll = kNegInf;
  int epoch = 0;
  while (true) {
    // E-step: accumulate expected counts under the current parameters.
    Eigen::VectorXd pi_counts = Eigen::VectorXd::Zero(N);
    std::vector<Eigen::MatrixXd> trans_counts(K, Eigen::MatrixXd::Zero(N, N));
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(N, K);
    std::vector<Eigen::MatrixXd> sum_y(K, Eigen::MatrixXd::Zero(N, d));
    std::vector<Eigen::MatrixXd> sum_y2(K, Eigen::MatrixXd::Zero(N, d));

    double total_ll = 0.0;
    for (const auto& seq : seqs) {
      ForwardBackward fb = forward_backward(params, seq.inputs, seq.obs, true);
      total_ll += fb.ll;
      const int T = static_cast<int>(seq.obs.rows());
      Eigen::MatrixXd gamma = fb.alpha_hat.cwiseProduct(fb.beta_hat);

      pi_counts += gamma.row(0).transpose();
      for (int t = 0; t < T; ++t) {
        const int u = seq.inputs[t];
        for (int i = 0; i < N; ++i) {
          const double g = gamma(t, i);
          if (g <= 0.0) continue;
          w(i, u) += g;
          sum_y[u].row(i) += g * seq.obs.row(t);
          sum_y2[u].row(i) += g * seq.obs.row(t).array().square().matrix();
        }
      }
      for (int t = 0; t + 1 < T; ++t) {
        const int u = seq.inputs[t + 1];
        Eigen::VectorXd rhs = fb.bshift.row(t + 1).transpose().array() *
                              fb.beta_hat.row(t + 1).transpose().array() / fb.cshift(t + 1);
        trans_counts[u] += params.trans[u].cwiseProduct(fb.alpha_hat.row(t).transpose() * rhs.transpose());
      }
    }
    if (!std::isfinite(total_ll)) fail("NumericalError", "non-finite log-likelihood during EM");

    out.ll_trace.push_back(total_ll);
    if (epoch > 0 && total_ll - prev_ll < config.tol) {
      out.converged = true;
      break;
    }
    prev_ll = total_ll;
    if (++epoch >= config.max_epochs) break;

    // M-step.  Smoothing pseudo-counts are anchored at the current parameters,
    // which keeps the update a generalized EM step: the log-likelihood trace
    // cannot decrease, and zero-count rows keep their previous values.
    {
      Eigen::VectorXd p = pi_counts + kappa * params.pi;
      params.pi = p / p.sum();
    }
    for (int u = 0; u < K; ++u) {
      for (int i = 0; i < N; ++i) {
        Eigen::VectorXd row = trans_counts[u].row(i).transpose() + kappa * params.trans[u].row(i).transpose();
        params.trans[u].row(i) = (row / row.sum()).transpose();
      }
    }
    for (int i = 0; i < N; ++i) {
      for (int u = 0; u < K; ++u) {
        const double wi = w(i, u);
        if (wi < 1e-12) continue;  // no posterior mass: keep previous cell
        Eigen::VectorXd mean = sum_y[u].row(i).transpose() / wi;
        Eigen::VectorXd var = sum_y2[u].row(i).transpose() / wi - mean.array().square().matrix();
        for (int j = 0; j < d; ++j) var(j) = std::max(var(j), IohmmParams::kVarFloor);
        params.emis[i][u].mean = std::move(mean);
        params.emis[i][u].var = std::move(var);
      }
    }
    if (config.validate_each_epoch) params.validate();
  }

  params.validate();
  out.params = std::move(params);
  return out;
}

}  // namespace

EmFitResult fit_em(const RunToFailureDataset& train, int n_states, const EmConfig& config) {
  if (train.units.empty()) fail("InvalidArgument", "cannot fit on an empty dataset");
  if (n_states < 2) fail("InvalidArgument", cat("need at least 2 states, requested ", n_states));
  if (static_cast<std::size_t>(n_states) > train.total_cycles()) {
    fail("InvalidArgument",
         cat("requested ", n_states, " states but the data holds only ", train.total_cycles(), " cycles"));
  }
  if (config.n_restarts < 1) fail("InvalidArgument", "need at least 1 restart");
  if (config.tol <= 0.0 || config.max_epochs < 1) fail("InvalidArgument", "bad EM stopping configuration");

  std::vector<Sequence> seqs = gather_sequences(train);
  int n_inputs = config.n_inputs > 0 ? config.n_inputs : train.input_alphabet_size();
  for (const auto& s : seqs) {
    for (int u : s.inputs) {
      if (u >= n_inputs) fail("InvalidArgument", cat("input symbol ", u, " outside alphabet of size ", n_inputs));
    }
  }

  std::vector<std::future<RestartOutcome>> jobs;
  for (int r = 0; r < config.n_restarts; ++r) {
    jobs.push_back(std::async(std::launch::async, [&, r] {
      return run_restart(seqs, n_states, n_inputs, config, static_cast<std::uint64_t>(r));
    }));
  }

  std::vector<RestartOutcome> outcomes;
  std::exception_ptr first_error;
  for (auto& j : jobs) {
    try {
      outcomes.push_back(j.get());
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
      outcomes.push_back({});
      outcomes.back().ll_trace.push_back(kNegInf);
    }
  }

  int best = -1;
  for (int r = 0; r < static_cast<int>(outcomes.size()); ++r) {
    const double ll = outcomes[r].ll_trace.back();
    if (!std::isfinite(ll)) continue;
    if (best < 0 || ll > outcomes[best].ll_trace.back()) best = r;  // ties keep lower index
  }
  if (best < 0) {
    if (first_error) std::rethrow_exception(first_error);
    fail("NumericalError", "all EM restarts failed");
  }

  EmFitResult res;
  res.params = std::move(outcomes[best].params);
  res.ll_trace = std::move(outcomes[best].ll_trace);
  res.best_restart = best;
  res.converged = outcomes[best].converged;
  return res;
}

// ---------------------------------------------------------------------------
// Incremental prefix decoding
// ---------------------------------------------------------------------------

PrefixDecoder::PrefixDecoder(const IohmmParams& params) : params_(&params) { reset(); }

void PrefixDecoder::reset() {
  delta_ = Eigen::VectorXd::Constant(params_->n_states, kNegInf);
  alpha_ = Eigen::VectorXd::Zero(params_->n_states);
  ll_ = 0.0;
  length_ = 0;
}

void PrefixDecoder::push(int input, const Eigen::Ref<const Eigen::VectorXd>& obs) {
  if (input < 0 || input >= params_->n_inputs) fail("InvalidArgument", cat("input symbol ", input, " out of range"));
  if (obs.size() != params_->obs_dim()) fail("DimensionMismatch", "observation dimension mismatch");
  const int N = params_->n_states;

  Eigen::VectorXd logb(N);
  for (int i = 0; i < N; ++i) logb(i) = params_->emis[i][input].log_density(obs);
  const double m = logb.maxCoeff();
  Eigen::VectorXd bshift = (logb.array() - m).exp();

  if (length_ == 0) {
    for (int i = 0; i < N; ++i) {
      delta_(i) = (params_->pi(i) > 0.0 ? std::log(params_->pi(i)) : kNegInf) + logb(i);
    }
    Eigen::VectorXd a = params_->pi.array() * bshift.array();
    const double c = a.sum();
    if (!(c > 0.0) || !std::isfinite(c)) fail("NumericalError", "filter underflow at step 1");
    alpha_ = a / c;
    ll_ = std::log(c) + m;
  } else {
    const Eigen::MatrixXd& A = params_->trans[input];
    Eigen::VectorXd next_delta(N);
    for (int j = 0; j < N; ++j) {
      double bestv = kNegInf;
      for (int i = 0; i < N; ++i) {
        const double cand = delta_(i) + (A(i, j) > 0.0 ? std::log(A(i, j)) : kNegInf);
        if (cand > bestv) bestv = cand;
      }
      next_delta(j) = bestv + logb(j);
    }
    delta_ = next_delta;
    Eigen::VectorXd a = (A.transpose() * alpha_).array() * bshift.array();
    const double c = a.sum();
    if (!(c > 0.0) || !std::isfinite(c)) fail("NumericalError", cat("filter underflow at step ", length_ + 1));
    alpha_ = a / c;
    ll_ += std::log(c) + m;
  }
  ++length_;
}

int PrefixDecoder::map_state() const {
  if (length_ == 0) fail("InvalidArgument", "decoder has consumed no observations");
  int arg = 0;
  double best = delta_(0);
  for (int i = 1; i < delta_.size(); ++i) {
    if (delta_(i) > best) {
      best = delta_(i);
      arg = i;
    }
  }
  return arg;
}

const Eigen::VectorXd& PrefixDecoder::filtered() const {
  if (length_ == 0) fail("InvalidArgument", "decoder has consumed no observations");
  return alpha_;
}

}  // namespace srla
