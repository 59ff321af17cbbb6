#include "srla/rul.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {
namespace {

int sample_row(const Eigen::MatrixXd& A, int state, std::mt19937_64& rng) {
  std::vector<double> row(A.cols());
  for (int j = 0; j < A.cols(); ++j) row[j] = A(state, j);
  std::discrete_distribution<int> dist(row.begin(), row.end());
  return dist(rng);
}

}  // namespace

RulEstimate estimate_rul(const IohmmParams& params, const std::vector<int>& prefix_inputs,
                         const Eigen::MatrixXd& prefix_obs, const std::set<int>& failure_states,
                         const RulConfig& config) {
  if (failure_states.empty()) fail("EmptyInput", "failure state set is empty");
  for (int s : failure_states) {
    if (s < 0 || s >= params.n_states) fail("InvalidArgument", cat("failure state ", s, " out of range"));
  }
  if (config.n_rollouts < 1) fail("InvalidArgument", "need at least 1 rollout");
  if (config.horizon_cap < 1) fail("InvalidArgument", "horizon cap must be positive");
  if (prefix_obs.rows() == 0) fail("InvalidArgument", "empty prefix");

  ViterbiPath path = viterbi(params, prefix_inputs, prefix_obs);
  const int start = path.states.back();

  RulEstimate est;
  est.cycle = static_cast<int>(prefix_obs.rows());
  est.n_rollouts = config.n_rollouts;
  if (failure_states.count(start)) return est;  // already at failure: RUL 0

  // Empirical input distribution over the prefix (used by the empirical policy).
  std::vector<double> input_counts(params.n_inputs, 0.0);
  for (int u : prefix_inputs) input_counts[u] += 1.0;
  const int last_input = prefix_inputs.back();

  std::vector<double> lengths(config.n_rollouts, 0.0);
  int truncated = 0;
  for (int r = 0; r < config.n_rollouts; ++r) {
    auto rng = make_rng(config.seed, static_cast<std::uint64_t>(r));
    std::discrete_distribution<int> input_dist(input_counts.begin(), input_counts.end());
    int state = start;
    int steps = 0;
    while (true) {
      const int u = config.input_policy == RulConfig::InputPolicy::hold_last ? last_input : input_dist(rng);
      state = sample_row(params.trans[u], state, rng);
      ++steps;
      if (failure_states.count(state)) break;
      if (steps >= config.horizon_cap) {
        ++truncated;
        break;
      }
    }
    lengths[r] = static_cast<double>(steps);
  }

  est.mean_rul = kahan_mean(lengths);
  if (config.n_rollouts > 1) {
    KahanSum sq;
    for (double v : lengths) sq.add((v - est.mean_rul) * (v - est.mean_rul));
    est.std_rul = std::sqrt(sq.value() / static_cast<double>(config.n_rollouts - 1));
  }
  est.truncated_fraction = static_cast<double>(truncated) / static_cast<double>(config.n_rollouts);
  return est;
}

std::vector<RulEstimate> rul_trend(const IohmmParams& params, const UnitTrajectory& unit, int stride,
                                   const std::set<int>& failure_states, const RulConfig& config) {
  if (stride < 1) fail("InvalidArgument", cat("stride must be at least 1, got ", stride));
  const std::vector<int> inputs = unit.input_symbols.empty()
                                      ? std::vector<int>(unit.cycles(), 0)
                                      : unit.input_symbols;
  std::vector<RulEstimate> trend;
  for (int c = 1; c <= unit.cycles(); c += stride) {
    RulConfig cfg = config;
    cfg.seed = config.seed ^ (static_cast<std::uint64_t>(c) * 0x9e3779b97f4a7c15ull);
    std::vector<int> prefix_inputs(inputs.begin(), inputs.begin() + c);
    trend.push_back(estimate_rul(params, prefix_inputs, unit.sensors.topRows(c), failure_states, cfg));
  }
  return trend;
}

void write_rul_csv(const std::filesystem::path& file, int unit_id, const std::vector<RulEstimate>& trend) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open for writing: ", file.string()));
  out << "unit,cycle,mean_rul,std_rul,truncated_fraction\n";
  for (const auto& e : trend) {
    out << unit_id << ',' << e.cycle << ',' << fmt_double(e.mean_rul) << ',' << fmt_double(e.std_rul)
        << ',' << fmt_double(e.truncated_fraction) << '\n';
  }
}

}  // namespace srla
