#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <vector>

#include "srla/dataset.hpp"
#include "srla/iohmm.hpp"

namespace srla {

struct RulConfig {
  int n_rollouts = 100;
  int horizon_cap = 500;  // rollouts still running here are recorded as truncated
  enum class InputPolicy { hold_last, empirical } input_policy = InputPolicy::hold_last;
  std::uint64_t seed = 0;
};

struct RulEstimate {
  int cycle = 0;  // prefix length the estimate conditions on
  double mean_rul = 0.0;
  double std_rul = 0.0;
  int n_rollouts = 0;
  double truncated_fraction = 0.0;
};

// Monte-Carlo remaining-useful-life estimate: decodes the prefix, then samples
// state chains from the last Viterbi state until a failure state is entered,
// counting transitions.  Rollouts use independent derived seeds and a
// compensated mean so the reduction is order-independent.
RulEstimate estimate_rul(const IohmmParams& params, const std::vector<int>& prefix_inputs,
                         const Eigen::MatrixXd& prefix_obs, const std::set<int>& failure_states,
                         const RulConfig& config);

// Estimates at cycles 1, 1+stride, 1+2*stride, ... <= T of one unit.
std::vector<RulEstimate> rul_trend(const IohmmParams& params, const UnitTrajectory& unit, int stride,
                                   const std::set<int>& failure_states, const RulConfig& config);

// CSV: unit, cycle, mean_rul, std_rul, truncated_fraction.
void write_rul_csv(const std::filesystem::path& file, int unit_id, const std::vector<RulEstimate>& trend);

}  // namespace srla
