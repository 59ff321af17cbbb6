#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "srla/dataset.hpp"
#include "srla/env.hpp"

namespace srla {

// Cost bounds for the two-action maintenance problem.
//   imc: replace every unit one cycle before failure -> N*c_r / sum(T_j - 1)
//   cmc: run every unit to failure                   -> N*(c_r+c_f) / sum(T_j)
double imc(const RunToFailureDataset& data, double c_r);
double cmc(const RunToFailureDataset& data, double c_r, double c_f);

// Decision rule evaluated against the environment.  begin_episode() is called
// once per unit before the first act(); act() sees the current state and may
// consult the env for ground truth available to training-time oracles.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode() {}
  virtual Action act(const MaintenanceEnv& env, const EnvState& state) = 0;
};

struct MetricsReport {
  double q_star_avg = 0.0;  // fleet maintenance cost per achieved cycle
  double imc = 0.0;
  double cmc = 0.0;
  double imc_over_q = 0.0;
  double failure_pct = 0.0;
  double avg_remaining_cycles = 0.0;  // non-failed units only; 0.0 when none qualify
  double empirical_return_avg = 0.0;  // mean |discounted episode return|
  int n_units = 0;
  int n_failed = 0;
};

// Runs the policy once over every unit of the env's dataset, from cycle 1.
// q_star_avg aggregates as total incurred cost over total achieved cycles, so
// the one-cycle-early policy lands exactly on imc and always-hold exactly on
// cmc.  A policy exception aborts the pass naming the offending unit.
MetricsReport evaluate_policy(MaintenanceEnv& env, Policy& policy, double gamma = 0.95);

// CSV with one row per report, Table-style column order.
void write_metrics_csv(const std::filesystem::path& file, const std::vector<std::string>& row_labels,
                       const std::vector<MetricsReport>& rows);

}  // namespace srla
