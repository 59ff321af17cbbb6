#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "srla/dataset.hpp"
#include "srla/pipeline.hpp"

namespace srla {

enum class Action { hold = 0, replace = 1, repair = 2 };

struct EnvConfig {
  double c_r = 100.0;   // replacement cost, must be positive
  double c_f = 1000.0;  // additional failure penalty, non-negative
  bool enable_repair = false;
  int repair_depth = 5;  // cycles rewound by a repair action

  void validate() const;
};

// Agent-visible snapshot of one cycle.  `obs` is the configured pipeline's
// feature vector; the raw rows are replayed bit-for-bit from the dataset.
struct EnvState {
  int unit_id = 0;
  int t = 0;  // 1-based cycle
  Eigen::VectorXd obs;
  Eigen::VectorXd sensors_raw;
  Eigen::VectorXd ops_raw;
  int input_symbol = 0;
  bool done = false;
};

struct EpisodeStats {
  bool failed = false;
  std::optional<int> replace_cycle;      // set for non-failure endings
  std::optional<int> remaining_cycles;   // T - replace_cycle, non-failure only
  double total_cost = 0.0;               // -(sum of rewards)
};

// Episodic replay over recorded run-to-failure histories.  Rewards per cycle
// t of a unit with failure cycle T:
//   hold,    t <  T:  0
//   replace, t <  T:  -c_r / T
//   any,     t == T:  -(c_r + c_f) / T   (the unit failed in service)
// Episodes end on replace or on reaching T.
class MaintenanceEnv {
 public:
  MaintenanceEnv(std::shared_ptr<const RunToFailureDataset> data, EnvConfig config,
                 std::shared_ptr<FeaturePipeline> pipeline, std::uint64_t seed);

  EnvState reset();                 // uniform-random unit
  EnvState reset_to_unit(int idx);  // deterministic unit, used by evaluation

  struct StepResult {
    EnvState state;
    double reward = 0.0;
    bool done = false;
  };
  StepResult step(Action action);  // stepping a finished episode raises

  int obs_dim() const { return pipeline_->dim(); }
  int n_units() const { return static_cast<int>(data_->units.size()); }
  const RunToFailureDataset& data() const { return *data_; }
  const UnitTrajectory& current_unit() const;
  int current_failure_cycle() const;  // T of the active unit (oracle/eval use only)
  const EnvConfig& config() const { return config_; }
  FeaturePipeline& pipeline() { return *pipeline_; }

  const std::vector<double>& episode_rewards() const { return rewards_; }
  EpisodeStats stats() const;  // for the finished or running episode so far

 private:
  EnvState make_state(bool done) const;

  std::shared_ptr<const RunToFailureDataset> data_;
  EnvConfig config_;
  std::shared_ptr<FeaturePipeline> pipeline_;
  std::mt19937_64 rng_;
  int unit_idx_ = -1;
  int t_ = 0;
  bool done_ = true;
  bool failed_ = false;
  std::vector<double> rewards_;
};

// CSV: unit, t, action, reward, done.
struct TraceRow {
  int unit_id;
  int t;
  Action action;
  double reward;
  bool done;
};
void write_trace_csv(const std::filesystem::path& file, const std::vector<TraceRow>& rows);

}  // namespace srla
