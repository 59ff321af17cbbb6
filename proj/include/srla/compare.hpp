#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srla/agent.hpp"
#include "srla/dataset.hpp"
#include "srla/metrics.hpp"
#include "srla/pipeline.hpp"

namespace srla {

// Everything one comparison or sweep run needs; a frozen copy is written next
// to the outputs so any row can be re-run from its artifacts.
struct ComparisonConfig {
  std::vector<SystemMode> systems = {SystemMode::raw, SystemMode::raw_plus_ops, SystemMode::hmm_gamma,
                                     SystemMode::iohmm_gamma, SystemMode::srla_raw};
  double train_ratio = 0.6;
  int n_states = 10;
  EnvConfig env{};
  AgentConfig agent{};
  EmConfig em{};
  SpecializedConfig specialized{};
  double p_fail_threshold = 0.5;
  BcConfig bc{};
  int expert_margin = 10;
  std::uint64_t seed = 0;
};

struct SystemResult {
  std::string label;
  bool ok = false;
  std::string error;  // failure class and message when !ok
  MetricsReport report{};
  int train_episodes = 0;
  bool train_converged = false;
  double bc_train_agreement = 0.0;    // gated system only
  double bc_holdout_agreement = 0.0;  // gated system only
  std::optional<StateAnnotation> annotation;
  std::vector<GateRecord> gate_log;
};

struct ComparisonResult {
  std::vector<SystemResult> rows;
  std::vector<int> train_unit_ids;
  std::vector<int> test_unit_ids;
  double imc = 0.0;  // test-split bounds shared by all rows
  double cmc = 0.0;
};

// Trains and evaluates every requested system on one shared train/test unit
// split.  A single system's failure is recorded in its row; the run continues.
ComparisonResult run_comparison(const RunToFailureDataset& data, const ComparisonConfig& config);

enum class SweepParam { fail_cost, n_states };
const char* sweep_param_name(SweepParam p);
SweepParam parse_sweep_param(const std::string& name);

struct SweepRow {
  double value = 0.0;
  SystemResult result;
  double imc = 0.0;
  double cmc = 0.0;
};

// Re-runs one system (the first entry of config.systems) across parameter
// values, reusing fitted models where the parameter does not affect them.
std::vector<SweepRow> run_sweep(const RunToFailureDataset& data, const ComparisonConfig& config,
                                SweepParam param, const std::vector<double>& values);

void write_comparison_csv(const std::filesystem::path& file, const ComparisonResult& result);
void write_sweep_csv(const std::filesystem::path& file, SweepParam param, const std::vector<SweepRow>& rows);

}  // namespace srla
