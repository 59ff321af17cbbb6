#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "srla/dataset.hpp"
#include "srla/iohmm.hpp"

namespace srla {

// Input symbols for decoding: the unit's own symbols, or all zeros when the
// dataset was never discretized (plain-HMM case).
std::vector<int> unit_inputs(const UnitTrajectory& unit);

// Viterbi state at the final (failure) cycle of every training unit, deduped.
std::set<int> decode_failure_states(const IohmmParams& params, const RunToFailureDataset& train);

struct SpecializedConfig {
  enum class Mode { transition_radius, value_quantile } mode = Mode::transition_radius;
  int radius = 2;                 // graph distance to a failure state
  double edge_threshold = 1e-3;   // transition mass below this is not an edge
  double quantile = 0.25;         // fraction of lowest-value states to flag
};

// States "close to failure": either within `radius` hops of a failure state in
// the union transition graph (radius 0 == the failure set itself, monotone in
// radius), or the lowest value-quantile states.  Failure states are always
// included.
std::set<int> build_specialized_set(const IohmmParams& params, const std::set<int>& failure_states,
                                    const SpecializedConfig& config,
                                    const std::optional<Eigen::VectorXd>& state_values = std::nullopt);

struct ConditionBand {
  std::string label;
  double lo_frac = 0.0;  // normalized-time interval [lo, hi) holding the band
  double hi_frac = 1.0;
  std::vector<int> states;  // ordered by median occurrence position
};

struct ConditionMapConfig {
  std::vector<std::pair<std::string, double>> bands = {
      {"normal", 0.5},
      {"potential fault", 0.75},
      {"failure progression", 0.9},
      {"fault point", 0.99},
      {"failure", 1.0},
  };  // label -> upper bound on median normalized cycle position
  double dispersion_flag_iqr = 0.4;  // per-state occupancy spread that triggers the flag
};

struct ConditionMap {
  std::vector<ConditionBand> bands;
  bool dispersed = false;  // some state occupies non-contiguous stretches of life
  std::string label_of(int state) const;  // "unobserved" for never-decoded states
};

// Orders decoded states by the median normalized cycle position of their
// occurrences and buckets them into health bands.  Revisit patterns that make
// the ordering unreliable set `dispersed` instead of raising.
ConditionMap map_states_to_conditions(const std::vector<ViterbiPath>& paths,
                                      const std::vector<int>& unit_lengths, int n_states,
                                      const ConditionMapConfig& config = {});

double posterior_failure_mass(const Eigen::Ref<const Eigen::VectorXd>& gamma_row,
                              const std::set<int>& failure_states);

// Decode artifacts bundled with a fitted model.
struct StateAnnotation {
  int n_states = 0;
  std::set<int> failure_states;
  std::set<int> specialized;       // failure_states is always a subset
  ConditionMap conditions;
  double p_fail_threshold = 0.5;

  void validate() const;
};

StateAnnotation annotate_states(const IohmmParams& params, const RunToFailureDataset& train,
                                const SpecializedConfig& config, double p_fail_threshold = 0.5,
                                const std::optional<Eigen::VectorXd>& state_values = std::nullopt);

// Per-cycle CSV: unit, cycle, viterbi_state, condition_label.
void write_decode_csv(const std::filesystem::path& file, const RunToFailureDataset& data,
                      const std::vector<ViterbiPath>& paths, const ConditionMap& conditions);

}  // namespace srla
