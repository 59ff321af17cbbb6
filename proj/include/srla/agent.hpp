#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <vector>

#include "srla/decoding.hpp"
#include "srla/env.hpp"
#include "srla/iohmm.hpp"
#include "srla/metrics.hpp"
#include "srla/network.hpp"
#include "srla/normalizer.hpp"
#include "srla/rul.hpp"

namespace srla {

struct AgentConfig {
  double gamma = 0.95;
  TrainStepConfig step{};  // lr 1e-4, clip 10
  double epsilon0 = 0.5;
  double epsilon_decay = 0.99;  // applied once per episode
  double epsilon_floor = 0.01;
  int max_episodes = 10000;
  double loss_threshold = 1e-4;  // on the rolling-window mean episode loss
  int loss_window = 50;
  int target_refresh = 100;  // gradient steps between frozen-target snapshots
  bool replay_enabled = false;
  int replay_capacity = 10000;
  int replay_batch = 32;

  void validate() const;
};

// Epsilon-greedy over the network's outputs; exact value ties resolve to the
// lowest action index, i.e. hold.
Action act(const FeedforwardNet& q, const Eigen::Ref<const Eigen::VectorXd>& features, double epsilon,
           std::mt19937_64& rng);

// Bootstrapped regression target; terminal transitions take the reward alone.
double td_target(double reward, bool terminal, double gamma, double next_max_q);

// V(s) = max_a Q(s, a).
double state_value(const FeedforwardNet& q, const Eigen::Ref<const Eigen::VectorXd>& features);

struct TrainLogRow {
  int episode = 0;
  double loss = 0.0;  // mean squared TD error of the episode's gradient steps
  double cost = 0.0;  // -(sum of rewards)
  double epsilon = 0.0;
  bool failed = false;
  int updates = 0;
};
void write_training_log_csv(const std::filesystem::path& file, const std::vector<TrainLogRow>& rows);

// One gating decision, loggable for offline audit.
struct GateRecord {
  int unit_id = 0;
  int t = 0;
  int viterbi_state = 0;
  bool in_specialized = false;
  double p_fail = 0.0;
  Action action = Action::hold;
};
void write_gate_log_csv(const std::filesystem::path& file, const std::vector<GateRecord>& rows);
std::vector<GateRecord> read_gate_log_csv(const std::filesystem::path& file);

// Replays a gate log against the gating contract.  Returns the number of rows
// violating any of:
//   - outside the specialized set with p_fail <= threshold, action != hold
//   - p_fail > threshold, action != replace (safety net escalation)
//   - in_specialized flag inconsistent with the annotation's specialized set
int audit_gate_log(const std::vector<GateRecord>& rows, const StateAnnotation& annotation);

// Restricts learning to probabilistically identified specialized states: the
// filter decodes each observed cycle, and only in-set cycles query and update
// the network; elsewhere the default action (hold) is emitted.  The safety
// net, when enabled, escalates to replace once decoded failure mass passes
// the annotation threshold; training leaves it off so failures are observed.
struct SrlaGateConfig {
  std::shared_ptr<const IohmmParams> model;
  std::shared_ptr<const NormalizationSpec> norm;  // observation space the model was fit in
  StateAnnotation annotation;
  bool safety_net = false;
  bool force_input_zero = false;  // for input-blind models
};

struct TrainResult {
  FeedforwardNet net;
  std::vector<TrainLogRow> log;
  bool converged = false;
  int episodes = 0;
  double final_loss = 0.0;  // last rolling-window mean
};

// Online Q-learning over the environment with an epsilon-greedy behavior
// policy, frozen-target bootstrapping, and optional specialized-state gating.
// `init` seeds the network (e.g. from behavior cloning); otherwise a fresh
// network is drawn from `seed`.  Raises on numerical divergence.
TrainResult train_dqn(MaintenanceEnv& env, const AgentConfig& config, std::uint64_t seed,
                      const FeedforwardNet* init = nullptr, const SrlaGateConfig* gate = nullptr);

// Training-time oracle: replace once t >= T - margin, using the recorded
// failure cycle.  margin 1 reproduces the one-cycle-early ideal policy.
class OracleMarginExpert : public Policy {
 public:
  explicit OracleMarginExpert(int margin = 10);
  Action act(const MaintenanceEnv& env, const EnvState& state) override;

 private:
  int margin_;
};

// Deployable expert: replace once the Monte-Carlo residual-life estimate for
// the observed prefix drops to the threshold.
class RulThresholdExpert : public Policy {
 public:
  RulThresholdExpert(std::shared_ptr<const IohmmParams> model, std::shared_ptr<const NormalizationSpec> norm,
                     std::set<int> failure_states, RulConfig rul, double threshold = 10.0,
                     bool force_input_zero = false);
  void begin_episode() override;
  Action act(const MaintenanceEnv& env, const EnvState& state) override;

 private:
  std::shared_ptr<const IohmmParams> model_;
  std::shared_ptr<const NormalizationSpec> norm_;
  std::set<int> failure_states_;
  RulConfig rul_;
  double threshold_;
  bool force_input_zero_;
  std::vector<int> inputs_;
  std::vector<Eigen::VectorXd> obs_;
};

struct BcPretrainResult {
  FeedforwardNet net;
  int n_train_pairs = 0;
  int n_holdout_pairs = 0;
  double train_agreement = 0.0;
  double holdout_agreement = 0.0;
  double final_loss = 0.0;
  int epochs_run = 0;
};

// Rolls the expert once over every unit of `train_env`, collects
// (features, action) pairs up to and including the expert's terminal action,
// and clones them into a network.  Agreement is reported on the training
// pairs and, when `holdout_env` is given, on pairs from its units as well.
BcPretrainResult pretrain_bc(MaintenanceEnv& train_env, MaintenanceEnv* holdout_env, Policy& expert,
                             const BcConfig& config, int n_actions);

// Acts on the environment's own observation features with the greedy network
// action; the evaluation policy for the ungated systems.
class GreedyQPolicy : public Policy {
 public:
  explicit GreedyQPolicy(FeedforwardNet net) : net_(std::move(net)) {}
  Action act(const MaintenanceEnv& env, const EnvState& state) override;

 private:
  FeedforwardNet net_;
};

// Gated deployment policy: default hold outside the specialized set, greedy
// (or epsilon-greedy) network action inside, safety-net escalation to replace
// on high decoded failure mass.  Gate decisions accumulate in gate_log().
class SrlaPolicy : public Policy {
 public:
  SrlaPolicy(std::shared_ptr<const IohmmParams> model, std::shared_ptr<const NormalizationSpec> norm,
             StateAnnotation annotation, FeedforwardNet qnet, double epsilon, std::uint64_t seed,
             bool force_input_zero = false);

  void begin_episode() override;
  Action act(const MaintenanceEnv& env, const EnvState& state) override;

  // The gating rule on one freshly observed cycle, exposed for direct tests.
  GateRecord decide(int unit_id, int t, int input_symbol, const Eigen::Ref<const Eigen::VectorXd>& sensors_raw);

  const std::vector<GateRecord>& gate_log() const { return gate_log_; }
  void clear_gate_log() { gate_log_.clear(); }
  const StateAnnotation& annotation() const { return annotation_; }

 private:
  std::shared_ptr<const IohmmParams> model_;
  std::shared_ptr<const NormalizationSpec> norm_;
  StateAnnotation annotation_;
  FeedforwardNet qnet_;
  double epsilon_;
  std::mt19937_64 rng_;
  bool force_input_zero_;
  PrefixDecoder decoder_;
  std::vector<GateRecord> gate_log_;
};

// Mean V under the network of the cycles Viterbi-decoded into each hidden
// state; unvisited states get +infinity so low-value selection skips them.
// `features` must be the pipeline the network was trained on.
std::vector<double> mean_state_values(const IohmmParams& model, const NormalizationSpec& model_norm,
                                      FeaturePipeline& features, const FeedforwardNet& net,
                                      const RunToFailureDataset& data, bool force_input_zero = false);

}  // namespace srla
