#include "srla/agent.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("InvalidArgument", "discount must lie in [0, 1)");
  if (!(step.lr > 0.0)) fail("InvalidArgument", "learning rate must be positive");
  if (!(epsilon0 >= 0.0 && epsilon0 <= 1.0)) fail("InvalidArgument", "initial epsilon must lie in [0, 1]");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) fail("InvalidArgument", "epsilon decay must lie in (0, 1]");
  if (!(epsilon_floor >= 0.0 && epsilon_floor <= 1.0)) fail("InvalidArgument", "epsilon floor must lie in [0, 1]");
  if (max_episodes < 1) fail("InvalidArgument", "need at least one training episode");
  if (!(loss_threshold > 0.0)) fail("InvalidArgument", "loss threshold must be positive");
  if (loss_window < 1) fail("InvalidArgument", "loss window must be at least 1");
  if (target_refresh < 1) fail("InvalidArgument", "target refresh interval must be at least 1");
  if (replay_enabled && (replay_capacity < 1 || replay_batch < 1)) {
    fail("InvalidArgument", "replay capacity and batch must be positive");
  }
  if (replay_enabled && replay_batch > replay_capacity) {
    fail("InvalidArgument", "replay batch cannot exceed capacity");
  }
}

namespace {

int greedy_action(const Eigen::VectorXd& q) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(q.size()); ++a) {
    if (q(a) > q(best)) best = a;
  }
  return best;
}

}  // namespace

Action act(const FeedforwardNet& q, const Eigen::Ref<const Eigen::VectorXd>& features, double epsilon,
           std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("InvalidArgument", "epsilon must lie in [0, 1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<int> pick(0, q.out_dim() - 1);
      return static_cast<Action>(pick(rng));
    }
  }
  return static_cast<Action>(greedy_action(q.forward(features)));
}

double td_target(double reward, bool terminal, double gamma, double next_max_q) {
  if (terminal) return reward;
  return reward + gamma * next_max_q;
}

double state_value(const FeedforwardNet& q, const Eigen::Ref<const Eigen::VectorXd>& features) {
  return q.forward(features).maxCoeff();
}

void write_training_log_csv(const std::filesystem::path& file, const std::vector<TrainLogRow>& rows) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open ", file.string(), " for writing"));
  out << "episode,loss,cost,epsilon,failed,updates\n";
  for (const TrainLogRow& r : rows) {
    out << r.episode << ',' << fmt_double(r.loss) << ',' << fmt_double(r.cost) << ','
        << fmt_double(r.epsilon) << ',' << (r.failed ? 1 : 0) << ',' << r.updates << '\n';
  }
  if (!out.good()) fail("IoError", cat("write failed for ", file.string()));
}

void write_gate_log_csv(const std::filesystem::path& file, const std::vector<GateRecord>& rows) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open ", file.string(), " for writing"));
  out << "unit,t,viterbi_state,in_specialized,p_fail,action\n";
  for (const GateRecord& r : rows) {
    out << r.unit_id << ',' << r.t << ',' << r.viterbi_state << ',' << (r.in_specialized ? 1 : 0) << ','
        << fmt_double(r.p_fail) << ',' << static_cast<int>(r.action) << '\n';
  }
  if (!out.good()) fail("IoError", cat("write failed for ", file.string()));
}

std::vector<GateRecord> read_gate_log_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail("IoError", cat("cannot open ", file.string()));
  std::string line;
  if (!std::getline(in, line)) fail("ParseError", cat(file.string(), ": empty gate log"));
  std::vector<GateRecord> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) fail("ParseError", cat(file.string(), ":", lineno, ": expected 6 fields"));
    GateRecord r;
    try {
      r.unit_id = std::stoi(fields[0]);
      r.t = std::stoi(fields[1]);
      r.viterbi_state = std::stoi(fields[2]);
      r.in_specialized = std::stoi(fields[3]) != 0;
      r.p_fail = std::stod(fields[4]);
      r.action = static_cast<Action>(std::stoi(fields[5]));
    } catch (const std::exception&) {
      fail("ParseError", cat(file.string(), ":", lineno, ": malformed gate row"));
    }
    rows.push_back(r);
  }
  return rows;
}

int audit_gate_log(const std::vector<GateRecord>& rows, const StateAnnotation& annotation) {
  annotation.validate();
  int violations = 0;
  for (const GateRecord& r : rows) {
    const bool in_set = annotation.specialized.count(r.viterbi_state) > 0;
    bool bad = false;
    if (r.in_specialized != in_set) bad = true;
    if (!r.in_specialized && r.p_fail <= annotation.p_fail_threshold && r.action != Action::hold) bad = true;
    if (r.p_fail > annotation.p_fail_threshold && r.action != Action::replace) bad = true;
    if (bad) ++violations;
  }
  return violations;
}

namespace {

struct Transition {
  Eigen::VectorXd s;
  int a = 0;
  double r = 0.0;
  Eigen::VectorXd s2;  // empty for terminal transitions
  bool terminal = false;
};

Batch make_batch(const std::vector<const Transition*>& sample, const FeedforwardNet& frozen, double gamma) {
  const int n = static_cast<int>(sample.size());
  Batch batch;
  batch.x.resize(n, sample[0]->s.size());
  batch.action.resize(static_cast<std::size_t>(n));
  batch.target.resize(n);
  for (int i = 0; i < n; ++i) {
    const Transition& tr = *sample[static_cast<std::size_t>(i)];
    batch.x.row(i) = tr.s.transpose();
    batch.action[static_cast<std::size_t>(i)] = tr.a;
    const double next_v = tr.terminal ? 0.0 : state_value(frozen, tr.s2);
    batch.target(i) = td_target(tr.r, tr.terminal, gamma, next_v);
  }
  return batch;
}

}  // namespace

TrainResult train_dqn(MaintenanceEnv& env, const AgentConfig& config, std::uint64_t seed,
                      const FeedforwardNet* init, const SrlaGateConfig* gate) {
  config.validate();
  const int n_actions = env.config().enable_repair ? 3 : 2;

  TrainResult res;
  res.net = init ? *init : FeedforwardNet::init(env.obs_dim(), n_actions, seed);
  if (res.net.in_dim() != env.obs_dim()) {
    fail("DimensionMismatch", cat("network expects ", res.net.in_dim(), " features, environment emits ",
                                  env.obs_dim()));
  }
  if (res.net.out_dim() != n_actions) {
    fail("DimensionMismatch", cat("network has ", res.net.out_dim(), " outputs for ", n_actions, " actions"));
  }

  std::optional<PrefixDecoder> decoder;
  if (gate) {
    if (!gate->model || !gate->norm) fail("MissingPrerequisite", "gated training needs a fitted model and its normalizer");
    gate->annotation.validate();
    if (gate->annotation.n_states != gate->model->n_states) {
      fail("DimensionMismatch", "state annotation does not match the model's state count");
    }
    decoder.emplace(*gate->model);
  }

  FeedforwardNet frozen = res.net;
  std::mt19937_64 explore_rng = make_rng(seed, 1);
  std::mt19937_64 replay_rng = make_rng(seed, 2);
  std::deque<Transition> replay;
  std::deque<double> loss_hist;
  double epsilon = config.epsilon0;
  long long grad_steps = 0;

  auto update = [&](std::vector<const Transition*> sample, int episode) -> double {
    Batch batch = make_batch(sample, frozen, config.gamma);
    double loss = 0.0;
    try {
      loss = train_step(res.net, batch, config.step);
    } catch (const Error& e) {
      fail("NumericalError",
           cat("training diverged at episode ", episode, ", gradient step ", grad_steps + 1, ": ", e.what()));
    }
    if (!std::isfinite(loss)) {
      fail("NumericalError", cat("training loss became non-finite at episode ", episode, ", gradient step ",
                                 grad_steps + 1));
    }
    ++grad_steps;
    if (grad_steps % config.target_refresh == 0) frozen = res.net;
    return loss;
  };

  for (int ep = 1; ep <= config.max_episodes; ++ep) {
    EnvState s = env.reset();
    if (decoder) decoder->reset();
    KahanSum ep_loss;
    int updates = 0;
    bool done = false;
    while (!done) {
      Action a = Action::hold;
      bool learn = true;
      if (decoder) {
        const int u = gate->force_input_zero ? 0 : s.input_symbol;
        decoder->push(u, gate->norm->transform_sensors(s.sensors_raw));
        const int vstate = decoder->map_state();
        const double p_fail = posterior_failure_mass(decoder->filtered(), gate->annotation.failure_states);
        const bool in_set = gate->annotation.specialized.count(vstate) > 0;
        if (in_set) {
          a = act(res.net, s.obs, epsilon, explore_rng);
        } else {
          a = Action::hold;
          learn = false;
        }
        if (gate->safety_net && p_fail > gate->annotation.p_fail_threshold && a == Action::hold) {
          a = Action::replace;
          learn = false;
        }
      } else {
        a = act(res.net, s.obs, epsilon, explore_rng);
      }

      MaintenanceEnv::StepResult sr = env.step(a);
      if (learn) {
        Transition tr;
        tr.s = s.obs;
        tr.a = static_cast<int>(a);
        tr.r = sr.reward;
        tr.terminal = sr.done;
        if (!sr.done) tr.s2 = sr.state.obs;
        if (config.replay_enabled) {
          replay.push_back(std::move(tr));
          if (static_cast<int>(replay.size()) > config.replay_capacity) replay.pop_front();
          if (static_cast<int>(replay.size()) >= config.replay_batch) {
            std::uniform_int_distribution<std::size_t> pick(0, replay.size() - 1);
            std::vector<const Transition*> sample;
            sample.reserve(static_cast<std::size_t>(config.replay_batch));
            for (int i = 0; i < config.replay_batch; ++i) sample.push_back(&replay[pick(replay_rng)]);
            ep_loss.add(update(std::move(sample), ep));
            ++updates;
          }
        } else {
          ep_loss.add(update({&tr}, ep));
          ++updates;
        }
      }
      done = sr.done;
      s = sr.state;
    }

    const EpisodeStats st = env.stats();
    TrainLogRow row;
    row.episode = ep;
    row.loss = updates > 0 ? ep_loss.value() / updates : 0.0;
    row.cost = st.total_cost;
    row.epsilon = epsilon;
    row.failed = st.failed;
    row.updates = updates;
    res.log.push_back(row);
    res.episodes = ep;

    if (updates > 0) {
      loss_hist.push_back(row.loss);
      if (static_cast<int>(loss_hist.size()) > config.loss_window) loss_hist.pop_front();
      if (static_cast<int>(loss_hist.size()) == config.loss_window) {
        KahanSum m;
        for (double v : loss_hist) m.add(v);
        res.final_loss = m.value() / config.loss_window;
        if (res.final_loss < config.loss_threshold) {
          res.converged = true;
          break;
        }
      }
    }
    epsilon = std::max(config.epsilon_floor, epsilon * config.epsilon_decay);
  }
  return res;
}

OracleMarginExpert::OracleMarginExpert(int margin) : margin_(margin) {
  if (margin_ < 0) fail("InvalidArgument", "expert margin must be non-negative");
}

Action OracleMarginExpert::act(const MaintenanceEnv& env, const EnvState& state) {
  const int T = env.current_failure_cycle();
  return state.t >= T - margin_ ? Action::replace : Action::hold;
}

RulThresholdExpert::RulThresholdExpert(std::shared_ptr<const IohmmParams> model,
                                       std::shared_ptr<const NormalizationSpec> norm,
                                       std::set<int> failure_states, RulConfig rul, double threshold,
                                       bool force_input_zero)
    : model_(std::move(model)),
      norm_(std::move(norm)),
      failure_states_(std::move(failure_states)),
      rul_(rul),
      threshold_(threshold),
      force_input_zero_(force_input_zero) {
  if (!model_ || !norm_) fail("MissingPrerequisite", "residual-life expert needs a fitted model and normalizer");
  if (failure_states_.empty()) fail("InvalidArgument", "residual-life expert needs at least one failure state");
  if (!(threshold_ >= 0.0)) fail("InvalidArgument", "replacement threshold must be non-negative");
}

void RulThresholdExpert::begin_episode() {
  inputs_.clear();
  obs_.clear();
}

Action RulThresholdExpert::act(const MaintenanceEnv& /*env*/, const EnvState& state) {
  inputs_.push_back(force_input_zero_ ? 0 : state.input_symbol);
  obs_.push_back(norm_->transform_sensors(state.sensors_raw));
  Eigen::MatrixXd prefix(static_cast<Eigen::Index>(obs_.size()), obs_.front().size());
  for (Eigen::Index t = 0; t < prefix.rows(); ++t) prefix.row(t) = obs_[static_cast<std::size_t>(t)].transpose();
  const RulEstimate est = estimate_rul(*model_, inputs_, prefix, failure_states_, rul_);
  return est.mean_rul <= threshold_ ? Action::replace : Action::hold;
}

BcPretrainResult pretrain_bc(MaintenanceEnv& train_env, MaintenanceEnv* holdout_env, Policy& expert,
                             const BcConfig& config, int n_actions) {
  if (n_actions < 2) fail("InvalidArgument", "need at least two actions");

  auto collect = [&expert](MaintenanceEnv& env, std::vector<Eigen::VectorXd>& xs, std::vector<int>& as) {
    for (int i = 0; i < env.n_units(); ++i) {
      EnvState s = env.reset_to_unit(i);
      expert.begin_episode();
      bool done = false;
      while (!done) {
        const Action a = expert.act(env, s);
        xs.push_back(s.obs);
        as.push_back(static_cast<int>(a));
        MaintenanceEnv::StepResult sr = env.step(a);
        done = sr.done;
        s = sr.state;
      }
    }
  };

  std::vector<Eigen::VectorXd> xs;
  std::vector<int> as;
  collect(train_env, xs, as);
  if (xs.empty()) fail("EmptyInput", "expert produced no training pairs");

  Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), xs.front().size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) X.row(i) = xs[static_cast<std::size_t>(i)].transpose();

  FeedforwardNet net = FeedforwardNet::init(static_cast<int>(X.cols()), n_actions, config.seed);
  BcResult cloned = clone_behavior(std::move(net), X, as, config);

  BcPretrainResult res;
  res.net = std::move(cloned.net);
  res.n_train_pairs = static_cast<int>(xs.size());
  res.train_agreement = cloned.agreement;
  res.final_loss = cloned.final_loss;
  res.epochs_run = cloned.epochs_run;

  if (holdout_env != nullptr) {
    std::vector<Eigen::VectorXd> hx;
    std::vector<int> ha;
    collect(*holdout_env, hx, ha);
    res.n_holdout_pairs = static_cast<int>(hx.size());
    if (!hx.empty()) {
      int agree = 0;
      for (std::size_t i = 0; i < hx.size(); ++i) {
        if (greedy_action(res.net.forward(hx[i])) == ha[i]) ++agree;
      }
      res.holdout_agreement = static_cast<double>(agree) / static_cast<double>(hx.size());
    }
  }
  return res;
}

Action GreedyQPolicy::act(const MaintenanceEnv& /*env*/, const EnvState& state) {
  if (state.obs.size() != net_.in_dim()) {
    fail("DimensionMismatch", cat("network expects ", net_.in_dim(), " features, observation has ",
                                  state.obs.size()));
  }
  return static_cast<Action>(greedy_action(net_.forward(state.obs)));
}

namespace {

const IohmmParams& require_model(const std::shared_ptr<const IohmmParams>& model) {
  if (!model) fail("MissingPrerequisite", "gated policy needs a fitted model");
  return *model;
}

}  // namespace

SrlaPolicy::SrlaPolicy(std::shared_ptr<const IohmmParams> model, std::shared_ptr<const NormalizationSpec> norm,
                       StateAnnotation annotation, FeedforwardNet qnet, double epsilon, std::uint64_t seed,
                       bool force_input_zero)
    : model_(std::move(model)),
      norm_(std::move(norm)),
      annotation_(std::move(annotation)),
      qnet_(std::move(qnet)),
      epsilon_(epsilon),
      rng_(make_rng(seed, 3)),
      force_input_zero_(force_input_zero),
      decoder_(require_model(model_)) {
  if (!norm_) fail("MissingPrerequisite", "gated policy needs the model's normalizer");
  annotation_.validate();
  if (annotation_.n_states != model_->n_states) {
    fail("DimensionMismatch", "state annotation does not match the model's state count");
  }
  if (qnet_.in_dim() != norm_->dim()) {
    fail("DimensionMismatch", cat("network expects ", qnet_.in_dim(), " features, normalizer emits ",
                                  norm_->dim()));
  }
  if (!(epsilon_ >= 0.0 && epsilon_ <= 1.0)) fail("InvalidArgument", "epsilon must lie in [0, 1]");
}

void SrlaPolicy::begin_episode() { decoder_.reset(); }

GateRecord SrlaPolicy::decide(int unit_id, int t, int input_symbol,
                              const Eigen::Ref<const Eigen::VectorXd>& sensors_raw) {
  const Eigen::VectorXd z = norm_->transform_sensors(sensors_raw);
  decoder_.push(force_input_zero_ ? 0 : input_symbol, z);

  GateRecord rec;
  rec.unit_id = unit_id;
  rec.t = t;
  rec.viterbi_state = decoder_.map_state();
  rec.in_specialized = annotation_.specialized.count(rec.viterbi_state) > 0;
  rec.p_fail = posterior_failure_mass(decoder_.filtered(), annotation_.failure_states);

  Action a = Action::hold;
  if (rec.in_specialized) a = srla::act(qnet_, z, epsilon_, rng_);
  if (rec.p_fail > annotation_.p_fail_threshold && a == Action::hold) a = Action::replace;
  rec.action = a;
  gate_log_.push_back(rec);
  return rec;
}

Action SrlaPolicy::act(const MaintenanceEnv& /*env*/, const EnvState& state) {
  return decide(state.unit_id, state.t, state.input_symbol, state.sensors_raw).action;
}

std::vector<double> mean_state_values(const IohmmParams& model, const NormalizationSpec& model_norm,
                                      FeaturePipeline& features, const FeedforwardNet& net,
                                      const RunToFailureDataset& data, bool force_input_zero) {
  std::vector<KahanSum> sums(static_cast<std::size_t>(model.n_states));
  std::vector<long long> counts(static_cast<std::size_t>(model.n_states), 0);

  for (const UnitTrajectory& unit : data.units) {
    const Eigen::Index T = unit.sensors.rows();
    std::vector<int> inputs = force_input_zero ? std::vector<int>(static_cast<std::size_t>(T), 0)
                                               : unit_inputs(unit);
    Eigen::MatrixXd obs(T, unit.sensors.cols());
    for (Eigen::Index t = 0; t < T; ++t) {
      obs.row(t) = model_norm.transform_sensors(unit.sensors.row(t).transpose()).transpose();
    }
    const ViterbiPath path = viterbi(model, inputs, obs);

    features.reset();
    for (Eigen::Index t = 0; t < T; ++t) {
      const int symbol = unit.input_symbols.empty() ? 0 : unit.input_symbols[static_cast<std::size_t>(t)];
      const Eigen::VectorXd f =
          features.step(unit.sensors.row(t).transpose(), unit.op_settings.row(t).transpose(), symbol);
      const double v = state_value(net, f);
      const auto s = static_cast<std::size_t>(path.states[static_cast<std::size_t>(t)]);
      sums[s].add(v);
      ++counts[s];
    }
  }

  std::vector<double> out(static_cast<std::size_t>(model.n_states));
  for (std::size_t s = 0; s < out.size(); ++s) {
    out[s] = counts[s] > 0 ? sums[s].value() / static_cast<double>(counts[s])
                           : std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace srla
