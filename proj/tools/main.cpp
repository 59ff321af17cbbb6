#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "srla/agent.hpp"
#include "srla/compare.hpp"
#include "srla/dataset.hpp"
#include "srla/decoding.hpp"
#include "srla/env.hpp"
#include "srla/error.hpp"
#include "srla/interpret.hpp"
#include "srla/iohmm.hpp"
#include "srla/metrics.hpp"
#include "srla/normalizer.hpp"
#include "srla/pipeline.hpp"
#include "srla/rul.hpp"
#include "srla/serialize.hpp"
#include "srla/synthetic.hpp"
#include "srla/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace srla;

namespace {

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail("IoError", cat("cannot create output directory ", dir.string(), ": ", ec.message()));
  return dir;
}

void freeze_config(const fs::path& dir, const std::string& command, json options) {
  options["command"] = command;
  std::ofstream out(dir / "config.json");
  if (!out) fail("IoError", cat("cannot write ", (dir / "config.json").string()));
  out << options.dump(2) << '\n';
}

DataFormat parse_format(const std::string& name) {
  if (name == "csv") return DataFormat::csv;
  if (name == "cmapss") return DataFormat::cmapss_txt;
  fail("InvalidArgument", cat("unknown data format '", name, "'"));
}

RunToFailureDataset load_data(const std::string& path, const std::string& format) {
  return load_run_to_failure(path, parse_format(format));
}

// Strips discretized inputs so every decoding call sees symbol 0, matching a
// model that was fit input-blind.
RunToFailureDataset model_view(const ModelDocument& doc, const RunToFailureDataset& data) {
  if (!doc.normalization) {
    fail("MissingPrerequisite", "model file carries no normalizer; refit it before decoding new data");
  }
  RunToFailureDataset out = apply_normalizer(*doc.normalization, data);
  if (doc.force_input_zero) {
    for (UnitTrajectory& u : out.units) u.input_symbols.clear();
  }
  return out;
}

std::vector<SystemMode> parse_systems(const std::string& csv) {
  std::vector<SystemMode> modes;
  std::string token;
  std::istringstream ss(csv);
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) modes.push_back(parse_system_mode(token));
  }
  if (modes.empty()) fail("InvalidArgument", "no systems requested");
  return modes;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> values;
  std::string token;
  std::istringstream ss(csv);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    try {
      values.push_back(std::stod(token));
    } catch (const std::exception&) {
      fail("InvalidArgument", cat("cannot parse value '", token, "'"));
    }
  }
  if (values.empty()) fail("InvalidArgument", "no sweep values given");
  return values;
}

SyntheticConfig demo_synthetic(int n_states, int n_inputs, int n_units, int d_y, double separation,
                               double noise_var) {
  if (n_states < 3) fail("InvalidArgument", "synthetic chain needs at least 3 states");
  if (n_inputs < 1) fail("InvalidArgument", "synthetic chain needs at least 1 input symbol");
  std::vector<Eigen::VectorXd> fwd;
  for (int u = 0; u < n_inputs; ++u) {
    Eigen::VectorXd p(n_states - 1);
    for (int s = 0; s < n_states - 1; ++s) {
      double base = 0.12 + 0.02 * u;  // higher symbols degrade faster
      if (s >= n_states - 3) base += 0.1;  // degradation accelerates near failure
      p(s) = base;
    }
    fwd.push_back(p);
  }
  return SyntheticConfig::left_to_right(fwd, d_y, separation, noise_var, n_units);
}

struct SplitOptions {
  double train_ratio = 0.6;
  std::uint64_t seed = 0;
};

// Environment + pipeline construction shared by pretrain-bc / train / evaluate.
struct ModeArtifacts {
  std::shared_ptr<const NormalizationSpec> norm;
  std::shared_ptr<const IohmmParams> model;
  bool force_input_zero = false;
};

ModeArtifacts artifacts_for_mode(SystemMode mode, const RunToFailureDataset& train,
                                 const std::optional<ModelDocument>& doc) {
  ModeArtifacts art;
  switch (mode) {
    case SystemMode::raw:
      art.norm = std::make_shared<NormalizationSpec>(
          fit_normalizer(train, NormMode::zscore, FeatureSet::sensors));
      break;
    case SystemMode::raw_plus_ops:
      art.norm = std::make_shared<NormalizationSpec>(
          fit_normalizer(train, NormMode::zscore, FeatureSet::sensors_and_ops));
      break;
    case SystemMode::hmm_gamma:
    case SystemMode::iohmm_gamma:
    case SystemMode::srla_raw: {
      if (!doc) fail("MissingPrerequisite", cat("system ", system_mode_name(mode), " needs --model"));
      if (!doc->normalization) fail("MissingPrerequisite", "model file carries no normalizer");
      art.norm = std::make_shared<NormalizationSpec>(*doc->normalization);
      art.model = std::make_shared<IohmmParams>(doc->params);
      art.force_input_zero = doc->force_input_zero;
      break;
    }
  }
  return art;
}

int cmd_ingest(const std::string& dataset, const std::string& format, const std::string& out,
               int discretize_k, double discretize_tol, const std::string& sensors, int synth_units,
               int synth_states, int synth_inputs, int synth_dim, double synth_sep, double synth_noise,
               std::uint64_t seed) {
  fs::path dir = ensure_out_dir(out);

  RunToFailureDataset data;
  std::vector<std::vector<int>> truth;
  if (synth_units > 0) {
    SyntheticResult gen =
        generate_synthetic(demo_synthetic(synth_states, synth_inputs, synth_units, synth_dim, synth_sep,
                                          synth_noise),
                           seed);
    data = std::move(gen.data);
    truth = std::move(gen.hidden_states);
  } else {
    if (dataset.empty()) fail("InvalidArgument", "either --dataset or --synthetic-units is required");
    data = load_data(dataset, format);
  }

  if (!sensors.empty()) {
    std::vector<std::string> names;
    std::string token;
    std::istringstream ss(sensors);
    while (std::getline(ss, token, ',')) {
      if (!token.empty()) names.push_back(token);
    }
    data = select_sensors(data, names);
  }

  if (discretize_k >= 0) {
    DiscretizationResult disc = discretize_operating_conditions(
        data, discretize_k == 0 ? std::nullopt : std::optional<int>(discretize_k), discretize_tol, seed);
    data = std::move(disc.data);
    std::cout << "operating-condition symbols: " << data.input_alphabet_size() << '\n';
  }

  data.validate();
  save_csv(data, dir / "data.csv");
  if (!truth.empty()) {
    std::ofstream tf(dir / "truth.csv");
    tf << "unit,cycle,state\n";
    for (std::size_t i = 0; i < truth.size(); ++i) {
      for (std::size_t t = 0; t < truth[i].size(); ++t) {
        tf << data.units[i].unit_id << ',' << t + 1 << ',' << truth[i][t] << '\n';
      }
    }
  }

  freeze_config(dir, "ingest",
                json{{"dataset", dataset},
                     {"format", format},
                     {"discretize_k", discretize_k},
                     {"discretize_tol", discretize_tol},
                     {"sensors", sensors},
                     {"synthetic_units", synth_units},
                     {"synthetic_states", synth_states},
                     {"synthetic_inputs", synth_inputs},
                     {"synthetic_dim", synth_dim},
                     {"synthetic_separation", synth_sep},
                     {"synthetic_noise", synth_noise},
                     {"seed", seed}});

  std::cout << "units: " << data.units.size() << "\ncycles: " << data.total_cycles()
            << "\nsensors: " << data.sensor_dim() << "\nwrote " << (dir / "data.csv").string() << '\n';
  return 0;
}

int cmd_fit_iohmm(const std::string& dataset, const std::string& out, int n_states, double tol,
                  int max_epochs, int restarts, bool input_blind, std::uint64_t seed) {
  fs::path dir = ensure_out_dir(out);
  RunToFailureDataset data = load_data(dataset, "csv");

  NormalizationSpec norm = fit_normalizer(data, NormMode::minmax, FeatureSet::sensors);
  RunToFailureDataset normed = apply_normalizer(norm, data);
  if (input_blind) {
    for (UnitTrajectory& u : normed.units) u.input_symbols.clear();
  }

  EmConfig em;
  em.tol = tol;
  em.max_epochs = max_epochs;
  em.n_restarts = restarts;
  em.seed = seed;
  if (input_blind) em.n_inputs = 1;
  EmFitResult fit = fit_em(normed, n_states, em);

  ModelDocument doc;
  doc.params = std::move(fit.params);
  doc.normalization = std::move(norm);
  doc.em = em;
  doc.ll_trace = fit.ll_trace;
  doc.force_input_zero = input_blind;
  save_model(dir / "model.json", doc);

  {
    std::ofstream trace(dir / "ll_trace.csv");
    trace << "epoch,log_likelihood\n";
    for (std::size_t i = 0; i < fit.ll_trace.size(); ++i) {
      trace << i + 1 << ',' << fmt_double(fit.ll_trace[i]) << '\n';
    }
  }

  freeze_config(dir, "fit-iohmm",
                json{{"dataset", dataset},
                     {"n_states", n_states},
                     {"tol", tol},
                     {"max_epochs", max_epochs},
                     {"restarts", restarts},
                     {"input_blind", input_blind},
                     {"seed", seed}});

  std::cout << "converged: " << (fit.converged ? "yes" : "no") << "\nepochs: " << fit.ll_trace.size()
            << "\nbest restart: " << fit.best_restart
            << "\nfinal log-likelihood: " << fmt_double(fit.ll_trace.back()) << "\nwrote "
            << (dir / "model.json").string() << '\n';
  return 0;
}

int cmd_decode(const std::string& model_path, const std::string& dataset, const std::string& out,
               const std::string& mode, int radius, double edge_threshold, double quantile,
               double p_fail_threshold, const std::string& network_path) {
  fs::path dir = ensure_out_dir(out);
  ModelDocument doc = load_model(model_path);
  RunToFailureDataset data = load_data(dataset, "csv");
  RunToFailureDataset normed = model_view(doc, data);

  SpecializedConfig spec;
  if (mode == "transition_radius") {
    spec.mode = SpecializedConfig::Mode::transition_radius;
  } else if (mode == "value_quantile") {
    spec.mode = SpecializedConfig::Mode::value_quantile;
  } else {
    fail("InvalidArgument", cat("unknown specialized-set mode '", mode, "'"));
  }
  spec.radius = radius;
  spec.edge_threshold = edge_threshold;
  spec.quantile = quantile;

  std::optional<Eigen::VectorXd> values;
  if (spec.mode == SpecializedConfig::Mode::value_quantile) {
    if (network_path.empty()) {
      fail("MissingPrerequisite", "value_quantile mode needs --network for state values");
    }
    auto [net, meta] = load_network(network_path);
    auto norm = std::make_shared<NormalizationSpec>(*doc.normalization);
    auto pipeline = make_pipeline(SystemMode::srla_raw, norm);
    std::vector<double> v =
        mean_state_values(doc.params, *doc.normalization, *pipeline, net, data, doc.force_input_zero);
    values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  StateAnnotation annotation = annotate_states(doc.params, normed, spec, p_fail_threshold, values);

  std::vector<ViterbiPath> paths;
  std::vector<int> lengths;
  for (const UnitTrajectory& u : normed.units) {
    paths.push_back(viterbi(doc.params, unit_inputs(u), u.sensors));
    lengths.push_back(u.cycles());
  }
  write_decode_csv(dir / "decode.csv", normed, paths, annotation.conditions);

  doc.annotation = annotation;
  save_model(dir / "model.json", doc);

  freeze_config(dir, "decode",
                json{{"model", model_path},
                     {"dataset", dataset},
                     {"specialized_mode", mode},
                     {"radius", radius},
                     {"edge_threshold", edge_threshold},
                     {"quantile", quantile},
                     {"p_fail_threshold", p_fail_threshold},
                     {"network", network_path}});

  std::cout << "failure states:";
  for (int s : annotation.failure_states) std::cout << ' ' << s;
  std::cout << "\nspecialized states:";
  for (int s : annotation.specialized) std::cout << ' ' << s;
  std::cout << '\n';
  for (const ConditionBand& b : annotation.conditions.bands) {
    std::cout << b.label << ':';
    for (int s : b.states) std::cout << ' ' << s;
    std::cout << '\n';
  }
  if (annotation.conditions.dispersed) {
    std::cout << "warning: some states occupy dispersed stretches of unit life\n";
  }
  std::cout << "wrote " << (dir / "model.json").string() << " and " << (dir / "decode.csv").string() << '\n';
  return 0;
}

int cmd_rul(const std::string& model_path, const std::string& dataset, const std::string& out, int unit_id,
            int stride, int rollouts, int horizon, const std::string& input_policy, std::uint64_t seed) {
  fs::path dir = ensure_out_dir(out);
  ModelDocument doc = load_model(model_path);
  RunToFailureDataset data = load_data(dataset, "csv");
  RunToFailureDataset normed = model_view(doc, data);

  std::set<int> failure_states = doc.annotation ? doc.annotation->failure_states
                                                : decode_failure_states(doc.params, normed);

  RulConfig config;
  config.n_rollouts = rollouts;
  config.horizon_cap = horizon;
  config.seed = seed;
  if (input_policy == "hold_last") {
    config.input_policy = RulConfig::InputPolicy::hold_last;
  } else if (input_policy == "empirical") {
    config.input_policy = RulConfig::InputPolicy::empirical;
  } else {
    fail("InvalidArgument", cat("unknown input policy '", input_policy, "'"));
  }

  int written = 0;
  for (const UnitTrajectory& u : normed.units) {
    if (unit_id != 0 && u.unit_id != unit_id) continue;
    std::vector<RulEstimate> trend = rul_trend(doc.params, u, stride, failure_states, config);
    write_rul_csv(dir / cat("rul_unit", u.unit_id, ".csv"), u.unit_id, trend);
    ++written;
  }
  if (written == 0) fail("InvalidArgument", cat("unit ", unit_id, " not present in the dataset"));

  freeze_config(dir, "rul",
                json{{"model", model_path},
                     {"dataset", dataset},
                     {"unit", unit_id},
                     {"stride", stride},
                     {"rollouts", rollouts},
                     {"horizon", horizon},
                     {"input_policy", input_policy},
                     {"seed", seed}});

  std::cout << "wrote " << written << " residual-life trend file(s) under " << dir.string() << '\n';
  return 0;
}

int cmd_importance(const std::string& model_path, const std::string& dataset, const std::string& out,
                   double l2, double lr, int epochs, int top_k, const std::string& descriptions_path) {
  fs::path dir = ensure_out_dir(out);
  ModelDocument doc = load_model(model_path);
  RunToFailureDataset data = load_data(dataset, "csv");
  RunToFailureDataset normed = model_view(doc, data);

  std::set<int> failure_states = doc.annotation ? doc.annotation->failure_states
                                                : decode_failure_states(doc.params, normed);

  std::optional<SensorDescriptions> descriptions;
  if (!descriptions_path.empty()) descriptions = load_sensor_descriptions(descriptions_path);

  ClassifierConfig config;
  config.l2 = l2;
  config.lr = lr;
  config.max_epochs = epochs;

  FailureModeReport report = failure_mode_report(doc.params, normed, failure_states, descriptions, config,
                                                 top_k);
  write_failure_report(dir / "failure_report.txt", report);

  // Full per-state classifier over the decoded cycles for the raw coefficients.
  std::vector<Eigen::VectorXd> xs;
  std::vector<int> targets;
  for (const UnitTrajectory& u : normed.units) {
    ViterbiPath path = viterbi(doc.params, unit_inputs(u), u.sensors);
    for (int t = 0; t < u.cycles(); ++t) {
      xs.push_back(u.sensors.row(t).transpose());
      targets.push_back(path.states[static_cast<std::size_t>(t)]);
    }
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), normed.sensor_dim());
  for (Eigen::Index i = 0; i < X.rows(); ++i) X.row(i) = xs[static_cast<std::size_t>(i)].transpose();
  StateClassifier clf = fit_state_classifier(X, targets, config);
  write_importance_csv(dir / "importance.csv", clf, normed.sensor_names, top_k);

  freeze_config(dir, "importance",
                json{{"model", model_path},
                     {"dataset", dataset},
                     {"l2", l2},
                     {"lr", lr},
                     {"epochs", epochs},
                     {"top_k", top_k},
                     {"descriptions", descriptions_path}});

  std::cout << "classifier accuracy: " << fmt_double(report.classifier_accuracy) << "\nwrote "
            << (dir / "importance.csv").string() << " and " << (dir / "failure_report.txt").string() << '\n';
  return 0;
}

int cmd_pretrain_bc(const std::string& dataset, const std::string& model_path, const std::string& out,
                    const std::string& system, const std::string& expert_mode, int margin,
                    double rul_threshold, int epochs, double lr, double c_r, double c_f,
                    double train_ratio, std::uint64_t seed) {
  fs::path dir = ensure_out_dir(out);
  const SystemMode mode = parse_system_mode(system);
  RunToFailureDataset data = load_data(dataset, "csv");
  auto [train, holdout] = split_units(data, train_ratio, seed);

  std::optional<ModelDocument> doc;
  if (!model_path.empty()) doc = load_model(model_path);
  ModeArtifacts art = artifacts_for_mode(mode, train, doc);

  EnvConfig env_config;
  env_config.c_r = c_r;
  env_config.c_f = c_f;

  auto train_ptr = std::make_shared<RunToFailureDataset>(std::move(train));
  auto holdout_ptr = std::make_shared<RunToFailureDataset>(std::move(holdout));
  MaintenanceEnv train_env(train_ptr, env_config, make_pipeline(mode, art.norm, art.model), seed);
  MaintenanceEnv holdout_env(holdout_ptr, env_config, make_pipeline(mode, art.norm, art.model), seed);

  std::unique_ptr<Policy> expert;
  if (expert_mode == "oracle_margin") {
    expert = std::make_unique<OracleMarginExpert>(margin);
  } else if (expert_mode == "rul_threshold") {
    if (!art.model) fail("MissingPrerequisite", "rul_threshold expert needs --model");
    RulConfig rul;
    rul.seed = seed;
    expert = std::make_unique<RulThresholdExpert>(art.model, art.norm,
                                                  doc->annotation ? doc->annotation->failure_states
                                                                  : decode_failure_states(
                                                                        doc->params, model_view(*doc, *train_ptr)),
                                                  rul, rul_threshold, art.force_input_zero);
  } else {
    fail("InvalidArgument", cat("unknown expert mode '", expert_mode, "'"));
  }

  BcConfig bc;
  bc.epochs = epochs;
  bc.step.lr = lr;
  bc.seed = seed;
  BcPretrainResult res = pretrain_bc(train_env, &holdout_env, *expert, bc, 2);

  save_network(dir / "network.json", res.net,
               json{{"role", "bc"},
                    {"system", system},
                    {"seed", seed},
                    {"train_pairs", res.n_train_pairs},
                    {"holdout_pairs", res.n_holdout_pairs},
                    {"train_agreement", res.train_agreement},
                    {"holdout_agreement", res.holdout_agreement},
                    {"epochs_run", res.epochs_run},
                    {"final_loss", res.final_loss}});

  freeze_config(dir, "pretrain-bc",
                json{{"dataset", dataset},
                     {"model", model_path},
                     {"system", system},
                     {"expert", expert_mode},
                     {"margin", margin},
                     {"rul_threshold", rul_threshold},
                     {"epochs", epochs},
                     {"lr", lr},
                     {"c_r", c_r},
                     {"c_f", c_f},
                     {"train_ratio", train_ratio},
                     {"seed", seed}});

  std::cout << "training pairs: " << res.n_train_pairs << "\ntrain agreement: "
            << fmt_double(res.train_agreement) << "\nholdout agreement: "
            << fmt_double(res.holdout_agreement) << "\nwrote " << (dir / "network.json").string() << '\n';
  return 0;
}

AgentConfig agent_from_flags(double gamma, double lr, int max_episodes, double loss_threshold,
                             int target_refresh, bool replay) {
  AgentConfig agent;
  agent.gamma = gamma;
  agent.step.lr = lr;
  agent.max_episodes = max_episodes;
  agent.loss_threshold = loss_threshold;
  agent.target_refresh = target_refresh;
  agent.replay_enabled = replay;
  return agent;
}

int cmd_train(const std::string& dataset, const std::string& model_path, const std::string& init_path,
              const std::string& out, const std::string& system, double gamma, double lr, int max_episodes,
              double loss_threshold, int target_refresh, bool replay, bool no_gate, double c_r, double c_f,
              double train_ratio, std::uint64_t seed) {
  fs::path dir = ensure_out_dir(out);
  const SystemMode mode = parse_system_mode(system);
  RunToFailureDataset data = load_data(dataset, "csv");
  auto [train, test] = split_units(data, train_ratio, seed);

  std::optional<ModelDocument> doc;
  if (!model_path.empty()) doc = load_model(model_path);
  ModeArtifacts art = artifacts_for_mode(mode, train, doc);

  EnvConfig env_config;
  env_config.c_r = c_r;
  env_config.c_f = c_f;

  auto train_ptr = std::make_shared<RunToFailureDataset>(std::move(train));
  MaintenanceEnv env(train_ptr, env_config, make_pipeline(mode, art.norm, art.model), seed);

  std::optional<FeedforwardNet> init;
  if (!init_path.empty()) init = load_network(init_path).first;

  AgentConfig agent = agent_from_flags(gamma, lr, max_episodes, loss_threshold, target_refresh, replay);

  std::optional<SrlaGateConfig> gate;
  if (mode == SystemMode::srla_raw && !no_gate) {
    if (!doc || !doc->annotation) {
      fail("MissingPrerequisite", "gated training needs a model with a decoded state annotation; run decode");
    }
    gate.emplace();
    gate->model = art.model;
    gate->norm = art.norm;
    gate->annotation = *doc->annotation;
    gate->safety_net = false;
    gate->force_input_zero = art.force_input_zero;
  }

  TrainResult res = train_dqn(env, agent, seed, init ? &*init : nullptr, gate ? &*gate : nullptr);

  write_training_log_csv(dir / "training_log.csv", res.log);
  save_network(dir / "network.json", res.net,
               json{{"role", "dqn"},
                    {"system", system},
                    {"seed", seed},
                    {"episodes", res.episodes},
                    {"converged", res.converged},
                    {"final_loss", res.final_loss},
                    {"gated", gate.has_value()}});

  freeze_config(dir, "train",
                json{{"dataset", dataset},
                     {"model", model_path},
                     {"init", init_path},
                     {"system", system},
                     {"gamma", gamma},
                     {"lr", lr},
                     {"max_episodes", max_episodes},
                     {"loss_threshold", loss_threshold},
                     {"target_refresh", target_refresh},
                     {"replay", replay},
                     {"no_gate", no_gate},
                     {"c_r", c_r},
                     {"c_f", c_f},
                     {"train_ratio", train_ratio},
                     {"seed", seed}});

  std::cout << "episodes: " << res.episodes << "\nconverged: " << (res.converged ? "yes" : "no")
            << "\nfinal smoothed loss: " << fmt_double(res.final_loss) << "\nwrote "
            << (dir / "network.json").string() << '\n';
  return 0;
}

int cmd_evaluate(const std::string& dataset, const std::string& model_path, const std::string& network_path,
                 const std::string& out, const std::string& system, double gamma, double c_r, double c_f,
                 double train_ratio, std::uint64_t seed) {
  fs::path dir = ensure_out_dir(out);
  const SystemMode mode = parse_system_mode(system);
  RunToFailureDataset data = load_data(dataset, "csv");
  auto [train, test] = split_units(data, train_ratio, seed);

  std::optional<ModelDocument> doc;
  if (!model_path.empty()) doc = load_model(model_path);
  ModeArtifacts art = artifacts_for_mode(mode, train, doc);

  EnvConfig env_config;
  env_config.c_r = c_r;
  env_config.c_f = c_f;

  auto test_ptr = std::make_shared<RunToFailureDataset>(std::move(test));
  MaintenanceEnv env(test_ptr, env_config, make_pipeline(mode, art.norm, art.model), seed);

  auto [net, meta] = load_network(network_path);

  MetricsReport report;
  std::unique_ptr<SrlaPolicy> gated;
  if (mode == SystemMode::srla_raw && doc && doc->annotation) {
    gated = std::make_unique<SrlaPolicy>(art.model, art.norm, *doc->annotation, std::move(net), 0.0, seed,
                                         art.force_input_zero);
    report = evaluate_policy(env, *gated, gamma);
    write_gate_log_csv(dir / "gate_log.csv", gated->gate_log());
    const int violations = audit_gate_log(gated->gate_log(), *doc->annotation);
    std::cout << "gate audit violations: " << violations << '\n';
  } else {
    GreedyQPolicy policy(std::move(net));
    report = evaluate_policy(env, policy, gamma);
  }

  write_metrics_csv(dir / "metrics.csv", {system}, {report});

  freeze_config(dir, "evaluate",
                json{{"dataset", dataset},
                     {"model", model_path},
                     {"network", network_path},
                     {"system", system},
                     {"gamma", gamma},
                     {"c_r", c_r},
                     {"c_f", c_f},
                     {"train_ratio", train_ratio},
                     {"seed", seed}});

  std::cout << "q_star_avg: " << fmt_double(report.q_star_avg) << "\nimc: " << fmt_double(report.imc)
            << "\ncmc: " << fmt_double(report.cmc) << "\nimc/q_star: " << fmt_double(report.imc_over_q)
            << "\nfailure %: " << fmt_double(report.failure_pct)
            << "\navg remaining cycles: " << fmt_double(report.avg_remaining_cycles) << "\nwrote "
            << (dir / "metrics.csv").string() << '\n';
  return 0;
}

json comparison_config_json(const ComparisonConfig& config) {
  std::vector<std::string> names;
  for (SystemMode m : config.systems) names.emplace_back(system_mode_name(m));
  return json{{"systems", names},
              {"train_ratio", config.train_ratio},
              {"n_states", config.n_states},
              {"c_r", config.env.c_r},
              {"c_f", config.env.c_f},
              {"max_episodes", config.agent.max_episodes},
              {"loss_threshold", config.agent.loss_threshold},
              {"em_restarts", config.em.n_restarts},
              {"em_max_epochs", config.em.max_epochs},
              {"specialized_radius", config.specialized.radius},
              {"p_fail_threshold", config.p_fail_threshold},
              {"expert_margin", config.expert_margin},
              {"seed", config.seed}};
}

void print_rows(const std::vector<SystemResult>& rows) {
  for (const SystemResult& r : rows) {
    if (!r.ok) {
      std::cout << r.label << ": failed (" << r.error << ")\n";
      continue;
    }
    std::cout << r.label << ": q_star " << fmt_double(r.report.q_star_avg) << ", imc "
              << fmt_double(r.report.imc) << ", cmc " << fmt_double(r.report.cmc) << ", failure% "
              << fmt_double(r.report.failure_pct) << ", remaining "
              << fmt_double(r.report.avg_remaining_cycles) << '\n';
  }
}

ComparisonConfig comparison_from_flags(const std::string& systems, double train_ratio, int n_states,
                                       double c_r, double c_f, int max_episodes, int em_epochs,
                                       int em_restarts, int radius, double p_fail_threshold,
                                       int expert_margin, std::uint64_t seed) {
  ComparisonConfig config;
  config.systems = parse_systems(systems);
  config.train_ratio = train_ratio;
  config.n_states = n_states;
  config.env.c_r = c_r;
  config.env.c_f = c_f;
  config.agent.max_episodes = max_episodes;
  config.em.max_epochs = em_epochs;
  config.em.n_restarts = em_restarts;
  config.specialized.radius = radius;
  config.p_fail_threshold = p_fail_threshold;
  config.expert_margin = expert_margin;
  config.seed = seed;
  return config;
}

int cmd_compare(const std::string& dataset, const std::string& out, const std::string& systems,
                double train_ratio, int n_states, double c_r, double c_f, int max_episodes, int em_epochs,
                int em_restarts, int radius, double p_fail_threshold, int expert_margin,
                std::uint64_t seed) {
  fs::path dir = ensure_out_dir(out);
  RunToFailureDataset data = load_data(dataset, "csv");
  ComparisonConfig config = comparison_from_flags(systems, train_ratio, n_states, c_r, c_f, max_episodes,
                                                  em_epochs, em_restarts, radius, p_fail_threshold,
                                                  expert_margin, seed);

  ComparisonResult result = run_comparison(data, config);
  write_comparison_csv(dir / "comparison.csv", result);
  for (const SystemResult& r : result.rows) {
    if (r.ok && !r.gate_log.empty()) write_gate_log_csv(dir / cat("gate_log_", r.label, ".csv"), r.gate_log);
  }
  json frozen = comparison_config_json(config);
  frozen["dataset"] = dataset;
  freeze_config(dir, "compare", frozen);
  print_rows(result.rows);
  std::cout << "wrote " << (dir / "comparison.csv").string() << '\n';
  return 0;
}

int cmd_sweep(const std::string& dataset, const std::string& out, const std::string& system,
              const std::string& param, const std::string& values, double train_ratio, int n_states,
              double c_r, double c_f, int max_episodes, int em_epochs, int em_restarts, int radius,
              double p_fail_threshold, int expert_margin, std::uint64_t seed) {
  fs::path dir = ensure_out_dir(out);
  RunToFailureDataset data = load_data(dataset, "csv");
  ComparisonConfig config = comparison_from_flags(system, train_ratio, n_states, c_r, c_f, max_episodes,
                                                  em_epochs, em_restarts, radius, p_fail_threshold,
                                                  expert_margin, seed);
  const SweepParam sweep_param = parse_sweep_param(param);
  const std::vector<double> sweep_values = parse_values(values);

  std::vector<SweepRow> rows = run_sweep(data, config, sweep_param, sweep_values);
  write_sweep_csv(dir / "sweep.csv", sweep_param, rows);

  json frozen = comparison_config_json(config);
  frozen["dataset"] = dataset;
  frozen["param"] = param;
  frozen["values"] = sweep_values;
  freeze_config(dir, "sweep", frozen);

  for (const SweepRow& row : rows) {
    std::cout << sweep_param_name(sweep_param) << '=' << fmt_double(row.value) << ' ';
    if (row.result.ok) {
      std::cout << "q_star " << fmt_double(row.result.report.q_star_avg) << ", failure% "
                << fmt_double(row.result.report.failure_pct) << '\n';
    } else {
      std::cout << "failed (" << row.result.error << ")\n";
    }
  }
  std::cout << "wrote " << (dir / "sweep.csv").string() << '\n';
  return 0;
}

struct IngestOpts {
  std::string dataset, format = "cmapss", out = "run", sensors;
  int discretize = -1;
  double tol = 1e-3;
  int synth_units = 0, synth_states = 10, synth_inputs = 2, synth_dim = 3;
  double synth_sep = 1.0, synth_noise = 0.0625;
  std::uint64_t seed = 0;
};

struct FitOpts {
  std::string dataset, out = "run";
  int n_states = 10, max_epochs = 1000, restarts = 3;
  double tol = 1e-5;
  bool input_blind = false;
  std::uint64_t seed = 0;
};

struct DecodeOpts {
  std::string model, dataset, out = "run", mode = "transition_radius", network;
  int radius = 2;
  double edge_threshold = 1e-3, quantile = 0.25, p_fail = 0.5;
};

struct RulOpts {
  std::string model, dataset, out = "run", input_policy = "hold_last";
  int unit = 0, stride = 10, rollouts = 100, horizon = 500;
  std::uint64_t seed = 0;
};

struct ImportanceOpts {
  std::string model, dataset, out = "run", descriptions;
  double l2 = 1e-3, lr = 0.1;
  int epochs = 5000, top_k = 10;
};

struct PretrainOpts {
  std::string dataset, model, out = "run", system = "srla_raw", expert = "oracle_margin";
  int margin = 10, epochs = 500;
  double rul_threshold = 10.0, lr = 1e-2, c_r = 100.0, c_f = 1000.0, train_ratio = 0.6;
  std::uint64_t seed = 0;
};

struct TrainOpts {
  std::string dataset, model, init, out = "run", system = "srla_raw";
  double gamma = 0.95, lr = 1e-4, loss_threshold = 1e-4, c_r = 100.0, c_f = 1000.0, train_ratio = 0.6;
  int max_episodes = 10000, target_refresh = 100;
  bool replay = false, no_gate = false;
  std::uint64_t seed = 0;
};

struct EvaluateOpts {
  std::string dataset, model, network, out = "run", system = "srla_raw";
  double gamma = 0.95, c_r = 100.0, c_f = 1000.0, train_ratio = 0.6;
  std::uint64_t seed = 0;
};

struct HarnessOpts {
  std::string dataset, out = "run";
  double train_ratio = 0.6, c_r = 100.0, c_f = 1000.0, p_fail = 0.5;
  int n_states = 10, max_episodes = 10000, em_epochs = 1000, em_restarts = 3, radius = 2, margin = 10;
  std::uint64_t seed = 0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"run-to-failure state decoding and maintenance-policy toolkit"};
  app.require_subcommand(1);
  std::function<int()> run;

  // ingest
  {
    auto* sub = app.add_subcommand("ingest", "load or generate a dataset and write the canonical CSV");
    auto opt = std::make_shared<IngestOpts>();
    sub->add_option("--dataset", opt->dataset, "input file (26-column text or canonical CSV)");
    sub->add_option("--format", opt->format, "cmapss|csv")->capture_default_str();
    sub->add_option("--out", opt->out, "output directory")->capture_default_str();
    sub->add_option("--discretize-ops", opt->discretize,
                    "operating-condition clusters: 0 = distinct rounded rows, k>0 = k-means");
    sub->add_option("--discretize-tol", opt->tol, "rounding tolerance")->capture_default_str();
    sub->add_option("--sensors", opt->sensors, "comma-separated sensor include-list");
    sub->add_option("--synthetic-units", opt->synth_units, "generate a synthetic dataset instead");
    sub->add_option("--synthetic-states", opt->synth_states, "")->capture_default_str();
    sub->add_option("--synthetic-inputs", opt->synth_inputs, "")->capture_default_str();
    sub->add_option("--synthetic-dim", opt->synth_dim, "")->capture_default_str();
    sub->add_option("--synthetic-separation", opt->synth_sep, "")->capture_default_str();
    sub->add_option("--synthetic-noise", opt->synth_noise, "")->capture_default_str();
    sub->add_option("--seed", opt->seed, "")->capture_default_str();
    sub->callback([opt, &run] {
      run = [opt] {
        return cmd_ingest(opt->dataset, opt->format, opt->out, opt->discretize, opt->tol, opt->sensors,
                          opt->synth_units, opt->synth_states, opt->synth_inputs, opt->synth_dim,
                          opt->synth_sep, opt->synth_noise, opt->seed);
      };
    });
  }

  // fit-iohmm
  {
    auto* sub = app.add_subcommand("fit-iohmm", "fit the state model on a canonical CSV dataset");
    auto opt = std::make_shared<FitOpts>();
    sub->add_option("--dataset", opt->dataset)->required();
    sub->add_option("--out", opt->out)->capture_default_str();
    sub->add_option("--n-states", opt->n_states)->capture_default_str();
    sub->add_option("--tol", opt->tol)->capture_default_str();
    sub->add_option("--max-epochs", opt->max_epochs)->capture_default_str();
    sub->add_option("--restarts", opt->restarts)->capture_default_str();
    sub->add_flag("--input-blind", opt->input_blind, "ignore operating-condition symbols");
    sub->add_option("--seed", opt->seed)->required();
    sub->callback([opt, &run] {
      run = [opt] {
        return cmd_fit_iohmm(opt->dataset, opt->out, opt->n_states, opt->tol, opt->max_epochs,
                             opt->restarts, opt->input_blind, opt->seed);
      };
    });
  }

  // decode
  {
    auto* sub = app.add_subcommand("decode", "decode states, map health conditions, mark the specialized set");
    auto opt = std::make_shared<DecodeOpts>();
    sub->add_option("--model", opt->model)->required();
    sub->add_option("--dataset", opt->dataset)->required();
    sub->add_option("--out", opt->out)->capture_default_str();
    sub->add_option("--specialized-mode", opt->mode, "transition_radius|value_quantile")
        ->capture_default_str();
    sub->add_option("--radius", opt->radius)->capture_default_str();
    sub->add_option("--edge-threshold", opt->edge_threshold)->capture_default_str();
    sub->add_option("--quantile", opt->quantile)->capture_default_str();
    sub->add_option("--p-fail-threshold", opt->p_fail)->capture_default_str();
    sub->add_option("--network", opt->network, "value network for value_quantile mode");
    sub->callback([opt, &run] {
      run = [opt] {
        return cmd_decode(opt->model, opt->dataset, opt->out, opt->mode, opt->radius, opt->edge_threshold,
                          opt->quantile, opt->p_fail, opt->network);
      };
    });
  }

  // rul
  {
    auto* sub = app.add_subcommand("rul", "Monte-Carlo residual-life trends per unit");
    auto opt = std::make_shared<RulOpts>();
    sub->add_option("--model", opt->model)->required();
    sub->add_option("--dataset", opt->dataset)->required();
    sub->add_option("--out", opt->out)->capture_default_str();
    sub->add_option("--unit", opt->unit, "restrict to one unit id (0 = all)")->capture_default_str();
    sub->add_option("--stride", opt->stride)->capture_default_str();
    sub->add_option("--rollouts", opt->rollouts)->capture_default_str();
    sub->add_option("--horizon", opt->horizon)->capture_default_str();
    sub->add_option("--input-policy", opt->input_policy, "hold_last|empirical")->capture_default_str();
    sub->add_option("--seed", opt->seed)->capture_default_str();
    sub->callback([opt, &run] {
      run = [opt] {
        return cmd_rul(opt->model, opt->dataset, opt->out, opt->unit, opt->stride, opt->rollouts,
                       opt->horizon, opt->input_policy, opt->seed);
      };
    });
  }

  // importance
  {
    auto* sub = app.add_subcommand("importance", "sensor importance per decoded state and failure report");
    auto opt = std::make_shared<ImportanceOpts>();
    sub->add_option("--model", opt->model)->required();
    sub->add_option("--dataset", opt->dataset)->required();
    sub->add_option("--out", opt->out)->capture_default_str();
    sub->add_option("--l2", opt->l2)->capture_default_str();
    sub->add_option("--lr", opt->lr)->capture_default_str();
    sub->add_option("--epochs", opt->epochs)->capture_default_str();
    sub->add_option("--top-k", opt->top_k)->capture_default_str();
    sub->add_option("--descriptions", opt->descriptions, "CSV: feature,symbol,description");
    sub->callback([opt, &run] {
      run = [opt] {
        return cmd_importance(opt->model, opt->dataset, opt->out, opt->l2, opt->lr, opt->epochs, opt->top_k,
                              opt->descriptions);
      };
    });
  }

  // pretrain-bc
  {
    auto* sub = app.add_subcommand("pretrain-bc", "clone an expert policy into an initial network");
    auto opt = std::make_shared<PretrainOpts>();
    sub->add_option("--dataset", opt->dataset)->required();
    sub->add_option("--model", opt->model, "fitted model (required for gamma/gated systems)");
    sub->add_option("--out", opt->out)->capture_default_str();
    sub->add_option("--system", opt->system)->capture_default_str();
    sub->add_option("--expert", opt->expert, "oracle_margin|rul_threshold")->capture_default_str();
    sub->add_option("--margin", opt->margin)->capture_default_str();
    sub->add_option("--rul-threshold", opt->rul_threshold)->capture_default_str();
    sub->add_option("--epochs", opt->epochs)->capture_default_str();
    sub->add_option("--lr", opt->lr)->capture_default_str();
    sub->add_option("--c-r", opt->c_r)->capture_default_str();
    sub->add_option("--c-f", opt->c_f)->capture_default_str();
    sub->add_option("--train-ratio", opt->train_ratio)->capture_default_str();
    sub->add_option("--seed", opt->seed)->required();
    sub->callback([opt, &run] {
      run = [opt] {
        return cmd_pretrain_bc(opt->dataset, opt->model, opt->out, opt->system, opt->expert, opt->margin,
                               opt->rul_threshold, opt->epochs, opt->lr, opt->c_r, opt->c_f,
                               opt->train_ratio, opt->seed);
      };
    });
  }

  // train
  {
    auto* sub = app.add_subcommand("train", "train the value network on the training split");
    auto opt = std::make_shared<TrainOpts>();
    sub->add_option("--dataset", opt->dataset)->required();
    sub->add_option("--model", opt->model, "fitted model (required for gamma/gated systems)");
    sub->add_option("--init", opt->init, "initial network (e.g. cloned expert)");
    sub->add_option("--out", opt->out)->capture_default_str();
    sub->add_option("--system", opt->system)->capture_default_str();
    sub->add_option("--gamma", opt->gamma)->capture_default_str();
    sub->add_option("--lr", opt->lr)->capture_default_str();
    sub->add_option("--max-episodes", opt->max_episodes)->capture_default_str();
    sub->add_option("--loss-threshold", opt->loss_threshold)->capture_default_str();
    sub->add_option("--target-refresh", opt->target_refresh)->capture_default_str();
    sub->add_flag("--replay", opt->replay, "use an experience replay buffer");
    sub->add_flag("--no-gate", opt->no_gate, "train the gated system without the specialized-state gate");
    sub->add_option("--c-r", opt->c_r)->capture_default_str();
    sub->add_option("--c-f", opt->c_f)->capture_default_str();
    sub->add_option("--train-ratio", opt->train_ratio)->capture_default_str();
    sub->add_option("--seed", opt->seed)->required();
    sub->callback([opt, &run] {
      run = [opt] {
        return cmd_train(opt->dataset, opt->model, opt->init, opt->out, opt->system, opt->gamma, opt->lr,
                         opt->max_episodes, opt->loss_threshold, opt->target_refresh, opt->replay,
                         opt->no_gate, opt->c_r, opt->c_f, opt->train_ratio, opt->seed);
      };
    });
  }

  // evaluate
  {
    auto* sub = app.add_subcommand("evaluate", "evaluate a trained network on the test split");
    auto opt = std::make_shared<EvaluateOpts>();
    sub->add_option("--dataset", opt->dataset)->required();
    sub->add_option("--model", opt->model, "fitted model (required for gamma/gated systems)");
    sub->add_option("--network", opt->network)->required();
    sub->add_option("--out", opt->out)->capture_default_str();
    sub->add_option("--system", opt->system)->capture_default_str();
    sub->add_option("--gamma", opt->gamma)->capture_default_str();
    sub->add_option("--c-r", opt->c_r)->capture_default_str();
    sub->add_option("--c-f", opt->c_f)->capture_default_str();
    sub->add_option("--train-ratio", opt->train_ratio)->capture_default_str();
    sub->add_option("--seed", opt->seed)->required();
    sub->callback([opt, &run] {
      run = [opt] {
        return cmd_evaluate(opt->dataset, opt->model, opt->network, opt->out, opt->system, opt->gamma,
                            opt->c_r, opt->c_f, opt->train_ratio, opt->seed);
      };
    });
  }

  auto add_harness_options = [](CLI::App* sub, const std::shared_ptr<HarnessOpts>& opt) {
    sub->add_option("--dataset", opt->dataset)->required();
    sub->add_option("--out", opt->out)->capture_default_str();
    sub->add_option("--train-ratio", opt->train_ratio)->capture_default_str();
    sub->add_option("--n-states", opt->n_states)->capture_default_str();
    sub->add_option("--c-r", opt->c_r)->capture_default_str();
    sub->add_option("--c-f", opt->c_f)->capture_default_str();
    sub->add_option("--max-episodes", opt->max_episodes)->capture_default_str();
    sub->add_option("--em-max-epochs", opt->em_epochs)->capture_default_str();
    sub->add_option("--em-restarts", opt->em_restarts)->capture_default_str();
    sub->add_option("--radius", opt->radius)->capture_default_str();
    sub->add_option("--p-fail-threshold", opt->p_fail)->capture_default_str();
    sub->add_option("--expert-margin", opt->margin)->capture_default_str();
    sub->add_option("--seed", opt->seed)->required();
  };

  // compare
  {
    auto* sub = app.add_subcommand("compare", "train and evaluate several systems on one shared split");
    auto opt = std::make_shared<HarnessOpts>();
    auto systems = std::make_shared<std::string>("raw,raw_plus_ops,hmm_gamma,iohmm_gamma,srla_raw");
    add_harness_options(sub, opt);
    sub->add_option("--systems", *systems, "comma-separated system list")->capture_default_str();
    sub->callback([opt, systems, &run] {
      run = [opt, systems] {
        return cmd_compare(opt->dataset, opt->out, *systems, opt->train_ratio, opt->n_states, opt->c_r,
                           opt->c_f, opt->max_episodes, opt->em_epochs, opt->em_restarts, opt->radius,
                           opt->p_fail, opt->margin, opt->seed);
      };
    });
  }

  // sweep
  {
    auto* sub = app.add_subcommand("sweep", "re-run one system across a parameter range");
    auto opt = std::make_shared<HarnessOpts>();
    auto system = std::make_shared<std::string>("iohmm_gamma");
    auto param = std::make_shared<std::string>("fail_cost");
    auto values = std::make_shared<std::string>("25,500,1000");
    add_harness_options(sub, opt);
    sub->add_option("--system", *system)->capture_default_str();
    sub->add_option("--param", *param, "fail_cost|n_states")->capture_default_str();
    sub->add_option("--values", *values, "comma-separated values")->capture_default_str();
    sub->callback([opt, system, param, values, &run] {
      run = [opt, system, param, values] {
        return cmd_sweep(opt->dataset, opt->out, *system, *param, *values, opt->train_ratio, opt->n_states,
                         opt->c_r, opt->c_f, opt->max_episodes, opt->em_epochs, opt->em_restarts,
                         opt->radius, opt->p_fail, opt->margin, opt->seed);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error[" << e.code() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[InternalError]: " << e.what() << '\n';
    return 1;
  }

  try {
    return run ? run() : 0;
  } catch (const Error& e) {
    std::cerr << "error[" << e.code() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[InternalError]: " << e.what() << '\n';
    return 1;
  }
}
