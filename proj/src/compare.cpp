#include "srla/compare.hpp"

#include <fstream>
#include <map>
#include <utility>

#include "srla/decoding.hpp"
#include "srla/error.hpp"
#include "srla/normalizer.hpp"
#include "srla/util.hpp"

namespace srla {

const char* sweep_param_name(SweepParam p) {
  return p == SweepParam::fail_cost ? "fail_cost" : "n_states";
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "fail_cost" || name == "c_f") return SweepParam::fail_cost;
  if (name == "n_states" || name == "states") return SweepParam::n_states;
  fail("InvalidArgument", cat("unknown sweep parameter '", name, "'"));
}

namespace {

// Split, normalizers, and fitted models shared across systems and sweep
// points; models are keyed by state count so only parameters that change them
// trigger a refit.
struct Workspace {
  std::shared_ptr<const RunToFailureDataset> train;
  std::shared_ptr<const RunToFailureDataset> test;
  RunToFailureDataset train_mm;  // model-space (minmax) copy for fitting and decoding
  std::shared_ptr<const NormalizationSpec> mm_s;
  std::shared_ptr<const NormalizationSpec> z_s;
  std::shared_ptr<const NormalizationSpec> z_so;
  std::uint64_t seed = 0;
  EmConfig em{};
  std::map<int, std::shared_ptr<const IohmmParams>> iohmm_cache;
  std::map<int, std::shared_ptr<const IohmmParams>> hmm_cache;

  Workspace(const RunToFailureDataset& data, const ComparisonConfig& config) {
    auto [tr, te] = split_units(data, config.train_ratio, config.seed);
    train = std::make_shared<RunToFailureDataset>(std::move(tr));
    test = std::make_shared<RunToFailureDataset>(std::move(te));
    mm_s = std::make_shared<NormalizationSpec>(fit_normalizer(*train, NormMode::minmax, FeatureSet::sensors));
    z_s = std::make_shared<NormalizationSpec>(fit_normalizer(*train, NormMode::zscore, FeatureSet::sensors));
    z_so = std::make_shared<NormalizationSpec>(
        fit_normalizer(*train, NormMode::zscore, FeatureSet::sensors_and_ops));
    train_mm = apply_normalizer(*mm_s, *train);
    seed = config.seed;
    em = config.em;
    em.seed = config.seed;
  }

  std::shared_ptr<const IohmmParams> get_iohmm(int n_states) {
    auto it = iohmm_cache.find(n_states);
    if (it != iohmm_cache.end()) return it->second;
    EmFitResult fit = fit_em(train_mm, n_states, em);
    auto p = std::make_shared<const IohmmParams>(std::move(fit.params));
    iohmm_cache.emplace(n_states, p);
    return p;
  }

  std::shared_ptr<const IohmmParams> get_hmm(int n_states) {
    auto it = hmm_cache.find(n_states);
    if (it != hmm_cache.end()) return it->second;
    RunToFailureDataset blind = train_mm;
    for (UnitTrajectory& u : blind.units) u.input_symbols.clear();
    EmConfig cfg = em;
    cfg.n_inputs = 1;
    EmFitResult fit = fit_em(blind, n_states, cfg);
    auto p = std::make_shared<const IohmmParams>(std::move(fit.params));
    hmm_cache.emplace(n_states, p);
    return p;
  }
};

SystemResult run_single_system(Workspace& ws, SystemMode mode, const ComparisonConfig& config) {
  SystemResult row;
  row.label = system_mode_name(mode);

  std::shared_ptr<const IohmmParams> model;
  std::shared_ptr<const NormalizationSpec> norm;
  switch (mode) {
    case SystemMode::raw: norm = ws.z_s; break;
    case SystemMode::raw_plus_ops: norm = ws.z_so; break;
    case SystemMode::hmm_gamma:
      norm = ws.mm_s;
      model = ws.get_hmm(config.n_states);
      break;
    case SystemMode::iohmm_gamma:
      norm = ws.mm_s;
      model = ws.get_iohmm(config.n_states);
      break;
    case SystemMode::srla_raw:
      norm = ws.mm_s;
      model = ws.get_iohmm(config.n_states);
      break;
  }

  MaintenanceEnv train_env(ws.train, config.env, make_pipeline(mode, norm, model), ws.seed);
  MaintenanceEnv test_env(ws.test, config.env, make_pipeline(mode, norm, model), ws.seed);

  if (mode == SystemMode::srla_raw) {
    OracleMarginExpert expert(config.expert_margin);
    BcConfig bc = config.bc;
    bc.seed = ws.seed;
    BcPretrainResult cloned = pretrain_bc(train_env, &test_env, expert, bc, 2);
    row.bc_train_agreement = cloned.train_agreement;
    row.bc_holdout_agreement = cloned.holdout_agreement;

    std::optional<Eigen::VectorXd> values;
    if (config.specialized.mode == SpecializedConfig::Mode::value_quantile) {
      auto feat = make_pipeline(SystemMode::srla_raw, ws.mm_s);
      const std::vector<double> v =
          mean_state_values(*model, *ws.mm_s, *feat, cloned.net, *ws.train);
      values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    StateAnnotation annotation =
        annotate_states(*model, ws.train_mm, config.specialized, config.p_fail_threshold, values);

    SrlaGateConfig gate;
    gate.model = model;
    gate.norm = ws.mm_s;
    gate.annotation = annotation;
    gate.safety_net = false;
    TrainResult trained = train_dqn(train_env, config.agent, ws.seed, &cloned.net, &gate);
    row.train_episodes = trained.episodes;
    row.train_converged = trained.converged;

    SrlaPolicy policy(model, ws.mm_s, annotation, std::move(trained.net), 0.0, ws.seed);
    row.report = evaluate_policy(test_env, policy, config.agent.gamma);
    row.gate_log = policy.gate_log();
    row.annotation = std::move(annotation);
  } else {
    TrainResult trained = train_dqn(train_env, config.agent, ws.seed);
    row.train_episodes = trained.episodes;
    row.train_converged = trained.converged;
    GreedyQPolicy policy(std::move(trained.net));
    row.report = evaluate_policy(test_env, policy, config.agent.gamma);
  }
  row.ok = true;
  return row;
}

SystemResult guarded_run(Workspace& ws, SystemMode mode, const ComparisonConfig& config) {
  try {
    return run_single_system(ws, mode, config);
  } catch (const Error& e) {
    SystemResult row;
    row.label = system_mode_name(mode);
    row.error = cat(e.code(), ": ", e.what());
    return row;
  } catch (const std::exception& e) {
    SystemResult row;
    row.label = system_mode_name(mode);
    row.error = cat("InternalError: ", e.what());
    return row;
  }
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

ComparisonResult run_comparison(const RunToFailureDataset& data, const ComparisonConfig& config) {
  if (config.systems.empty()) fail("InvalidArgument", "no systems requested");
  config.env.validate();
  config.agent.validate();

  Workspace ws(data, config);
  ComparisonResult result;
  for (const UnitTrajectory& u : ws.train->units) result.train_unit_ids.push_back(u.unit_id);
  for (const UnitTrajectory& u : ws.test->units) result.test_unit_ids.push_back(u.unit_id);
  result.imc = imc(*ws.test, config.env.c_r);
  result.cmc = cmc(*ws.test, config.env.c_r, config.env.c_f);

  for (SystemMode mode : config.systems) {
    result.rows.push_back(guarded_run(ws, mode, config));
  }
  return result;
}

std::vector<SweepRow> run_sweep(const RunToFailureDataset& data, const ComparisonConfig& config,
                                SweepParam param, const std::vector<double>& values) {
  if (config.systems.empty()) fail("InvalidArgument", "no systems requested");
  if (values.empty()) fail("InvalidArgument", "sweep needs at least one value");
  config.env.validate();
  config.agent.validate();

  Workspace ws(data, config);
  const SystemMode mode = config.systems.front();

  std::vector<SweepRow> rows;
  for (double v : values) {
    ComparisonConfig point = config;
    if (param == SweepParam::fail_cost) {
      if (!(v >= 0.0)) fail("InvalidArgument", "failure penalty must be non-negative");
      point.env.c_f = v;
    } else {
      const int n = static_cast<int>(v);
      if (n < 2 || static_cast<double>(n) != v) {
        fail("InvalidArgument", cat("state count must be an integer >= 2, got ", fmt_double(v)));
      }
      point.n_states = n;
    }
    SweepRow row;
    row.value = v;
    row.result = guarded_run(ws, mode, point);
    row.imc = imc(*ws.test, point.env.c_r);
    row.cmc = cmc(*ws.test, point.env.c_r, point.env.c_f);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_comparison_csv(const std::filesystem::path& file, const ComparisonResult& result) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open ", file.string(), " for writing"));
  out << "system,q_star_avg,imc,cmc,imc_over_q,failure_pct,avg_remaining_cycles,empirical_return_avg,"
         "n_units,n_failed,train_episodes,train_converged,error\n";
  for (const SystemResult& r : result.rows) {
    const MetricsReport& m = r.report;
    out << r.label << ',';
    if (r.ok) {
      out << fmt_double(m.q_star_avg) << ',' << fmt_double(m.imc) << ',' << fmt_double(m.cmc) << ','
          << fmt_double(m.imc_over_q) << ',' << fmt_double(m.failure_pct) << ','
          << fmt_double(m.avg_remaining_cycles) << ',' << fmt_double(m.empirical_return_avg) << ','
          << m.n_units << ',' << m.n_failed << ',' << r.train_episodes << ',' << (r.train_converged ? 1 : 0)
          << ',';
    } else {
      out << ",,,,,,,,,,";
    }
    out << csv_escape(r.error) << '\n';
  }
  if (!out.good()) fail("IoError", cat("write failed for ", file.string()));
}

void write_sweep_csv(const std::filesystem::path& file, SweepParam param, const std::vector<SweepRow>& rows) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open ", file.string(), " for writing"));
  out << "param,value,system,q_star_avg,imc,cmc,imc_over_q,failure_pct,avg_remaining_cycles,"
         "train_episodes,train_converged,error\n";
  for (const SweepRow& row : rows) {
    const SystemResult& r = row.result;
    const MetricsReport& m = r.report;
    out << sweep_param_name(param) << ',' << fmt_double(row.value) << ',' << r.label << ',';
    if (r.ok) {
      out << fmt_double(m.q_star_avg) << ',' << fmt_double(m.imc) << ',' << fmt_double(m.cmc) << ','
          << fmt_double(m.imc_over_q) << ',' << fmt_double(m.failure_pct) << ','
          << fmt_double(m.avg_remaining_cycles) << ',' << r.train_episodes << ','
          << (r.train_converged ? 1 : 0) << ',';
    } else {
      out << ",,,,,,,,";
    }
    out << csv_escape(r.error) << '\n';
  }
  if (!out.good()) fail("IoError", cat("write failed for ", file.string()));
}

}  // namespace srla
