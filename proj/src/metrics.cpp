#include "srla/metrics.hpp"

#include <cmath>
#include <fstream>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {

double imc(const RunToFailureDataset& data, double c_r) {
  if (data.units.empty()) fail("EmptyInput", "cost bounds need at least one unit");
  if (!(c_r > 0.0)) fail("InvalidArgument", "replacement cost must be positive");
  long long denom = 0;
  for (const UnitTrajectory& u : data.units) {
    const long long T = u.sensors.rows();
    if (T <= 1) fail("InvalidArgument", cat("unit ", u.unit_id, " has no pre-failure cycle"));
    denom += T - 1;
  }
  return static_cast<double>(data.units.size()) * c_r / static_cast<double>(denom);
}

double cmc(const RunToFailureDataset& data, double c_r, double c_f) {
  if (data.units.empty()) fail("EmptyInput", "cost bounds need at least one unit");
  if (!(c_r > 0.0)) fail("InvalidArgument", "replacement cost must be positive");
  if (!(c_f >= 0.0)) fail("InvalidArgument", "failure penalty must be non-negative");
  long long denom = 0;
  for (const UnitTrajectory& u : data.units) denom += u.sensors.rows();
  return static_cast<double>(data.units.size()) * (c_r + c_f) / static_cast<double>(denom);
}

MetricsReport evaluate_policy(MaintenanceEnv& env, Policy& policy, double gamma) {
  const EnvConfig& cfg = env.config();
  MetricsReport rep;
  rep.n_units = env.n_units();
  rep.imc = imc(env.data(), cfg.c_r);
  rep.cmc = cmc(env.data(), cfg.c_r, cfg.c_f);

  KahanSum total_cost;
  long long total_cycles = 0;
  KahanSum remaining;
  int n_replaced = 0;
  KahanSum returns;

  for (int i = 0; i < rep.n_units; ++i) {
    EnvState s = env.reset_to_unit(i);
    policy.begin_episode();
    bool done = false;
    KahanSum discounted;
    double g = 1.0;
    while (!done) {
      Action a = Action::hold;
      try {
        a = policy.act(env, s);
      } catch (const std::exception& e) {
        fail("PolicyError", cat("policy raised on unit ", s.unit_id, " at cycle ", s.t, ": ", e.what()));
      }
      MaintenanceEnv::StepResult sr = env.step(a);
      discounted.add(g * sr.reward);
      g *= gamma;
      done = sr.done;
      s = sr.state;
    }
    const EpisodeStats st = env.stats();
    if (st.failed) {
      rep.n_failed += 1;
      total_cost.add(cfg.c_r + cfg.c_f);
      total_cycles += env.current_failure_cycle();
    } else {
      total_cost.add(cfg.c_r);
      total_cycles += *st.replace_cycle;
      remaining.add(static_cast<double>(*st.remaining_cycles));
      n_replaced += 1;
    }
    returns.add(std::abs(discounted.value()));
  }

  rep.q_star_avg = total_cost.value() / static_cast<double>(total_cycles);
  rep.imc_over_q = rep.imc / rep.q_star_avg;
  rep.failure_pct = 100.0 * static_cast<double>(rep.n_failed) / static_cast<double>(rep.n_units);
  rep.avg_remaining_cycles = n_replaced > 0 ? remaining.value() / static_cast<double>(n_replaced) : 0.0;
  rep.empirical_return_avg = returns.value() / static_cast<double>(rep.n_units);
  return rep;
}

void write_metrics_csv(const std::filesystem::path& file, const std::vector<std::string>& row_labels,
                       const std::vector<MetricsReport>& rows) {
  if (row_labels.size() != rows.size()) {
    fail("DimensionMismatch", "one label per metrics row required");
  }
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open ", file.string(), " for writing"));
  out << "system,q_star_avg,imc,cmc,imc_over_q,failure_pct,avg_remaining_cycles,empirical_return_avg,"
         "n_units,n_failed\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const MetricsReport& r = rows[i];
    out << row_labels[i] << ',' << fmt_double(r.q_star_avg) << ',' << fmt_double(r.imc) << ','
        << fmt_double(r.cmc) << ',' << fmt_double(r.imc_over_q) << ',' << fmt_double(r.failure_pct) << ','
        << fmt_double(r.avg_remaining_cycles) << ',' << fmt_double(r.empirical_return_avg) << ','
        << r.n_units << ',' << r.n_failed << '\n';
  }
  if (!out.good()) fail("IoError", cat("write failed for ", file.string()));
}

}  // namespace srla
