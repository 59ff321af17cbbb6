#include "srla/env.hpp"

#include <algorithm>
#include <fstream>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {

void EnvConfig::validate() const {
  if (!(c_r > 0.0)) fail("InvalidArgument", "replacement cost must be positive");
  if (!(c_f >= 0.0)) fail("InvalidArgument", "failure penalty must be non-negative");
  if (enable_repair && repair_depth < 1) fail("InvalidArgument", "repair depth must be at least 1");
}

MaintenanceEnv::MaintenanceEnv(std::shared_ptr<const RunToFailureDataset> data, EnvConfig config,
                               std::shared_ptr<FeaturePipeline> pipeline, std::uint64_t seed)
    : data_(std::move(data)), config_(config), pipeline_(std::move(pipeline)), rng_(make_rng(seed, 0)) {
  if (!data_ || data_->units.empty()) fail("EmptyInput", "environment needs at least one unit");
  if (!pipeline_) fail("MissingPrerequisite", "environment needs a feature pipeline");
  config_.validate();
  data_->validate();
}

const UnitTrajectory& MaintenanceEnv::current_unit() const {
  if (unit_idx_ < 0) fail("InvalidArgument", "no active episode");
  return data_->units[static_cast<std::size_t>(unit_idx_)];
}

int MaintenanceEnv::current_failure_cycle() const {
  return static_cast<int>(current_unit().sensors.rows());
}

EnvState MaintenanceEnv::make_state(bool done) const {
  const UnitTrajectory& u = current_unit();
  const Eigen::Index row = t_ - 1;
  EnvState s;
  s.unit_id = u.unit_id;
  s.t = t_;
  s.sensors_raw = u.sensors.row(row).transpose();
  s.ops_raw = u.op_settings.row(row).transpose();
  s.input_symbol = u.input_symbols.empty() ? 0 : u.input_symbols[static_cast<std::size_t>(row)];
  s.done = done;
  return s;
}

EnvState MaintenanceEnv::reset() {
  std::uniform_int_distribution<int> pick(0, n_units() - 1);
  return reset_to_unit(pick(rng_));
}

EnvState MaintenanceEnv::reset_to_unit(int idx) {
  if (idx < 0 || idx >= n_units()) fail("InvalidArgument", cat("unit index ", idx, " out of range"));
  unit_idx_ = idx;
  t_ = 1;
  done_ = false;
  failed_ = false;
  rewards_.clear();
  pipeline_->reset();
  EnvState s = make_state(false);
  s.obs = pipeline_->step(s.sensors_raw, s.ops_raw, s.input_symbol);
  return s;
}

MaintenanceEnv::StepResult MaintenanceEnv::step(Action action) {
  if (done_) fail("InvalidArgument", "step() on a finished episode; call reset first");
  if (action == Action::repair && !config_.enable_repair) {
    fail("InvalidArgument", "repair action is disabled in this environment");
  }
  const int T = current_failure_cycle();

  StepResult out;
  if (t_ == T) {
    // The unit reached its recorded failure cycle in service; no action can
    // avert the penalty at this point.
    out.reward = -(config_.c_r + config_.c_f) / static_cast<double>(T);
    done_ = true;
    failed_ = true;
  } else if (action == Action::replace) {
    out.reward = -config_.c_r / static_cast<double>(T);
    done_ = true;
  } else if (action == Action::repair) {
    out.reward = -config_.c_r / static_cast<double>(T);
    const int back = std::max(1, t_ - config_.repair_depth);
    // Rewinding replays the prefix so filter-based pipelines stay causal.
    rewards_.push_back(out.reward);
    pipeline_->reset();
    EnvState s;
    for (t_ = 1; t_ <= back; ++t_) {
      s = make_state(false);
      s.obs = pipeline_->step(s.sensors_raw, s.ops_raw, s.input_symbol);
    }
    t_ = back;
    out.state = s;
    out.done = false;
    return out;
  } else {
    out.reward = 0.0;
    t_ += 1;
  }

  rewards_.push_back(out.reward);
  out.done = done_;
  out.state = make_state(done_);
  if (!done_) {
    out.state.obs = pipeline_->step(out.state.sensors_raw, out.state.ops_raw, out.state.input_symbol);
  }
  return out;
}

EpisodeStats MaintenanceEnv::stats() const {
  EpisodeStats st;
  st.failed = failed_;
  if (done_ && !failed_ && unit_idx_ >= 0) {
    const int T = current_failure_cycle();
    st.replace_cycle = t_;
    st.remaining_cycles = T - t_;
  }
  KahanSum cost;
  for (double r : rewards_) cost.add(-r);
  st.total_cost = cost.value();
  return st;
}

void write_trace_csv(const std::filesystem::path& file, const std::vector<TraceRow>& rows) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open ", file.string(), " for writing"));
  out << "unit,t,action,reward,done\n";
  for (const TraceRow& r : rows) {
    out << r.unit_id << ',' << r.t << ',' << static_cast<int>(r.action) << ',' << fmt_double(r.reward)
        << ',' << (r.done ? 1 : 0) << '\n';
  }
  if (!out.good()) fail("IoError", cat("write failed for ", file.string()));
}

}  // namespace srla
