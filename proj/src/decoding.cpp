#include "srla/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {

std::vector<int> unit_inputs(const UnitTrajectory& unit) {
  if (!unit.input_symbols.empty()) return unit.input_symbols;
  return std::vector<int>(unit.cycles(), 0);
}

std::set<int> decode_failure_states(const IohmmParams& params, const RunToFailureDataset& train) {
  if (train.units.empty()) fail("InvalidArgument", "no units to decode");
  std::set<int> failure;
  for (const auto& u : train.units) {
    ViterbiPath path = viterbi(params, unit_inputs(u), u.sensors);
    failure.insert(path.states.back());
  }
  return failure;
}

std::set<int> build_specialized_set(const IohmmParams& params, const std::set<int>& failure_states,
                                    const SpecializedConfig& config,
                                    const std::optional<Eigen::VectorXd>& state_values) {
  if (failure_states.empty()) fail("EmptyInput", "failure state set is empty");
  for (int s : failure_states) {
    if (s < 0 || s >= params.n_states) fail("InvalidArgument", cat("failure state ", s, " out of range"));
  }

  if (config.mode == SpecializedConfig::Mode::value_quantile) {
    if (!state_values.has_value()) fail("MissingPrerequisite", "value-quantile mode needs per-state values");
    if (state_values->size() != params.n_states) fail("DimensionMismatch", "state value vector size mismatch");
    if (!(config.quantile > 0.0 && config.quantile <= 1.0)) {
      fail("InvalidArgument", cat("quantile must lie in (0,1], got ", config.quantile));
    }
    const int n = params.n_states;
    int k = std::clamp(static_cast<int>(std::llround(config.quantile * n)), 1, n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return (*state_values)(a) < (*state_values)(b); });
    std::set<int> out = failure_states;
    for (int i = 0; i < k; ++i) out.insert(order[i]);
    return out;
  }

  if (config.radius < 0) fail("InvalidArgument", cat("radius must be non-negative, got ", config.radius));

  // Union transition graph over all inputs; BFS on reversed edges from the
  // failure set gives the hop distance to failure.
  const int n = params.n_states;
  std::vector<std::vector<int>> rev(n);
  for (int u = 0; u < params.n_inputs; ++u) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && params.trans[u](i, j) > config.edge_threshold) rev[j].push_back(i);
      }
    }
  }
  std::vector<int> dist(n, -1);
  std::deque<int> queue;
  for (int s : failure_states) {
    dist[s] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    int s = queue.front();
    queue.pop_front();
    if (dist[s] >= config.radius) continue;
    for (int p : rev[s]) {
      if (dist[p] < 0) {
        dist[p] = dist[s] + 1;
        queue.push_back(p);
      }
    }
  }
  std::set<int> out;
  for (int s = 0; s < n; ++s) {
    if (dist[s] >= 0 && dist[s] <= config.radius) out.insert(s);
  }
  return out;
}

std::string ConditionMap::label_of(int state) const {
  for (const auto& band : bands) {
    for (int s : band.states) {
      if (s == state) return band.label;
    }
  }
  return "unobserved";
}

ConditionMap map_states_to_conditions(const std::vector<ViterbiPath>& paths,
                                      const std::vector<int>& unit_lengths, int n_states,
                                      const ConditionMapConfig& config) {
  if (paths.empty()) fail("InvalidArgument", "no decoded paths");
  if (paths.size() != unit_lengths.size()) fail("DimensionMismatch", "path/length count mismatch");
  if (config.bands.empty()) fail("InvalidArgument", "no condition bands configured");
  for (std::size_t b = 1; b < config.bands.size(); ++b) {
    if (config.bands[b].second <= config.bands[b - 1].second) {
      fail("InvalidArgument", "band boundaries must be strictly increasing");
    }
  }
  if (std::abs(config.bands.back().second - 1.0) > 1e-12) {
    fail("InvalidArgument", "last band boundary must be 1");
  }

  std::vector<std::vector<double>> positions(n_states);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const int T = unit_lengths[p];
    if (static_cast<int>(paths[p].states.size()) != T) fail("DimensionMismatch", "path length mismatch");
    for (int t = 0; t < T; ++t) {
      const int s = paths[p].states[t];
      if (s < 0 || s >= n_states) fail("InvalidArgument", cat("decoded state ", s, " out of range"));
      positions[s].push_back(static_cast<double>(t + 1) / static_cast<double>(T));
    }
  }

  auto quantile = [](std::vector<double>& v, double q) {
    const double idx = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (idx - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };

  struct Entry {
    int state;
    double median;
    double iqr;
  };
  std::vector<Entry> entries;
  for (int s = 0; s < n_states; ++s) {
    if (positions[s].empty()) continue;
    std::sort(positions[s].begin(), positions[s].end());
    Entry e;
    e.state = s;
    e.median = quantile(positions[s], 0.5);
    e.iqr = quantile(positions[s], 0.75) - quantile(positions[s], 0.25);
    entries.push_back(e);
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.median < b.median; });

  ConditionMap map;
  double lo = 0.0;
  for (const auto& [label, hi] : config.bands) {
    ConditionBand band;
    band.label = label;
    band.lo_frac = lo;
    band.hi_frac = hi;
    map.bands.push_back(band);
    lo = hi;
  }
  for (const auto& e : entries) {
    if (e.iqr > config.dispersion_flag_iqr) map.dispersed = true;
    for (auto& band : map.bands) {  // bands tile [0,1]; first matching bound wins
      const bool last = &band == &map.bands.back();
      if (e.median < band.hi_frac || (last && e.median <= band.hi_frac)) {
        band.states.push_back(e.state);
        break;
      }
    }
  }
  return map;
}

double posterior_failure_mass(const Eigen::Ref<const Eigen::VectorXd>& gamma_row,
                              const std::set<int>& failure_states) {
  double mass = 0.0;
  for (int s : failure_states) {
    if (s < 0 || s >= gamma_row.size()) fail("InvalidArgument", cat("failure state ", s, " out of range"));
    mass += gamma_row(s);
  }
  return mass;
}

void StateAnnotation::validate() const {
  if (n_states < 2) fail("InvariantViolation", "annotation needs at least 2 states");
  if (failure_states.empty()) fail("InvariantViolation", "annotation has no failure states");
  for (int s : failure_states) {
    if (s < 0 || s >= n_states) fail("InvariantViolation", cat("failure state ", s, " out of range"));
    if (specialized.find(s) == specialized.end()) {
      fail("InvariantViolation", cat("failure state ", s, " missing from the specialized set"));
    }
  }
  for (int s : specialized) {
    if (s < 0 || s >= n_states) fail("InvariantViolation", cat("specialized state ", s, " out of range"));
  }
  if (!(p_fail_threshold > 0.0 && p_fail_threshold <= 1.0)) {
    fail("InvariantViolation", "posterior failure threshold must lie in (0,1]");
  }
}

StateAnnotation annotate_states(const IohmmParams& params, const RunToFailureDataset& train,
                                const SpecializedConfig& config, double p_fail_threshold,
                                const std::optional<Eigen::VectorXd>& state_values) {
  StateAnnotation ann;
  ann.n_states = params.n_states;
  ann.failure_states = decode_failure_states(params, train);
  ann.specialized = build_specialized_set(params, ann.failure_states, config, state_values);
  ann.p_fail_threshold = p_fail_threshold;

  std::vector<ViterbiPath> paths;
  std::vector<int> lengths;
  for (const auto& u : train.units) {
    paths.push_back(viterbi(params, unit_inputs(u), u.sensors));
    lengths.push_back(u.cycles());
  }
  ann.conditions = map_states_to_conditions(paths, lengths, params.n_states);
  ann.validate();
  return ann;
}

void write_decode_csv(const std::filesystem::path& file, const RunToFailureDataset& data,
                      const std::vector<ViterbiPath>& paths, const ConditionMap& conditions) {
  if (data.units.size() != paths.size()) fail("DimensionMismatch", "unit/path count mismatch");
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open for writing: ", file.string()));
  out << "unit,cycle,viterbi_state,condition_label\n";
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    const auto& u = data.units[i];
    for (int t = 0; t < u.cycles(); ++t) {
      out << u.unit_id << ',' << (t + 1) << ',' << paths[i].states[t] << ','
          << conditions.label_of(paths[i].states[t]) << '\n';
    }
  }
}

}  // namespace srla
