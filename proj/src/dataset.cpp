#include "srla/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {
namespace {

constexpr int kCmapssOpCount = 3;
constexpr int kCmapssSensorCount = 21;
constexpr int kCmapssColumns = 2 + kCmapssOpCount + kCmapssSensorCount;

double parse_number(const std::string& token, const std::filesystem::path& file, std::size_t line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    fail("ParseError", cat(file.string(), ":", line_no, ": non-numeric field '", token, "'"));
  }
  return value;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> split_whitespace(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ' ' || c == '\t' || c == '\r') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct RawRow {
  int unit;
  int cycle;
  int input = -1;  // -1: no input column present
  std::vector<double> ops;
  std::vector<double> sensors;
};

// Groups parsed rows into per-unit trajectories; enforces cycle contiguity.
RunToFailureDataset assemble(std::vector<RawRow>& rows, std::vector<std::string> op_names,
                             std::vector<std::string> sensor_names) {
  RunToFailureDataset data;
  data.op_setting_names = std::move(op_names);
  data.sensor_names = std::move(sensor_names);

  std::map<int, std::vector<RawRow*>> by_unit;
  for (auto& r : rows) by_unit[r.unit].push_back(&r);

  for (auto& [unit_id, unit_rows] : by_unit) {
    std::sort(unit_rows.begin(), unit_rows.end(),
              [](const RawRow* a, const RawRow* b) { return a->cycle < b->cycle; });
    for (std::size_t i = 0; i < unit_rows.size(); ++i) {
      int expect = static_cast<int>(i) + 1;
      if (unit_rows[i]->cycle != expect) {
        if (i > 0 && unit_rows[i]->cycle == unit_rows[i - 1]->cycle) {
          fail("ParseError", cat("unit ", unit_id, ": duplicate cycle ", unit_rows[i]->cycle));
        }
        fail("ParseError", cat("unit ", unit_id, ": cycle gap, expected cycle ", expect, " but found ",
                               unit_rows[i]->cycle));
      }
    }
    UnitTrajectory traj;
    traj.unit_id = unit_id;
    const int T = static_cast<int>(unit_rows.size());
    traj.sensors.resize(T, static_cast<int>(data.sensor_names.size()));
    traj.op_settings.resize(T, static_cast<int>(data.op_setting_names.size()));
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < traj.sensors.cols(); ++j) traj.sensors(t, j) = unit_rows[t]->sensors[j];
      for (int j = 0; j < traj.op_settings.cols(); ++j) traj.op_settings(t, j) = unit_rows[t]->ops[j];
    }
    if (T > 0 && unit_rows[0]->input >= 0) {
      traj.input_symbols.resize(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) {
        if (unit_rows[t]->input < 0) {
          fail("ParseError", cat("unit ", unit_id, ": input symbol missing at cycle ", t + 1));
        }
        traj.input_symbols[static_cast<std::size_t>(t)] = unit_rows[t]->input;
      }
    }
    data.units.push_back(std::move(traj));
  }
  data.validate();
  return data;
}

RunToFailureDataset load_cmapss_txt(const std::filesystem::path& file) {
  std::ifstream in(file);
  std::string line;
  std::vector<RawRow> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (static_cast<int>(fields.size()) != kCmapssColumns) {
      fail("ParseError", cat(file.string(), ":", line_no, ": expected ", kCmapssColumns,
                             " columns, found ", fields.size()));
    }
    RawRow r;
    r.unit = static_cast<int>(parse_number(fields[0], file, line_no));
    r.cycle = static_cast<int>(parse_number(fields[1], file, line_no));
    for (int j = 0; j < kCmapssOpCount; ++j) r.ops.push_back(parse_number(fields[2 + j], file, line_no));
    for (int j = 0; j < kCmapssSensorCount; ++j) {
      r.sensors.push_back(parse_number(fields[2 + kCmapssOpCount + j], file, line_no));
    }
    rows.push_back(std::move(r));
  }
  std::vector<std::string> op_names, sensor_names;
  for (int j = 1; j <= kCmapssOpCount; ++j) op_names.push_back("op_" + std::to_string(j));
  for (int j = 1; j <= kCmapssSensorCount; ++j) sensor_names.push_back("s_" + std::to_string(j));
  return assemble(rows, std::move(op_names), std::move(sensor_names));
}

RunToFailureDataset load_csv(const std::filesystem::path& file, const std::string& op_prefix,
                             const std::string& sensor_prefix) {
  std::ifstream in(file);
  std::string line;
  if (!std::getline(in, line)) fail("ParseError", cat(file.string(), ": empty file"));
  auto header = split_fields(line, ',');
  for (auto& h : header) {
    while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
  }

  int unit_col = -1, cycle_col = -1, input_col = -1;
  std::vector<std::pair<int, std::string>> op_cols, sensor_cols;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    const std::string& h = header[j];
    if (h == "unit") {
      unit_col = j;
    } else if (h == "cycle") {
      cycle_col = j;
    } else if (h == "input") {
      input_col = j;
    } else if (h.rfind(op_prefix, 0) == 0) {
      op_cols.emplace_back(j, h);
    } else if (h.rfind(sensor_prefix, 0) == 0) {
      sensor_cols.emplace_back(j, h);
    }
    // Other columns are annotation and ignored.
  }
  if (unit_col < 0 || cycle_col < 0) {
    fail("ParseError", cat(file.string(), ": header must contain 'unit' and 'cycle' columns"));
  }

  std::vector<RawRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, ',');
    if (fields.size() != header.size()) {
      fail("ParseError", cat(file.string(), ":", line_no, ": expected ", header.size(),
                             " columns, found ", fields.size()));
    }
    RawRow r;
    r.unit = static_cast<int>(parse_number(fields[unit_col], file, line_no));
    r.cycle = static_cast<int>(parse_number(fields[cycle_col], file, line_no));
    if (input_col >= 0) r.input = static_cast<int>(parse_number(fields[input_col], file, line_no));
    for (auto& [j, name] : op_cols) r.ops.push_back(parse_number(fields[j], file, line_no));
    for (auto& [j, name] : sensor_cols) r.sensors.push_back(parse_number(fields[j], file, line_no));
    rows.push_back(std::move(r));
  }
  std::vector<std::string> op_names, sensor_names;
  for (auto& [j, name] : op_cols) op_names.push_back(name);
  for (auto& [j, name] : sensor_cols) sensor_names.push_back(name);
  return assemble(rows, std::move(op_names), std::move(sensor_names));
}

}  // namespace

std::size_t RunToFailureDataset::total_cycles() const {
  std::size_t n = 0;
  for (const auto& u : units) n += static_cast<std::size_t>(u.cycles());
  return n;
}

bool RunToFailureDataset::has_input_symbols() const {
  return !units.empty() && !units.front().input_symbols.empty();
}

int RunToFailureDataset::input_alphabet_size() const {
  int max_sym = 0;
  for (const auto& u : units) {
    for (int s : u.input_symbols) max_sym = std::max(max_sym, s);
  }
  return max_sym + 1;
}

const UnitTrajectory& RunToFailureDataset::unit_by_id(int unit_id) const {
  for (const auto& u : units) {
    if (u.unit_id == unit_id) return u;
  }
  fail("InvalidArgument", cat("unknown unit id ", unit_id));
}

void RunToFailureDataset::validate() const {
  std::set<int> seen;
  const bool with_input = has_input_symbols();
  for (const auto& u : units) {
    if (u.input_symbols.empty() == with_input) {
      fail("InvariantViolation",
           cat("unit ", u.unit_id, ": input symbols must be present on all units or none"));
    }
    if (!seen.insert(u.unit_id).second) fail("InvariantViolation", cat("duplicate unit id ", u.unit_id));
    if (u.cycles() < 2) fail("InvariantViolation", cat("unit ", u.unit_id, ": needs at least 2 cycles, has ", u.cycles()));
    if (u.sensors.cols() != sensor_dim()) {
      fail("InvariantViolation", cat("unit ", u.unit_id, ": sensor dimension mismatch"));
    }
    if (u.op_settings.rows() != u.sensors.rows()) {
      fail("InvariantViolation", cat("unit ", u.unit_id, ": op-setting row count mismatch"));
    }
    if (u.op_settings.cols() != op_dim()) {
      fail("InvariantViolation", cat("unit ", u.unit_id, ": op-setting dimension mismatch"));
    }
    if (!u.input_symbols.empty() && static_cast<int>(u.input_symbols.size()) != u.cycles()) {
      fail("InvariantViolation", cat("unit ", u.unit_id, ": input symbol count mismatch"));
    }
    for (int s : u.input_symbols) {
      if (s < 0) fail("InvariantViolation", cat("unit ", u.unit_id, ": negative input symbol"));
    }
    if (!u.sensors.allFinite() || !u.op_settings.allFinite()) {
      fail("InvariantViolation", cat("unit ", u.unit_id, ": non-finite readings"));
    }
  }
}

RunToFailureDataset load_run_to_failure(const std::filesystem::path& file, DataFormat format,
                                        const std::string& op_prefix, const std::string& sensor_prefix) {
  if (!std::filesystem::exists(file)) fail("DatasetNotFound", cat("dataset file not found: ", file.string()));
  switch (format) {
    case DataFormat::cmapss_txt:
      return load_cmapss_txt(file);
    case DataFormat::csv:
      return load_csv(file, op_prefix, sensor_prefix);
  }
  fail("InvalidArgument", "unknown dataset format");
}

void save_csv(const RunToFailureDataset& data, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open for writing: ", file.string()));
  const bool with_input = data.has_input_symbols();
  out << "unit,cycle";
  if (with_input) out << ",input";
  for (const auto& n : data.op_setting_names) out << ',' << n;
  for (const auto& n : data.sensor_names) out << ',' << n;
  out << '\n';
  for (const auto& u : data.units) {
    for (int t = 0; t < u.cycles(); ++t) {
      out << u.unit_id << ',' << (t + 1);
      if (with_input) out << ',' << u.input_symbols[static_cast<std::size_t>(t)];
      for (int j = 0; j < u.op_settings.cols(); ++j) out << ',' << fmt_double(u.op_settings(t, j));
      for (int j = 0; j < u.sensors.cols(); ++j) out << ',' << fmt_double(u.sensors(t, j));
      out << '\n';
    }
  }
}

RunToFailureDataset select_sensors(const RunToFailureDataset& data, const std::vector<std::string>& names) {
  std::vector<int> idx;
  for (const auto& n : names) {
    auto it = std::find(data.sensor_names.begin(), data.sensor_names.end(), n);
    if (it == data.sensor_names.end()) fail("InvalidArgument", cat("unknown sensor column '", n, "'"));
    idx.push_back(static_cast<int>(it - data.sensor_names.begin()));
  }
  if (idx.empty()) fail("InvalidArgument", "sensor include-list is empty");
  RunToFailureDataset out = data;
  out.sensor_names = names;
  for (auto& u : out.units) {
    Eigen::MatrixXd sel(u.sensors.rows(), static_cast<int>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) sel.col(static_cast<int>(j)) = u.sensors.col(idx[j]);
    u.sensors = std::move(sel);
  }
  return out;
}

namespace {

Eigen::MatrixXd collect_op_rows(const RunToFailureDataset& data) {
  Eigen::MatrixXd rows(static_cast<int>(data.total_cycles()), data.op_dim());
  int r = 0;
  for (const auto& u : data.units) {
    for (int t = 0; t < u.cycles(); ++t) rows.row(r++) = u.op_settings.row(t);
  }
  return rows;
}

// Lexicographic comparison of centroid rows; defines the symbol order.
bool row_less(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  for (int j = 0; j < a.size(); ++j) {
    if (a(j) < b(j)) return true;
    if (a(j) > b(j)) return false;
  }
  return false;
}

DiscretizationResult discretize_by_rounding(const RunToFailureDataset& data, double tol) {
  std::map<std::vector<long long>, std::vector<int>> groups;  // rounded key -> flat row ids
  Eigen::MatrixXd rows = collect_op_rows(data);
  for (int r = 0; r < rows.rows(); ++r) {
    std::vector<long long> key(rows.cols());
    for (int j = 0; j < rows.cols(); ++j) key[j] = std::llround(rows(r, j) / tol);
    groups[key].push_back(r);
  }
  const int k = static_cast<int>(groups.size());
  Eigen::MatrixXd centroids(k, rows.cols());
  std::vector<int> symbol_of_row(rows.rows());
  int sym = 0;
  for (auto& [key, members] : groups) {  // std::map iterates keys lexicographically
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(rows.cols());
    for (int r : members) c += rows.row(r);
    centroids.row(sym) = c / static_cast<double>(members.size());
    for (int r : members) symbol_of_row[r] = sym;
    ++sym;
  }

  DiscretizationResult res;
  res.centroids = centroids;
  res.data = data;
  int r = 0;
  for (auto& u : res.data.units) {
    u.input_symbols.assign(u.cycles(), 0);
    for (int t = 0; t < u.cycles(); ++t) u.input_symbols[t] = symbol_of_row[r++];
  }
  return res;
}

DiscretizationResult discretize_by_kmeans(const RunToFailureDataset& data, int k, double tol,
                                          std::uint64_t seed) {
  Eigen::MatrixXd rows = collect_op_rows(data);
  std::set<std::vector<long long>> distinct;
  for (int r = 0; r < rows.rows(); ++r) {
    std::vector<long long> key(rows.cols());
    for (int j = 0; j < rows.cols(); ++j) key[j] = std::llround(rows(r, j) / tol);
    distinct.insert(key);
  }
  if (k > static_cast<int>(distinct.size())) {
    fail("InvalidArgument", cat("requested ", k, " regimes but only ", distinct.size(),
                                " distinct operating-condition rows exist"));
  }
  if (k < 1) fail("InvalidArgument", "regime count must be positive");

  auto rng = make_rng(seed);
  const int n = static_cast<int>(rows.rows());

  // k-means++ seeding.
  Eigen::MatrixXd centers(k, rows.cols());
  std::uniform_int_distribution<int> first(0, n - 1);
  centers.row(0) = rows.row(first(rng));
  Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::max());
  for (int c = 1; c < k; ++c) {
    for (int r = 0; r < n; ++r) {
      double d = (rows.row(r) - centers.row(c - 1)).squaredNorm();
      d2(r) = std::min(d2(r), d);
    }
    std::discrete_distribution<int> pick(d2.data(), d2.data() + n);
    centers.row(c) = rows.row(pick(rng));
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int r = 0; r < n; ++r) {
      int best = 0;
      double best_d = (rows.row(r) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double d = (rows.row(r) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[r] != best) {
        assign[r] = best;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, rows.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (int r = 0; r < n; ++r) {
      sums.row(assign[r]) += rows.row(r);
      counts(assign[r]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) centers.row(c) = sums.row(c) / counts(c);
    }
    if (!changed && iter > 0) break;
  }

  // Relabel clusters in lexicographic centroid order for seed-stable symbols.
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return row_less(centers.row(a), centers.row(b));
  });
  std::vector<int> rank(k);
  for (int i = 0; i < k; ++i) rank[order[i]] = i;

  DiscretizationResult res;
  res.centroids.resize(k, rows.cols());
  for (int c = 0; c < k; ++c) res.centroids.row(rank[c]) = centers.row(c);
  res.data = data;
  int r = 0;
  for (auto& u : res.data.units) {
    u.input_symbols.assign(u.cycles(), 0);
    for (int t = 0; t < u.cycles(); ++t) u.input_symbols[t] = rank[assign[r++]];
  }
  return res;
}

}  // namespace

DiscretizationResult discretize_operating_conditions(const RunToFailureDataset& data, std::optional<int> k,
                                                     double tol, std::uint64_t seed) {
  if (data.units.empty()) fail("InvalidArgument", "dataset has no units");
  if (tol <= 0.0) fail("InvalidArgument", "rounding tolerance must be positive");
  if (data.op_dim() == 0) fail("InvalidArgument", "dataset has no operating-condition columns");
  if (!k.has_value()) return discretize_by_rounding(data, tol);
  return discretize_by_kmeans(data, *k, tol, seed);
}

std::pair<RunToFailureDataset, RunToFailureDataset> split_units(const RunToFailureDataset& data,
                                                                double ratio, std::uint64_t seed) {
  const int n = static_cast<int>(data.units.size());
  if (n < 2) fail("InvalidArgument", cat("need at least 2 units to split, have ", n));
  if (!(ratio > 0.0 && ratio < 1.0)) fail("InvalidArgument", cat("split ratio must lie in (0,1), got ", ratio));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  int n_train = static_cast<int>(std::llround(ratio * n));
  n_train = std::clamp(n_train, 1, n - 1);

  RunToFailureDataset train, test;
  train.sensor_names = test.sensor_names = data.sensor_names;
  train.op_setting_names = test.op_setting_names = data.op_setting_names;
  for (int i = 0; i < n; ++i) {
    (i < n_train ? train : test).units.push_back(data.units[order[i]]);
  }
  auto by_id = [](const UnitTrajectory& a, const UnitTrajectory& b) { return a.unit_id < b.unit_id; };
  std::sort(train.units.begin(), train.units.end(), by_id);
  std::sort(test.units.begin(), test.units.end(), by_id);
  return {std::move(train), std::move(test)};
}

}  // namespace srla
