#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace srla {

// One run-to-failure history.  Row t-1 of each matrix is cycle t (cycles are
// 1-based and contiguous); the final row is the failure cycle T.
struct UnitTrajectory {
  int unit_id = 0;
  Eigen::MatrixXd sensors;                 // T x d_y
  Eigen::MatrixXd op_settings;             // T x d_u
  std::vector<int> input_symbols;          // empty until discretized, else size T

  int cycles() const { return static_cast<int>(sensors.rows()); }
};

struct RunToFailureDataset {
  std::vector<UnitTrajectory> units;
  std::vector<std::string> sensor_names;
  std::vector<std::string> op_setting_names;

  int sensor_dim() const { return static_cast<int>(sensor_names.size()); }
  int op_dim() const { return static_cast<int>(op_setting_names.size()); }
  std::size_t total_cycles() const;
  bool has_input_symbols() const;
  int input_alphabet_size() const;  // 1 + max symbol, or 1 when undiscretized

  const UnitTrajectory& unit_by_id(int unit_id) const;

  // Checks T >= 2, matching dimensions, contiguity of symbol vectors.
  void validate() const;
};

enum class DataFormat { cmapss_txt, csv };

// cmapss_txt: headerless whitespace table with 26 columns
//   (unit, cycle, 3 op settings, 21 sensors).
// csv: header row with "unit", "cycle" and feature columns named by prefix
//   (defaults "op_" / "s_"); other columns are ignored.
// Malformed rows (wrong column count, non-numeric fields) and cycle gaps or
// duplicates raise Error naming the offending unit/row.
RunToFailureDataset load_run_to_failure(const std::filesystem::path& file, DataFormat format,
                                        const std::string& op_prefix = "op_",
                                        const std::string& sensor_prefix = "s_");

// Canonical CSV (unit, cycle, op_*, s_* with round-trip float formatting).
void save_csv(const RunToFailureDataset& data, const std::filesystem::path& file);

// Restricts the sensor columns to an explicit include-list (order preserved
// from `names`).  Unknown names raise Error.
RunToFailureDataset select_sensors(const RunToFailureDataset& data, const std::vector<std::string>& names);

struct DiscretizationResult {
  RunToFailureDataset data;      // copy with input_symbols filled per cycle
  Eigen::MatrixXd centroids;     // K_u x d_u, row index == symbol
};

// Maps operating-condition rows to a discrete regime alphabet.  Without k,
// regimes are distinct op-rows after rounding to multiples of `tol`; with k,
// seeded k-means.  Symbols are assigned in lexicographic centroid order so the
// result is a pure function of (op_settings, k, tol, seed).
DiscretizationResult discretize_operating_conditions(const RunToFailureDataset& data,
                                                     std::optional<int> k = std::nullopt,
                                                     double tol = 1e-3, std::uint64_t seed = 0);

// Unit-level split: shuffles unit ids with `seed`; round(n * ratio) units
// (clamped to [1, n-1]) go to train.  ratio must lie in (0, 1); fewer than
// two units is an error.
std::pair<RunToFailureDataset, RunToFailureDataset> split_units(const RunToFailureDataset& data,
                                                                double ratio, std::uint64_t seed);

}  // namespace srla
