#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "srla/dataset.hpp"

namespace srla {

enum class NormMode { minmax, zscore };
enum class FeatureSet { sensors, sensors_and_ops };

// Frozen per-feature statistics fit on a training split.  minmax stores
// (min, max); zscore stores (mean, std).  Constant features map to 0 and are
// listed in `warnings`.
struct NormalizationSpec {
  NormMode mode = NormMode::minmax;
  FeatureSet feature_set = FeatureSet::sensors;
  std::vector<std::string> feature_names;
  Eigen::VectorXd stat_a;  // min or mean
  Eigen::VectorXd stat_b;  // max or std
  std::vector<std::string> warnings;

  int dim() const { return static_cast<int>(stat_a.size()); }
  double transform_value(double v, int feature) const;
  Eigen::VectorXd transform_sensors(const Eigen::VectorXd& sensors) const;
  Eigen::VectorXd transform_sensors_and_ops(const Eigen::VectorXd& sensors,
                                            const Eigen::VectorXd& ops) const;
};

NormalizationSpec fit_normalizer(const RunToFailureDataset& train, NormMode mode, FeatureSet features);

// Returns a transformed copy; statistics are frozen so applying a spec fit on
// train to test data uses the train statistics unchanged.
RunToFailureDataset apply_normalizer(const NormalizationSpec& spec, const RunToFailureDataset& data);

}  // namespace srla
