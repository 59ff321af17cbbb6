#include "srla/normalizer.hpp"

#include <cmath>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {
namespace {

constexpr double kConstantEps = 0.0;  // exact equality marks a constant feature

Eigen::MatrixXd stack_features(const RunToFailureDataset& data, FeatureSet features) {
  const int d_y = data.sensor_dim();
  const int d = features == FeatureSet::sensors ? d_y : d_y + data.op_dim();
  Eigen::MatrixXd rows(static_cast<int>(data.total_cycles()), d);
  int r = 0;
  for (const auto& u : data.units) {
    for (int t = 0; t < u.cycles(); ++t) {
      rows.row(r).head(d_y) = u.sensors.row(t);
      if (features == FeatureSet::sensors_and_ops) rows.row(r).tail(data.op_dim()) = u.op_settings.row(t);
      ++r;
    }
  }
  return rows;
}

}  // namespace

double NormalizationSpec::transform_value(double v, int feature) const {
  if (mode == NormMode::minmax) {
    const double lo = stat_a(feature), hi = stat_b(feature);
    if (hi - lo <= kConstantEps) return 0.0;
    return (v - lo) / (hi - lo);
  }
  const double mu = stat_a(feature), sd = stat_b(feature);
  if (sd <= 0.0) return 0.0;
  return (v - mu) / sd;
}

Eigen::VectorXd NormalizationSpec::transform_sensors(const Eigen::VectorXd& sensors) const {
  Eigen::VectorXd out(sensors.size());
  for (int j = 0; j < sensors.size(); ++j) out(j) = transform_value(sensors(j), j);
  return out;
}

Eigen::VectorXd NormalizationSpec::transform_sensors_and_ops(const Eigen::VectorXd& sensors,
                                                             const Eigen::VectorXd& ops) const {
  if (feature_set != FeatureSet::sensors_and_ops) {
    fail("InvalidArgument", "normalizer was not fit on sensors and op settings");
  }
  Eigen::VectorXd out(sensors.size() + ops.size());
  for (int j = 0; j < sensors.size(); ++j) out(j) = transform_value(sensors(j), j);
  for (int j = 0; j < ops.size(); ++j) {
    out(sensors.size() + j) = transform_value(ops(j), static_cast<int>(sensors.size()) + j);
  }
  return out;
}

NormalizationSpec fit_normalizer(const RunToFailureDataset& train, NormMode mode, FeatureSet features) {
  if (train.units.empty()) fail("InvalidArgument", "cannot fit normalizer on empty dataset");
  Eigen::MatrixXd rows = stack_features(train, features);

  NormalizationSpec spec;
  spec.mode = mode;
  spec.feature_set = features;
  spec.feature_names = train.sensor_names;
  if (features == FeatureSet::sensors_and_ops) {
    spec.feature_names.insert(spec.feature_names.end(), train.op_setting_names.begin(),
                              train.op_setting_names.end());
  }

  const int d = static_cast<int>(rows.cols());
  spec.stat_a.resize(d);
  spec.stat_b.resize(d);
  for (int j = 0; j < d; ++j) {
    if (mode == NormMode::minmax) {
      spec.stat_a(j) = rows.col(j).minCoeff();
      spec.stat_b(j) = rows.col(j).maxCoeff();
      if (spec.stat_b(j) - spec.stat_a(j) <= kConstantEps) {
        spec.warnings.push_back(cat("constant feature '", spec.feature_names[j], "' mapped to 0"));
      }
    } else {
      const double mu = rows.col(j).mean();
      const double var = (rows.col(j).array() - mu).square().mean();
      spec.stat_a(j) = mu;
      spec.stat_b(j) = std::sqrt(var);
      if (spec.stat_b(j) <= 0.0) {
        spec.warnings.push_back(cat("constant feature '", spec.feature_names[j], "' mapped to 0"));
      }
    }
  }
  return spec;
}

RunToFailureDataset apply_normalizer(const NormalizationSpec& spec, const RunToFailureDataset& data) {
  const int d_y = data.sensor_dim();
  const int expect = spec.feature_set == FeatureSet::sensors ? d_y : d_y + data.op_dim();
  if (spec.dim() != expect) {
    fail("DimensionMismatch", cat("normalizer dimension ", spec.dim(), " does not match dataset (", expect, ")"));
  }
  RunToFailureDataset out = data;
  for (auto& u : out.units) {
    for (int t = 0; t < u.cycles(); ++t) {
      for (int j = 0; j < d_y; ++j) u.sensors(t, j) = spec.transform_value(u.sensors(t, j), j);
      if (spec.feature_set == FeatureSet::sensors_and_ops) {
        for (int j = 0; j < data.op_dim(); ++j) {
          u.op_settings(t, j) = spec.transform_value(u.op_settings(t, j), d_y + j);
        }
      }
    }
  }
  return out;
}

}  // namespace srla
