#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "srla/dataset.hpp"
#include "srla/iohmm.hpp"

namespace srla {

struct ClassifierConfig {
  double l2 = 1e-3;
  double lr = 0.1;
  int max_epochs = 5000;
  double loss_tol = 1e-8;  // stop when the per-epoch loss change falls below this
  std::uint64_t seed = 0;
};

// Multinomial logistic regression (softmax, full-batch gradient descent).
// Rows of W are features, columns are classes; classes[c] is the decoded state
// behind column c.
struct StateClassifier {
  Eigen::MatrixXd W;            // d x C
  Eigen::VectorXd b;            // C
  std::vector<int> classes;     // sorted distinct target states
  double train_accuracy = 0.0;
  std::vector<double> loss_trace;

  Eigen::VectorXd probabilities(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;  // state id, ties to lower class
};

// Regularized cross-entropy loss and its gradients; exposed so training can be
// checked against finite differences.
double classifier_loss(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, const Eigen::MatrixXd& X,
                       const std::vector<int>& targets, double l2);
void classifier_gradients(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, const Eigen::MatrixXd& X,
                          const std::vector<int>& targets, double l2, Eigen::MatrixXd& dW,
                          Eigen::VectorXd& db);

// targets[i] is the decoded state of row i; at least two distinct states are
// required.  Deterministic: zero-initialized, fixed-step gradient descent.
StateClassifier fit_state_classifier(const Eigen::MatrixXd& X, const std::vector<int>& targets,
                                     const ClassifierConfig& config);

// |coefficient|-ranked features for one state's class column, sign preserved.
std::vector<std::pair<std::string, double>> feature_importance(const StateClassifier& clf, int state,
                                                               int top_k,
                                                               const std::vector<std::string>& feature_names);

struct SensorDescription {
  std::string symbol;
  std::string description;
};
using SensorDescriptions = std::map<std::string, SensorDescription>;  // feature name -> info

// CSV with columns: feature,symbol,description.
SensorDescriptions load_sensor_descriptions(const std::filesystem::path& file);

struct FailureModeEntry {
  std::string feature;
  double coefficient = 0.0;
  std::string symbol;       // empty when no description table was given
  std::string description;
};

struct FailureModeReport {
  std::map<int, std::vector<FailureModeEntry>> per_failure_state;  // ranked entries
  double classifier_accuracy = 0.0;
};

// Contrastive ranking: which sensors separate each failure state from the rest
// of the decoded states.  Features are standardized internally so coefficient
// magnitudes are comparable.
FailureModeReport failure_mode_report(const IohmmParams& params, const RunToFailureDataset& data,
                                      const std::set<int>& failure_states,
                                      const std::optional<SensorDescriptions>& descriptions,
                                      const ClassifierConfig& config, int top_k = 10);

void write_importance_csv(const std::filesystem::path& file, const StateClassifier& clf,
                          const std::vector<std::string>& feature_names, int top_k);
void write_failure_report(const std::filesystem::path& file, const FailureModeReport& report);

}  // namespace srla
