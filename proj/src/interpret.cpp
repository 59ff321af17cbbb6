#include "srla/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "srla/decoding.hpp"
#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {
namespace {

// Row-wise softmax of X*W + b; numerically shifted by the row max.
Eigen::MatrixXd softmax_scores(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                               const Eigen::MatrixXd& X) {
  Eigen::MatrixXd Z = (X * W).rowwise() + b.transpose();
  for (int r = 0; r < Z.rows(); ++r) {
    const double m = Z.row(r).maxCoeff();
    Z.row(r) = (Z.row(r).array() - m).exp();
    Z.row(r) /= Z.row(r).sum();
  }
  return Z;
}

std::vector<int> class_index_of(const std::vector<int>& targets, const std::vector<int>& classes) {
  std::vector<int> idx(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto it = std::lower_bound(classes.begin(), classes.end(), targets[i]);
    idx[i] = static_cast<int>(it - classes.begin());
  }
  return idx;
}

}  // namespace

Eigen::VectorXd StateClassifier::probabilities(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd z = W.transpose() * x + b;
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

int StateClassifier::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd p = probabilities(x);
  int arg = 0;
  for (int c = 1; c < p.size(); ++c) {
    if (p(c) > p(arg)) arg = c;
  }
  return classes[arg];
}

double classifier_loss(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, const Eigen::MatrixXd& X,
                       const std::vector<int>& targets, double l2) {
  const int n = static_cast<int>(X.rows());
  Eigen::MatrixXd P = softmax_scores(W, b, X);
  double nll = 0.0;
  for (int i = 0; i < n; ++i) nll -= std::log(std::max(P(i, targets[i]), 1e-300));
  return nll / n + 0.5 * l2 * W.squaredNorm();
}

void classifier_gradients(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, const Eigen::MatrixXd& X,
                          const std::vector<int>& targets, double l2, Eigen::MatrixXd& dW,
                          Eigen::VectorXd& db) {
  const int n = static_cast<int>(X.rows());
  Eigen::MatrixXd P = softmax_scores(W, b, X);
  for (int i = 0; i < n; ++i) P(i, targets[i]) -= 1.0;
  dW = X.transpose() * P / n + l2 * W;
  db = P.colwise().sum().transpose() / n;
}

StateClassifier fit_state_classifier(const Eigen::MatrixXd& X, const std::vector<int>& targets,
                                     const ClassifierConfig& config) {
  if (X.rows() == 0) fail("InvalidArgument", "no training rows");
  if (static_cast<int>(targets.size()) != X.rows()) fail("DimensionMismatch", "target count mismatch");
  if (config.lr <= 0.0 || config.max_epochs < 1) fail("InvalidArgument", "bad optimizer configuration");
  if (config.l2 < 0.0) fail("InvalidArgument", "negative ridge penalty");

  StateClassifier clf;
  clf.classes = targets;
  std::sort(clf.classes.begin(), clf.classes.end());
  clf.classes.erase(std::unique(clf.classes.begin(), clf.classes.end()), clf.classes.end());
  if (clf.classes.size() < 2) {
    fail("SingleClass", cat("need at least 2 distinct target states, found ", clf.classes.size()));
  }

  const int d = static_cast<int>(X.cols());
  const int C = static_cast<int>(clf.classes.size());
  std::vector<int> y = class_index_of(targets, clf.classes);

  clf.W = Eigen::MatrixXd::Zero(d, C);
  clf.b = Eigen::VectorXd::Zero(C);
  Eigen::MatrixXd dW;
  Eigen::VectorXd db;
  double prev = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double loss = classifier_loss(clf.W, clf.b, X, y, config.l2);
    clf.loss_trace.push_back(loss);
    if (std::abs(prev - loss) < config.loss_tol) break;
    prev = loss;
    classifier_gradients(clf.W, clf.b, X, y, config.l2, dW, db);
    clf.W -= config.lr * dW;
    clf.b -= config.lr * db;
  }

  int correct = 0;
  for (int i = 0; i < X.rows(); ++i) {
    if (clf.predict(X.row(i).transpose()) == targets[i]) ++correct;
  }
  clf.train_accuracy = static_cast<double>(correct) / static_cast<double>(X.rows());
  return clf;
}

std::vector<std::pair<std::string, double>> feature_importance(const StateClassifier& clf, int state,
                                                               int top_k,
                                                               const std::vector<std::string>& feature_names) {
  auto it = std::find(clf.classes.begin(), clf.classes.end(), state);
  if (it == clf.classes.end()) fail("InvalidArgument", cat("state ", state, " was not a classifier target"));
  if (static_cast<int>(feature_names.size()) != clf.W.rows()) {
    fail("DimensionMismatch", "feature name count mismatch");
  }
  const int c = static_cast<int>(it - clf.classes.begin());

  std::vector<int> order(clf.W.rows());
  for (int j = 0; j < clf.W.rows(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](int a, int bdx) {
    return std::abs(clf.W(a, c)) > std::abs(clf.W(bdx, c));
  });

  const int k = std::clamp(top_k, 0, static_cast<int>(clf.W.rows()));
  std::vector<std::pair<std::string, double>> out;
  for (int j = 0; j < k; ++j) out.emplace_back(feature_names[order[j]], clf.W(order[j], c));
  return out;
}

SensorDescriptions load_sensor_descriptions(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) fail("DatasetNotFound", cat("description file not found: ", file.string()));
  std::ifstream in(file);
  std::string line;
  SensorDescriptions out;
  bool first = true;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (first) {  // header: feature,symbol,description
      first = false;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? 0 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      fail("ParseError", cat(file.string(), ": expected 3 comma-separated fields: ", line));
    }
    SensorDescription d;
    d.symbol = line.substr(c1 + 1, c2 - c1 - 1);
    d.description = line.substr(c2 + 1);
    if (d.description.size() >= 2 && d.description.front() == '"' && d.description.back() == '"') {
      d.description = d.description.substr(1, d.description.size() - 2);
      std::size_t pos = 0;
      while ((pos = d.description.find("\"\"", pos)) != std::string::npos) {
        d.description.erase(pos, 1);
        ++pos;
      }
    }
    out[line.substr(0, c1)] = d;
  }
  return out;
}

FailureModeReport failure_mode_report(const IohmmParams& params, const RunToFailureDataset& data,
                                      const std::set<int>& failure_states,
                                      const std::optional<SensorDescriptions>& descriptions,
                                      const ClassifierConfig& config, int top_k) {
  if (failure_states.empty()) fail("EmptyInput", "failure state set is empty");

  // Decode every unit; targets collapse all non-failure states into one
  // contrast class so coefficients isolate what makes each failure state
  // look different from healthy operation.
  const int rest_class = -1;
  std::vector<Eigen::VectorXd> rows;
  std::vector<int> targets;
  bool any_failure = false;
  for (const auto& u : data.units) {
    ViterbiPath path = viterbi(params, unit_inputs(u), u.sensors);
    for (int t = 0; t < u.cycles(); ++t) {
      rows.push_back(u.sensors.row(t).transpose());
      if (failure_states.count(path.states[t])) {
        targets.push_back(path.states[t]);
        any_failure = true;
      } else {
        targets.push_back(rest_class);
      }
    }
  }
  if (!any_failure) fail("EmptyInput", "no cycle decodes to a failure state");

  Eigen::MatrixXd X(static_cast<int>(rows.size()), data.sensor_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) X.row(static_cast<int>(i)) = rows[i].transpose();

  // Standardize so coefficient magnitudes are comparable across sensors.
  for (int j = 0; j < X.cols(); ++j) {
    const double mu = X.col(j).mean();
    const double sd = std::sqrt((X.col(j).array() - mu).square().mean());
    if (sd > 0.0) {
      X.col(j) = (X.col(j).array() - mu) / sd;
    } else {
      X.col(j).setZero();
    }
  }

  StateClassifier clf = fit_state_classifier(X, targets, config);

  FailureModeReport report;
  report.classifier_accuracy = clf.train_accuracy;
  for (int s : failure_states) {
    if (std::find(clf.classes.begin(), clf.classes.end(), s) == clf.classes.end()) continue;
    auto ranked = feature_importance(clf, s, top_k, data.sensor_names);
    std::vector<FailureModeEntry> entries;
    for (const auto& [name, coef] : ranked) {
      FailureModeEntry e;
      e.feature = name;
      e.coefficient = coef;
      if (descriptions.has_value()) {
        auto it = descriptions->find(name);
        if (it != descriptions->end()) {
          e.symbol = it->second.symbol;
          e.description = it->second.description;
        }
      }
      entries.push_back(std::move(e));
    }
    report.per_failure_state[s] = std::move(entries);
  }
  return report;
}

void write_importance_csv(const std::filesystem::path& file, const StateClassifier& clf,
                          const std::vector<std::string>& feature_names, int top_k) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open for writing: ", file.string()));
  out << "state,rank,feature,coefficient\n";
  for (int state : clf.classes) {
    auto ranked = feature_importance(clf, state, top_k, feature_names);
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      out << state << ',' << (r + 1) << ',' << ranked[r].first << ',' << fmt_double(ranked[r].second)
          << '\n';
    }
  }
}

void write_failure_report(const std::filesystem::path& file, const FailureModeReport& report) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open for writing: ", file.string()));
  out << "failure_state,rank,feature,coefficient,symbol,description\n";
  for (const auto& [state, entries] : report.per_failure_state) {
    for (std::size_t r = 0; r < entries.size(); ++r) {
      const auto& e = entries[r];
      out << state << ',' << (r + 1) << ',' << e.feature << ',' << fmt_double(e.coefficient) << ','
          << e.symbol << ',' << e.description << '\n';
    }
  }
}

}  // namespace srla
