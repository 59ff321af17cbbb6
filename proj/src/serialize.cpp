#include "srla/serialize.hpp"

#include <fstream>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {

namespace {

constexpr int kModelVersion = 1;
constexpr int kNetworkVersion = 1;

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const json& a, const char* field) {
  if (!a.is_array()) fail("ParseError", cat("field '", field, "' must be an array"));
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) fail("ParseError", cat("field '", field, "' must hold numbers"));
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& a, const char* field) {
  if (!a.is_array() || a.empty()) fail("ParseError", cat("field '", field, "' must be a non-empty array"));
  Eigen::VectorXd first = vec_from_json(a[0], field);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()), first.size());
  m.row(0) = first.transpose();
  for (std::size_t r = 1; r < a.size(); ++r) {
    Eigen::VectorXd row = vec_from_json(a[r], field);
    if (row.size() != m.cols()) fail("ParseError", cat("field '", field, "' rows have mixed lengths"));
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

const json& need(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) fail("ParseError", cat("missing field '", field, "'"));
  return *it;
}

json load_document(const std::filesystem::path& file, const char* schema, int version) {
  std::ifstream in(file);
  if (!in) fail("IoError", cat("cannot open ", file.string()));
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail("ParseError", cat(file.string(), ": ", e.what()));
  }
  if (!j.is_object()) fail("ParseError", cat(file.string(), ": document must be an object"));
  const std::string got_schema = need(j, "schema").get<std::string>();
  if (got_schema != schema) {
    fail("SchemaVersion", cat(file.string(), ": schema '", got_schema, "', expected '", schema, "'"));
  }
  const int got_version = need(j, "version").get<int>();
  if (got_version != version) {
    fail("SchemaVersion",
         cat(file.string(), ": version ", got_version, " unsupported, expected ", version));
  }
  return j;
}

void write_document(const std::filesystem::path& file, const json& j) {
  std::ofstream out(file);
  if (!out) fail("IoError", cat("cannot open ", file.string(), " for writing"));
  out << j.dump(2) << '\n';
  if (!out.good()) fail("IoError", cat("write failed for ", file.string()));
}

}  // namespace

json to_json(const IohmmParams& params) {
  json j;
  j["n_states"] = params.n_states;
  j["n_inputs"] = params.n_inputs;
  j["pi"] = vec_to_json(params.pi);
  json trans = json::array();
  for (const Eigen::MatrixXd& a : params.trans) trans.push_back(mat_to_json(a));
  j["trans"] = trans;
  json emis = json::array();
  for (const auto& per_state : params.emis) {
    json cells = json::array();
    for (const GaussianDiag& g : per_state) {
      cells.push_back(json{{"mean", vec_to_json(g.mean)}, {"var", vec_to_json(g.var)}});
    }
    emis.push_back(cells);
  }
  j["emis"] = emis;
  return j;
}

IohmmParams iohmm_from_json(const json& j) {
  IohmmParams p;
  p.n_states = need(j, "n_states").get<int>();
  p.n_inputs = need(j, "n_inputs").get<int>();
  p.pi = vec_from_json(need(j, "pi"), "pi");
  for (const json& a : need(j, "trans")) p.trans.push_back(mat_from_json(a, "trans"));
  const json& emis = need(j, "emis");
  if (!emis.is_array()) fail("ParseError", "field 'emis' must be an array");
  for (const json& per_state : emis) {
    std::vector<GaussianDiag> cells;
    for (const json& cell : per_state) {
      GaussianDiag g;
      g.mean = vec_from_json(need(cell, "mean"), "emis.mean");
      g.var = vec_from_json(need(cell, "var"), "emis.var");
      cells.push_back(std::move(g));
    }
    p.emis.push_back(std::move(cells));
  }
  p.validate();
  return p;
}

json to_json(const NormalizationSpec& spec) {
  json j;
  j["mode"] = spec.mode == NormMode::minmax ? "minmax" : "zscore";
  j["feature_set"] = spec.feature_set == FeatureSet::sensors ? "sensors" : "sensors_and_ops";
  j["feature_names"] = spec.feature_names;
  j["stat_a"] = vec_to_json(spec.stat_a);
  j["stat_b"] = vec_to_json(spec.stat_b);
  j["warnings"] = spec.warnings;
  return j;
}

NormalizationSpec normalizer_from_json(const json& j) {
  NormalizationSpec spec;
  const std::string mode = need(j, "mode").get<std::string>();
  if (mode == "minmax") {
    spec.mode = NormMode::minmax;
  } else if (mode == "zscore") {
    spec.mode = NormMode::zscore;
  } else {
    fail("ParseError", cat("unknown normalization mode '", mode, "'"));
  }
  const std::string fs = need(j, "feature_set").get<std::string>();
  if (fs == "sensors") {
    spec.feature_set = FeatureSet::sensors;
  } else if (fs == "sensors_and_ops") {
    spec.feature_set = FeatureSet::sensors_and_ops;
  } else {
    fail("ParseError", cat("unknown feature set '", fs, "'"));
  }
  spec.feature_names = need(j, "feature_names").get<std::vector<std::string>>();
  spec.stat_a = vec_from_json(need(j, "stat_a"), "stat_a");
  spec.stat_b = vec_from_json(need(j, "stat_b"), "stat_b");
  spec.warnings = need(j, "warnings").get<std::vector<std::string>>();
  if (spec.stat_a.size() != spec.stat_b.size() ||
      spec.feature_names.size() != static_cast<std::size_t>(spec.stat_a.size())) {
    fail("ParseError", "normalizer statistics and feature names disagree in length");
  }
  return spec;
}

json to_json(const StateAnnotation& annotation) {
  json j;
  j["n_states"] = annotation.n_states;
  j["failure_states"] = annotation.failure_states;
  j["specialized"] = annotation.specialized;
  j["p_fail_threshold"] = annotation.p_fail_threshold;
  json bands = json::array();
  for (const ConditionBand& b : annotation.conditions.bands) {
    bands.push_back(json{{"label", b.label}, {"lo", b.lo_frac}, {"hi", b.hi_frac}, {"states", b.states}});
  }
  j["condition_bands"] = bands;
  j["dispersed"] = annotation.conditions.dispersed;
  return j;
}

StateAnnotation annotation_from_json(const json& j) {
  StateAnnotation a;
  a.n_states = need(j, "n_states").get<int>();
  for (int s : need(j, "failure_states")) a.failure_states.insert(s);
  for (int s : need(j, "specialized")) a.specialized.insert(s);
  a.p_fail_threshold = need(j, "p_fail_threshold").get<double>();
  for (const json& b : need(j, "condition_bands")) {
    ConditionBand band;
    band.label = need(b, "label").get<std::string>();
    band.lo_frac = need(b, "lo").get<double>();
    band.hi_frac = need(b, "hi").get<double>();
    band.states = need(b, "states").get<std::vector<int>>();
    a.conditions.bands.push_back(std::move(band));
  }
  a.conditions.dispersed = need(j, "dispersed").get<bool>();
  a.validate();
  return a;
}

json to_json(const EmConfig& config) {
  json j;
  j["tol"] = config.tol;
  j["max_epochs"] = config.max_epochs;
  j["n_restarts"] = config.n_restarts;
  j["seed"] = config.seed;
  j["init"] = config.init == EmConfig::Init::kmeans ? "kmeans" : "random";
  j["transition_smoothing"] = config.transition_smoothing;
  j["n_inputs"] = config.n_inputs;
  j["validate_each_epoch"] = config.validate_each_epoch;
  return j;
}

EmConfig em_from_json(const json& j) {
  EmConfig c;
  c.tol = need(j, "tol").get<double>();
  c.max_epochs = need(j, "max_epochs").get<int>();
  c.n_restarts = need(j, "n_restarts").get<int>();
  c.seed = need(j, "seed").get<std::uint64_t>();
  const std::string init = need(j, "init").get<std::string>();
  if (init == "kmeans") {
    c.init = EmConfig::Init::kmeans;
  } else if (init == "random") {
    c.init = EmConfig::Init::random;
  } else {
    fail("ParseError", cat("unknown init mode '", init, "'"));
  }
  c.transition_smoothing = need(j, "transition_smoothing").get<double>();
  c.n_inputs = need(j, "n_inputs").get<int>();
  c.validate_each_epoch = need(j, "validate_each_epoch").get<bool>();
  return c;
}

void save_model(const std::filesystem::path& file, const ModelDocument& doc) {
  doc.params.validate();
  json j;
  j["schema"] = "srla.model";
  j["version"] = kModelVersion;
  j["params"] = to_json(doc.params);
  if (doc.normalization) j["normalization"] = to_json(*doc.normalization);
  if (doc.annotation) {
    doc.annotation->validate();
    j["annotation"] = to_json(*doc.annotation);
  }
  if (doc.em) j["em"] = to_json(*doc.em);
  if (!doc.ll_trace.empty()) j["ll_trace"] = doc.ll_trace;
  j["force_input_zero"] = doc.force_input_zero;
  write_document(file, j);
}

ModelDocument load_model(const std::filesystem::path& file) {
  const json j = load_document(file, "srla.model", kModelVersion);
  ModelDocument doc;
  try {
    doc.params = iohmm_from_json(need(j, "params"));
    if (j.contains("normalization")) doc.normalization = normalizer_from_json(j["normalization"]);
    if (j.contains("annotation")) doc.annotation = annotation_from_json(j["annotation"]);
    if (j.contains("em")) doc.em = em_from_json(j["em"]);
    if (j.contains("ll_trace")) doc.ll_trace = j["ll_trace"].get<std::vector<double>>();
    doc.force_input_zero = j.value("force_input_zero", false);
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    fail("ParseError", cat(file.string(), ": ", e.what()));
  }
  if (doc.annotation && doc.annotation->n_states != doc.params.n_states) {
    fail("InvariantViolation", cat(file.string(), ": annotation covers ", doc.annotation->n_states,
                                   " states, model has ", doc.params.n_states));
  }
  return doc;
}

void save_network(const std::filesystem::path& file, const FeedforwardNet& net, const json& meta) {
  if (net.W.empty() || !net.all_finite()) fail("InvariantViolation", "refusing to save a non-finite network");
  json j;
  j["schema"] = "srla.network";
  j["version"] = kNetworkVersion;
  json layers = json::array();
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    layers.push_back(json{{"rows", net.W[l].rows()}, {"cols", net.W[l].cols()},
                          {"W", mat_to_json(net.W[l])}, {"b", vec_to_json(net.b[l])}});
  }
  j["layers"] = layers;
  j["meta"] = meta;
  write_document(file, j);
}

std::pair<FeedforwardNet, json> load_network(const std::filesystem::path& file) {
  const json j = load_document(file, "srla.network", kNetworkVersion);
  FeedforwardNet net;
  try {
    for (const json& layer : need(j, "layers")) {
      Eigen::MatrixXd W = mat_from_json(need(layer, "W"), "W");
      Eigen::VectorXd b = vec_from_json(need(layer, "b"), "b");
      if (W.rows() != need(layer, "rows").get<Eigen::Index>() ||
          W.cols() != need(layer, "cols").get<Eigen::Index>()) {
        fail("InvariantViolation", cat(file.string(), ": stored layer shape disagrees with its matrix"));
      }
      if (b.size() != W.rows()) {
        fail("InvariantViolation", cat(file.string(), ": bias length does not match layer rows"));
      }
      net.W.push_back(std::move(W));
      net.b.push_back(std::move(b));
    }
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    fail("ParseError", cat(file.string(), ": ", e.what()));
  }
  if (net.W.empty()) fail("InvariantViolation", cat(file.string(), ": network has no layers"));
  for (std::size_t l = 1; l < net.W.size(); ++l) {
    if (net.W[l].cols() != net.W[l - 1].rows()) {
      fail("InvariantViolation", cat(file.string(), ": layer ", l, " input does not match layer ", l - 1,
                                     " output"));
    }
  }
  if (!net.all_finite()) fail("InvariantViolation", cat(file.string(), ": network has non-finite parameters"));
  return {std::move(net), j.value("meta", json::object())};
}

}  // namespace srla
