#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "srla/decoding.hpp"
#include "srla/iohmm.hpp"
#include "srla/network.hpp"
#include "srla/normalizer.hpp"

namespace srla {

// Fitted model plus the artifacts needed to use it: the normalizer the
// training data went through, decoded state annotation, and the training
// configuration and likelihood trace that produced it.
struct ModelDocument {
  IohmmParams params;
  std::optional<NormalizationSpec> normalization;
  std::optional<StateAnnotation> annotation;
  std::optional<EmConfig> em;
  std::vector<double> ll_trace;
  bool force_input_zero = false;  // model was fit input-blind
};

// Documents carry a schema name and version; loading re-validates every
// structural invariant, rejects unknown versions, and names the offending
// field on malformed input.
void save_model(const std::filesystem::path& file, const ModelDocument& doc);
ModelDocument load_model(const std::filesystem::path& file);

void save_network(const std::filesystem::path& file, const FeedforwardNet& net,
                  const nlohmann::json& meta = nlohmann::json::object());
std::pair<FeedforwardNet, nlohmann::json> load_network(const std::filesystem::path& file);

// json <-> component converters used by the documents and the CLI's frozen
// run configs.
nlohmann::json to_json(const IohmmParams& params);
IohmmParams iohmm_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NormalizationSpec& spec);
NormalizationSpec normalizer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StateAnnotation& annotation);
StateAnnotation annotation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EmConfig& config);
EmConfig em_from_json(const nlohmann::json& j);

}  // namespace srla
