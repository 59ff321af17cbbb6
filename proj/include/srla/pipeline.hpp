#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "srla/iohmm.hpp"
#include "srla/normalizer.hpp"

namespace srla {

// Observation representations fed to the value network.
//   raw           normalized sensors
//   raw_plus_ops  normalized sensors and operating settings
//   hmm_gamma     filtered state posterior of an input-blind model
//   iohmm_gamma   filtered state posterior of the input-conditioned model
//   srla_raw      normalized sensors (the gated agent's view)
enum class SystemMode { raw, raw_plus_ops, hmm_gamma, iohmm_gamma, srla_raw };

const char* system_mode_name(SystemMode mode);
SystemMode parse_system_mode(const std::string& name);

// Stateful per-episode feature extractor.  step() must be called once per
// cycle in order; gamma modes maintain a forward filter over the prefix.
class FeaturePipeline {
 public:
  virtual ~FeaturePipeline() = default;
  virtual SystemMode mode() const = 0;
  virtual int dim() const = 0;
  virtual void reset() = 0;
  virtual Eigen::VectorXd step(const Eigen::Ref<const Eigen::VectorXd>& sensors,
                               const Eigen::Ref<const Eigen::VectorXd>& ops, int input_symbol) = 0;
  virtual std::shared_ptr<FeaturePipeline> clone() const = 0;
};

// raw / raw_plus_ops / srla_raw need `norm`; gamma modes need `norm` (the one
// the model was fit under) and `model`.  hmm_gamma ignores input symbols.
std::shared_ptr<FeaturePipeline> make_pipeline(SystemMode mode, std::shared_ptr<const NormalizationSpec> norm,
                                               std::shared_ptr<const IohmmParams> model = nullptr);

}  // namespace srla
