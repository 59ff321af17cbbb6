#include "srla/pipeline.hpp"

#include <string>

#include "srla/error.hpp"
#include "srla/util.hpp"

namespace srla {

const char* system_mode_name(SystemMode mode) {
  switch (mode) {
    case SystemMode::raw: return "raw";
    case SystemMode::raw_plus_ops: return "raw_plus_ops";
    case SystemMode::hmm_gamma: return "hmm_gamma";
    case SystemMode::iohmm_gamma: return "iohmm_gamma";
    case SystemMode::srla_raw: return "srla_raw";
  }
  return "unknown";
}

SystemMode parse_system_mode(const std::string& name) {
  if (name == "raw" || name == "1") return SystemMode::raw;
  if (name == "raw_plus_ops" || name == "2") return SystemMode::raw_plus_ops;
  if (name == "hmm_gamma" || name == "3") return SystemMode::hmm_gamma;
  if (name == "iohmm_gamma" || name == "4") return SystemMode::iohmm_gamma;
  if (name == "srla_raw" || name == "srla") return SystemMode::srla_raw;
  fail("InvalidArgument", cat("unknown system mode '", name, "'"));
}

namespace {

class SensorPipeline : public FeaturePipeline {
 public:
  SensorPipeline(SystemMode mode, std::shared_ptr<const NormalizationSpec> norm)
      : mode_(mode), norm_(std::move(norm)) {
    if (!norm_) fail("MissingPrerequisite", "pipeline needs a fitted normalizer");
    const bool wants_ops = mode_ == SystemMode::raw_plus_ops;
    const bool has_ops = norm_->feature_set == FeatureSet::sensors_and_ops;
    if (wants_ops != has_ops) fail("InvalidArgument", "normalizer feature set does not match pipeline mode");
  }

  SystemMode mode() const override { return mode_; }
  int dim() const override { return norm_->dim(); }
  void reset() override {}
  Eigen::VectorXd step(const Eigen::Ref<const Eigen::VectorXd>& sensors,
                       const Eigen::Ref<const Eigen::VectorXd>& ops, int /*input_symbol*/) override {
    if (mode_ == SystemMode::raw_plus_ops) return norm_->transform_sensors_and_ops(sensors, ops);
    return norm_->transform_sensors(sensors);
  }
  std::shared_ptr<FeaturePipeline> clone() const override {
    return std::make_shared<SensorPipeline>(mode_, norm_);
  }

 private:
  SystemMode mode_;
  std::shared_ptr<const NormalizationSpec> norm_;
};

class GammaPipeline : public FeaturePipeline {
 public:
  GammaPipeline(SystemMode mode, std::shared_ptr<const NormalizationSpec> norm,
                std::shared_ptr<const IohmmParams> model)
      : mode_(mode), norm_(std::move(norm)), model_(std::move(model)), decoder_(*model_) {
    if (!norm_) fail("MissingPrerequisite", "pipeline needs the normalizer the model was fit under");
    if (norm_->feature_set != FeatureSet::sensors) {
      fail("InvalidArgument", "gamma pipelines normalize sensors only");
    }
  }

  SystemMode mode() const override { return mode_; }
  int dim() const override { return model_->n_states; }
  void reset() override { decoder_.reset(); }
  Eigen::VectorXd step(const Eigen::Ref<const Eigen::VectorXd>& sensors,
                       const Eigen::Ref<const Eigen::VectorXd>& /*ops*/, int input_symbol) override {
    const int u = mode_ == SystemMode::hmm_gamma ? 0 : input_symbol;
    decoder_.push(u, norm_->transform_sensors(sensors));
    return decoder_.filtered();
  }
  std::shared_ptr<FeaturePipeline> clone() const override {
    return std::make_shared<GammaPipeline>(mode_, norm_, model_);
  }

 private:
  SystemMode mode_;
  std::shared_ptr<const NormalizationSpec> norm_;
  std::shared_ptr<const IohmmParams> model_;
  PrefixDecoder decoder_;
};

}  // namespace

std::shared_ptr<FeaturePipeline> make_pipeline(SystemMode mode, std::shared_ptr<const NormalizationSpec> norm,
                                               std::shared_ptr<const IohmmParams> model) {
  switch (mode) {
    case SystemMode::raw:
    case SystemMode::raw_plus_ops:
    case SystemMode::srla_raw:
      return std::make_shared<SensorPipeline>(mode, std::move(norm));
    case SystemMode::hmm_gamma:
    case SystemMode::iohmm_gamma:
      if (!model) fail("MissingPrerequisite", "gamma pipeline needs a fitted model");
      return std::make_shared<GammaPipeline>(mode, std::move(norm), std::move(model));
  }
  fail("InvalidArgument", "unknown pipeline mode");
}

}  // namespace srla
