#include "rd2v/model.hpp"

#include "rd2v/errors.hpp"

namespace rd2v {

void ModelConfig::validate() const {
  conv.validate();
  transformer.validate();
}

ParameterSet init_model(const ModelConfig& cfg, SeededRng& rng) {
  cfg.validate();
  ParameterSet params;
  SeededRng enc = rng.child("feature_encoder");
  init_feature_encoder(cfg.conv, params, enc);
  SeededRng ctx = rng.child("context_encoder");
  init_context_encoder(cfg.transformer, cfg.conv.output_channels(), params, ctx);
  return params;
}

bool is_transformer_parameter(const std::string& name) {
  return name.starts_with("transformer.");
}

BranchOutput run_branch(const ModelConfig& cfg, const BoundParameters& params,
                        const Waveform& w, const MaskSpec* mask) {
  ad::Tape& tape = params.tape();
  const ad::Var z = encode(cfg.conv, params, waveform_column(tape, w));
  BranchOutput out;
  out.features = project_features(params, z);
  if (mask != nullptr) {
    out.features = apply_mask(out.features, *mask, params["mask_embedding"]);
  }
  out.layers = forward(cfg.transformer, params, out.features);
  return out;
}

ad::Var prediction(const BranchOutput& out) {
  if (out.layers.empty()) {
    throw StructuralError("prediction: branch has no layers");
  }
  return ad::normalize_rows(out.layers.back(), kFrameNormEps);
}

FeatureSequence teacher_targets(const ModelConfig& cfg, const ParameterSet& teacher,
                                const Waveform& clean) {
  ad::Tape tape(ad::GradMode::kDisabled);
  const auto bound = bind_frozen(tape, teacher);
  const auto out = run_branch(cfg, bound, clean, nullptr);
  LayerOutputs layers;
  for (const auto& v : out.layers) layers.push_back(v.value());
  return average_top_m(layers, cfg.transformer.top_m);
}

} // namespace rd2v
