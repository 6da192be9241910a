#pragma once

#include <string>
#include <vector>

#include "rd2v/context_encoder.hpp"
#include "rd2v/feature_encoder.hpp"
#include "rd2v/parameters.hpp"
#include "rd2v/signal.hpp"

namespace rd2v {

/// One branch of the teacher-student pair: conv feature encoder, projection
/// to model_dim, optional masking, transformer.
struct ModelConfig {
  ConvSpec conv = ConvSpec::desk();
  TransformerConfig transformer;

  void validate() const;
  std::size_t frames_for(std::size_t samples) const { return output_length(conv, samples); }
};

ParameterSet init_model(const ModelConfig& cfg, SeededRng& rng);

/// True for parameters that belong to the transformer stack.
bool is_transformer_parameter(const std::string& name);

struct BranchOutput {
  ad::Var features;  // projected features after masking, T x model_dim
  std::vector<ad::Var> layers;
};

BranchOutput run_branch(const ModelConfig& cfg, const BoundParameters& params,
                        const Waveform& w, const MaskSpec* mask);

/// Student readout: the last layer, frame-normalized so it lives in the same
/// space as the averaged targets.
ad::Var prediction(const BranchOutput& out);

/// Teacher targets from an unmasked pass: mean of the top-M normalized layers.
/// Runs on a gradient-disabled tape.
FeatureSequence teacher_targets(const ModelConfig& cfg, const ParameterSet& teacher,
                                const Waveform& clean);

} // namespace rd2v
