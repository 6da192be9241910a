#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rd2v/autodiff.hpp"
#include "rd2v/feature_encoder.hpp"
#include "rd2v/parameters.hpp"
#include "rd2v/rng.hpp"

namespace rd2v {

struct MaskSpec {
  std::vector<bool> masked;
  /// (start, length) of each selected span after clipping at T.
  std::vector<std::pair<std::size_t, std::size_t>> spans;

  std::size_t length() const { return masked.size(); }
  std::size_t count() const;
  std::vector<std::size_t> indices() const;
  static MaskSpec none(std::size_t T) { return {std::vector<bool>(T, false), {}}; }
};

/// Every t in [0, T) starts a span with probability p; spans of `span` steps
/// are clipped at T and overlapping spans merge.
MaskSpec sample_mask(std::size_t T, double p, std::size_t span, SeededRng& rng);

/// Replaces masked rows by the mask embedding (1 x D).
ad::Var apply_mask(ad::Var features, const MaskSpec& mask, ad::Var embedding);
FeatureSequence apply_mask(const FeatureSequence& features, const MaskSpec& mask,
                           std::span<const Real> embedding);

struct TransformerConfig {
  std::size_t layers = 2;
  std::size_t model_dim = 32;
  std::size_t heads = 4;
  std::size_t ffn_dim = 64;
  std::size_t top_m = 2;
  bool positional = true;

  void validate() const;
};

using LayerOutputs = std::vector<FeatureSequence>;

/// Adds proj.* (input layer norm + linear from conv channels to model_dim),
/// mask_embedding and transformer.layer{l}.*.
void init_context_encoder(const TransformerConfig& cfg, std::size_t input_dim,
                          ParameterSet& params, SeededRng& rng);

/// Layer norm over conv channels, then linear projection to model_dim.
ad::Var project_features(const BoundParameters& params, ad::Var conv_features);

/// Pre-norm transformer encoder; returns the output of every layer.
std::vector<ad::Var> forward(const TransformerConfig& cfg, const BoundParameters& params,
                             ad::Var features);
LayerOutputs forward(const TransformerConfig& cfg, const ParameterSet& params,
                     const FeatureSequence& features);

/// Fixed sinusoidal encodings, T x D.
Matrix sinusoidal_positions(std::size_t T, std::size_t D);

inline constexpr Real kFrameNormEps = 1e-12;

/// Per-frame standardization: each row shifted to zero mean and scaled to
/// unit variance.
FeatureSequence normalize_frames(const FeatureSequence& f);

/// Mean of the last M frame-normalized layers.
FeatureSequence average_top_m(const LayerOutputs& layers, std::size_t M);

} // namespace rd2v
