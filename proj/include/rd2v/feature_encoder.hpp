#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rd2v/autodiff.hpp"
#include "rd2v/parameters.hpp"
#include "rd2v/signal.hpp"

namespace rd2v {

/// T x D matrix: T time steps, D features per step.
using FeatureSequence = Matrix;

struct ConvLayerSpec {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t channels = 1;
};

/// Strided 1-D convolution stack over raw samples.
struct ConvSpec {
  std::vector<ConvLayerSpec> layers;

  /// Kernels (10,3,3,3,3,2,2), strides (5,2,2,2,2,2,2), with `channels` per layer.
  static ConvSpec standard(std::size_t channels);
  static ConvSpec paper() { return standard(512); }
  static ConvSpec desk() { return standard(64); }

  void validate() const;
  /// Minimum number of input samples that yields one output frame.
  std::size_t receptive_field() const;
  std::size_t total_stride() const;
  std::size_t output_channels() const { return layers.back().channels; }
};

/// Applies floor((L - kernel) / stride) + 1 layer by layer. Throws LengthError
/// naming the minimum length when the input is shorter than the receptive field.
std::size_t output_length(const ConvSpec& spec, std::size_t input_samples);

/// Adds encoder.conv{i}.{weight,bias} and encoder.norm{i}.{gamma,beta}.
void init_feature_encoder(const ConvSpec& spec, ParameterSet& params, SeededRng& rng);

/// Conv -> per-frame layer norm -> GELU for every layer. `samples` is a
/// (samples x 1) column.
ad::Var encode(const ConvSpec& spec, const BoundParameters& params, ad::Var samples);

FeatureSequence encode(const ConvSpec& spec, const ParameterSet& params, const Waveform& w);

ad::Var waveform_column(ad::Tape& tape, const Waveform& w);

} // namespace rd2v
