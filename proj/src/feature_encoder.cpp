#include "rd2v/feature_encoder.hpp"

#include "rd2v/errors.hpp"

namespace rd2v {

namespace {

std::string layer_name(const char* kind, std::size_t i, const char* field) {
  return "encoder." + std::string(kind) + std::to_string(i) + "." + field;
}

} // namespace

ConvSpec ConvSpec::standard(std::size_t channels) {
  constexpr std::size_t kernels[] = {10, 3, 3, 3, 3, 2, 2};
  constexpr std::size_t strides[] = {5, 2, 2, 2, 2, 2, 2};
  ConvSpec spec;
  for (std::size_t i = 0; i < 7; ++i) {
    spec.layers.push_back({kernels[i], strides[i], channels});
  }
  return spec;
}

void ConvSpec::validate() const {
  if (layers.empty()) {
    throw ConfigError("conv spec has no layers");
  }
  for (const auto& l : layers) {
    if (l.kernel < 1 || l.stride < 1 || l.channels < 1) {
      throw ConfigError("conv kernels, strides and channels must be >= 1");
    }
  }
}

std::size_t ConvSpec::receptive_field() const {
  // Walk backwards from one output frame: L_in = (L_out - 1) * stride + kernel.
  std::size_t len = 1;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    len = (len - 1) * it->stride + it->kernel;
  }
  return len;
}

std::size_t ConvSpec::total_stride() const {
  std::size_t s = 1;
  for (const auto& l : layers) s *= l.stride;
  return s;
}

std::size_t output_length(const ConvSpec& spec, std::size_t input_samples) {
  spec.validate();
  std::size_t len = input_samples;
  for (const auto& l : spec.layers) {
    if (len < l.kernel) {
      throw LengthError("input of " + std::to_string(input_samples) +
                        " samples is too short; the encoder needs at least " +
                        std::to_string(spec.receptive_field()));
    }
    len = (len - l.kernel) / l.stride + 1;
  }
  return len;
}

void init_feature_encoder(const ConvSpec& spec, ParameterSet& params, SeededRng& rng) {
  spec.validate();
  std::size_t in_channels = 1;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const std::size_t fan_in = l.kernel * in_channels;
    params.add(layer_name("conv", i, "weight"), uniform_init(fan_in, l.channels, fan_in, rng));
    params.add(layer_name("conv", i, "bias"), uniform_init(1, l.channels, fan_in, rng));
    params.add(layer_name("norm", i, "gamma"), Matrix(1, l.channels, 1.0));
    params.add(layer_name("norm", i, "beta"), Matrix(1, l.channels, 0.0));
    in_channels = l.channels;
  }
}

ad::Var encode(const ConvSpec& spec, const BoundParameters& params, ad::Var samples) {
  output_length(spec, samples.rows());
  ad::Var x = samples;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    x = ad::conv1d(x, params[layer_name("conv", i, "weight")],
                   params[layer_name("conv", i, "bias")], l.kernel, l.stride);
    x = ad::layer_norm(x, params[layer_name("norm", i, "gamma")],
                       params[layer_name("norm", i, "beta")]);
    x = ad::gelu(x);
  }
  return x;
}

FeatureSequence encode(const ConvSpec& spec, const ParameterSet& params, const Waveform& w) {
  ad::Tape tape(ad::GradMode::kDisabled);
  const auto bound = bind_frozen(tape, params);
  return encode(spec, bound, waveform_column(tape, w)).value();
}

ad::Var waveform_column(ad::Tape& tape, const Waveform& w) {
  w.validate();
  return tape.constant(Matrix::from_data(w.size(), 1, w.samples));
}

} // namespace rd2v
