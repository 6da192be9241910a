#include "rd2v/context_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rd2v/errors.hpp"

namespace rd2v {

std::size_t MaskSpec::count() const {
  return std::size_t(std::count(masked.begin(), masked.end(), true));
}

std::vector<std::size_t> MaskSpec::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < masked.size(); ++t) {
    if (masked[t]) out.push_back(t);
  }
  return out;
}

MaskSpec sample_mask(std::size_t T, double p, std::size_t span, SeededRng& rng) {
  if (T < 1) throw DomainError("sample_mask: T must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("sample_mask: p must lie in [0, 1]");
  if (span < 1) throw DomainError("sample_mask: span must be >= 1");
  MaskSpec m = MaskSpec::none(T);
  // One uniform per step, drawn unconditionally, so masks for different p
  // share random numbers and the masked set grows monotonically in p.
  for (std::size_t t = 0; t < T; ++t) {
    if (rng.uniform01() < p) {
      const std::size_t len = std::min(span, T - t);
      m.spans.emplace_back(t, len);
      std::fill_n(m.masked.begin() + std::ptrdiff_t(t), len, true);
    }
  }
  return m;
}

ad::Var apply_mask(ad::Var features, const MaskSpec& mask, ad::Var embedding) {
  return ad::replace_rows(features, mask.masked, embedding);
}

FeatureSequence apply_mask(const FeatureSequence& features, const MaskSpec& mask,
                           std::span<const Real> embedding) {
  if (mask.length() != features.rows()) {
    throw ShapeError("apply_mask: mask covers " + std::to_string(mask.length()) +
                     " steps, features have " + std::to_string(features.rows()));
  }
  if (embedding.size() != features.cols()) {
    throw ShapeError("apply_mask: embedding dimension mismatch");
  }
  FeatureSequence out = features;
  for (std::size_t t = 0; t < mask.length(); ++t) {
    if (mask.masked[t]) std::copy(embedding.begin(), embedding.end(), out.row(t).begin());
  }
  return out;
}

void TransformerConfig::validate() const {
  if (layers < 1 || model_dim < 1 || heads < 1 || ffn_dim < 1) {
    throw ConfigError("transformer sizes must be >= 1");
  }
  if (model_dim % heads != 0) {
    throw ConfigError("model_dim " + std::to_string(model_dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (top_m < 1 || top_m > layers) {
    throw ConfigError("top_m must lie in [1, layers]");
  }
}

namespace {

std::string lname(std::size_t l, const std::string& field) {
  return "transformer.layer" + std::to_string(l) + "." + field;
}

} // namespace

void init_context_encoder(const TransformerConfig& cfg, std::size_t input_dim,
                          ParameterSet& params, SeededRng& rng) {
  cfg.validate();
  const std::size_t d = cfg.model_dim, f = cfg.ffn_dim;
  params.add("proj.norm.gamma", Matrix(1, input_dim, 1.0));
  params.add("proj.norm.beta", Matrix(1, input_dim, 0.0));
  params.add("proj.weight", uniform_init(input_dim, d, input_dim, rng));
  params.add("proj.bias", uniform_init(1, d, input_dim, rng));
  params.add("mask_embedding", uniform_init(1, d, d, rng));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    params.add(lname(l, "ln1.gamma"), Matrix(1, d, 1.0));
    params.add(lname(l, "ln1.beta"), Matrix(1, d, 0.0));
    for (const char* w : {"q", "k", "v", "o"}) {
      params.add(lname(l, std::string("attn.w") + w), uniform_init(d, d, d, rng));
      params.add(lname(l, std::string("attn.b") + w), Matrix(1, d, 0.0));
    }
    params.add(lname(l, "ln2.gamma"), Matrix(1, d, 1.0));
    params.add(lname(l, "ln2.beta"), Matrix(1, d, 0.0));
    params.add(lname(l, "ffn.w1"), uniform_init(d, f, d, rng));
    params.add(lname(l, "ffn.b1"), Matrix(1, f, 0.0));
    params.add(lname(l, "ffn.w2"), uniform_init(f, d, f, rng));
    params.add(lname(l, "ffn.b2"), Matrix(1, d, 0.0));
  }
}

ad::Var project_features(const BoundParameters& params, ad::Var conv_features) {
  ad::Var x = ad::layer_norm(conv_features, params["proj.norm.gamma"], params["proj.norm.beta"]);
  return ad::add_row(ad::matmul(x, params["proj.weight"]), params["proj.bias"]);
}

namespace {

ad::Var linear(ad::Var x, const BoundParameters& p, const std::string& w, const std::string& b) {
  return ad::add_row(ad::matmul(x, p[w]), p[b]);
}

ad::Var self_attention(const TransformerConfig& cfg, const BoundParameters& p, std::size_t l,
                       ad::Var x) {
  const ad::Var q = linear(x, p, lname(l, "attn.wq"), lname(l, "attn.bq"));
  const ad::Var k = linear(x, p, lname(l, "attn.wk"), lname(l, "attn.bk"));
  const ad::Var v = linear(x, p, lname(l, "attn.wv"), lname(l, "attn.bv"));
  const std::size_t dh = cfg.model_dim / cfg.heads;
  const Real inv_sqrt = 1.0 / std::sqrt(Real(dh));
  std::vector<ad::Var> heads;
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const ad::Var qh = ad::slice_cols(q, h * dh, dh);
    const ad::Var kh = ad::slice_cols(k, h * dh, dh);
    const ad::Var vh = ad::slice_cols(v, h * dh, dh);
    const ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    heads.push_back(ad::matmul(ad::softmax_rows(scores), vh));
  }
  return linear(ad::concat_cols(heads), p, lname(l, "attn.wo"), lname(l, "attn.bo"));
}

} // namespace

std::vector<ad::Var> forward(const TransformerConfig& cfg, const BoundParameters& params,
                             ad::Var features) {
  cfg.validate();
  if (features.cols() != cfg.model_dim) {
    throw ShapeError("transformer input has " + std::to_string(features.cols()) +
                     " features, expected " + std::to_string(cfg.model_dim));
  }
  ad::Var x = features;
  if (cfg.positional) {
    x = ad::add(x, params.tape().constant(sinusoidal_positions(x.rows(), x.cols())));
  }
  std::vector<ad::Var> outputs;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const ad::Var h = ad::layer_norm(x, params[lname(l, "ln1.gamma")], params[lname(l, "ln1.beta")]);
    x = ad::add(x, self_attention(cfg, params, l, h));
    const ad::Var h2 = ad::layer_norm(x, params[lname(l, "ln2.gamma")], params[lname(l, "ln2.beta")]);
    const ad::Var ff = ad::gelu(linear(h2, params, lname(l, "ffn.w1"), lname(l, "ffn.b1")));
    x = ad::add(x, linear(ff, params, lname(l, "ffn.w2"), lname(l, "ffn.b2")));
    outputs.push_back(x);
  }
  return outputs;
}

LayerOutputs forward(const TransformerConfig& cfg, const ParameterSet& params,
                     const FeatureSequence& features) {
  ad::Tape tape(ad::GradMode::kDisabled);
  const auto bound = bind_frozen(tape, params);
  LayerOutputs out;
  for (const auto& v : forward(cfg, bound, tape.constant(features))) out.push_back(v.value());
  return out;
}

Matrix sinusoidal_positions(std::size_t T, std::size_t D) {
  Matrix pe(T, D);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < D; ++i) {
      const Real rate = std::pow(10000.0, -Real(2 * (i / 2)) / Real(D));
      pe(t, i) = (i % 2 == 0) ? std::sin(Real(t) * rate) : std::cos(Real(t) * rate);
    }
  }
  return pe;
}

FeatureSequence normalize_frames(const FeatureSequence& f) {
  ad::Tape tape(ad::GradMode::kDisabled);
  return ad::normalize_rows(tape.constant(f), kFrameNormEps).value();
}

FeatureSequence average_top_m(const LayerOutputs& layers, std::size_t M) {
  if (M < 1 || M > layers.size()) {
    throw DomainError("average_top_m: M=" + std::to_string(M) + " outside [1, " +
                      std::to_string(layers.size()) + "]");
  }
  FeatureSequence acc;
  for (std::size_t l = layers.size() - M; l < layers.size(); ++l) {
    FeatureSequence n = normalize_frames(layers[l]);
    if (acc.empty()) {
      acc = std::move(n);
    } else {
      require_same_shape(acc, n, "average_top_m");
      acc += n;
    }
  }
  acc *= 1.0 / Real(M);
  return acc;
}

} // namespace rd2v
