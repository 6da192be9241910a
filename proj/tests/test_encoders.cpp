#include <doctest.h>

#include <cmath>

#include "rd2v/context_encoder.hpp"
#include "rd2v/errors.hpp"
#include "rd2v/feature_encoder.hpp"
#include "support.hpp"

using namespace rd2v;
using rd2v::test::gradient_error;
using rd2v::test::random_matrix;

namespace {

// Per-layer floor((L - k) / s) + 1, written out independently of the library.
std::size_t frames_by_hand(std::size_t n) {
  const std::size_t k[] = {10, 3, 3, 3, 3, 2, 2};
  const std::size_t s[] = {5, 2, 2, 2, 2, 2, 2};
  for (int i = 0; i < 7; ++i) {
    if (n < k[i]) return 0;
    n = (n - k[i]) / s[i] + 1;
  }
  return n;
}

Waveform noise_wave(std::size_t n, SeededRng& rng) {
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = 0.3 * rng.normal();
  return w;
}

ParameterSet encoder_params(const ConvSpec& spec, std::uint64_t seed) {
  ParameterSet p;
  SeededRng rng(seed, "encoder");
  init_feature_encoder(spec, p, rng);
  return p;
}

ParameterSet context_params(const TransformerConfig& cfg, std::size_t input_dim,
                            std::uint64_t seed) {
  ParameterSet p;
  SeededRng rng(seed, "context");
  init_context_encoder(cfg, input_dim, p, rng);
  return p;
}

} // namespace

TEST_SUITE("feature encoder") {
  TEST_CASE("standard stack framing") {
    const ConvSpec spec = ConvSpec::paper();
    REQUIRE(spec.layers.size() == 7);
    CHECK(output_length(spec, 16000) == 49);
    CHECK(output_length(spec, 16000) == frames_by_hand(16000));
    CHECK(output_length(spec, 400) == 1);
    CHECK(output_length(spec, 32000) == 99);
    CHECK(spec.receptive_field() == 400);
    CHECK(spec.total_stride() == 320);
    CHECK(spec.output_channels() == 512);
    CHECK(ConvSpec::desk().output_channels() == 64);
  }

  TEST_CASE("input under the receptive field is a length error naming the minimum") {
    try {
      output_length(ConvSpec::paper(), 399);
      FAIL("expected LengthError");
    } catch (const LengthError& e) {
      CHECK(std::string(e.what()).find("400") != std::string::npos);
    }
  }

  TEST_CASE("invalid specs are rejected") {
    ConvSpec s = ConvSpec::desk();
    s.layers[2].stride = 0;
    CHECK_THROWS(s.validate());
    ConvSpec empty;
    CHECK_THROWS(empty.validate());
  }

  TEST_CASE("formula matches execution on random lengths") {
    const ConvSpec spec = ConvSpec::standard(8);
    const ParameterSet p = encoder_params(spec, 1);
    SeededRng rng(2, "lengths");
    for (int i = 0; i < 100; ++i) {
      const auto n = std::size_t(rng.uniform_int(400, 48000));
      const FeatureSequence f = encode(spec, p, noise_wave(n, rng));
      CHECK(f.rows() == output_length(spec, n));
      CHECK(f.rows() == frames_by_hand(n));
      CHECK(f.cols() == 8);
      CHECK(f.all_finite());
    }
  }

  TEST_CASE("zero weights and zero input give zero output") {
    const ConvSpec spec = ConvSpec::standard(4);
    ParameterSet p = encoder_params(spec, 3);
    for (auto& [_, m] : p) m = Matrix(m.rows(), m.cols());
    const FeatureSequence f = encode(spec, p, Waveform{std::vector<Real>(1600, 0.0), 16000});
    CHECK(max_abs(f) == 0.0);
  }

  TEST_CASE("first convolution is linear before normalization") {
    const ConvSpec spec = ConvSpec::desk();
    const ParameterSet p = encoder_params(spec, 4);
    SeededRng rng(5, "linear");
    const Matrix x = random_matrix(2000, 1, rng, 0.3);
    const Real a = 2.75;
    ad::Tape t(ad::GradMode::kDisabled);
    const ad::Var w = t.constant(p.at("encoder.conv0.weight"));
    const ad::Var b = t.constant(Matrix(1, spec.layers[0].channels));
    const auto& l0 = spec.layers[0];
    const Matrix y = ad::conv1d(t.constant(x), w, b, l0.kernel, l0.stride).value();
    const Matrix ya = ad::conv1d(t.constant(a * x), w, b, l0.kernel, l0.stride).value();
    CHECK(max_abs_diff(ya, a * y) <= 1e-9);
  }

  TEST_CASE("frames depend only on their receptive field") {
    const ConvSpec spec = ConvSpec::standard(8);
    const ParameterSet p = encoder_params(spec, 6);
    SeededRng rng(7, "locality");
    const Waveform w = noise_wave(16000, rng);
    const FeatureSequence base = encode(spec, p, w);
    for (const std::size_t t : {0u, 17u, 48u}) {
      const std::size_t lo = t * spec.total_stride();
      const std::size_t hi = lo + spec.receptive_field();
      Waveform perturbed = w;
      for (std::size_t i = 0; i < perturbed.size(); ++i) {
        if (i < lo || i >= hi) perturbed.samples[i] += 0.5 * rng.normal();
      }
      const FeatureSequence f = encode(spec, p, perturbed);
      for (std::size_t d = 0; d < f.cols(); ++d) CHECK(f(t, d) == base(t, d));
      // A frame whose field overlaps the perturbation does move.
      CHECK(max_abs_diff(f, base) > 0.0);
    }
  }

  TEST_CASE("readout gradient with respect to conv weights") {
    ConvSpec spec;
    spec.layers = {{10, 5, 4}, {3, 2, 4}, {2, 2, 3}};
    const ParameterSet p = encoder_params(spec, 8);
    SeededRng rng(9, "encoder/grad");
    const Matrix wave = random_matrix(120, 1, rng, 0.4);
    const std::size_t T = output_length(spec, 120);
    const Matrix r = random_matrix(T, 3, rng);
    for (const char* name : {"encoder.conv0.weight", "encoder.conv1.weight", "encoder.conv2.weight",
                             "encoder.norm1.gamma"}) {
      const double err = gradient_error(p.at(name), [&](ad::Tape& t, ad::Var x) {
        const auto bound = bind_frozen(t, p).with(name, x);
        return ad::sum(ad::mul(encode(spec, bound, t.constant(wave)), t.constant(r)));
      });
      INFO(name);
      CHECK(err < 1e-4);
    }
  }

  TEST_CASE("initialization scale follows fan-in") {
    const ConvSpec spec = ConvSpec::desk();
    const ParameterSet p = encoder_params(spec, 10);
    const Matrix& w1 = p.at("encoder.conv1.weight");
    CHECK(w1.rows() == 3 * 64);
    CHECK(max_abs(w1) <= 1.0 / std::sqrt(3.0 * 64.0));
    CHECK(p.at("encoder.norm0.gamma") == Matrix(1, 64, 1.0));
  }
}

TEST_SUITE("span masking") {
  TEST_CASE("probability extremes") {
    SeededRng rng(1, "mask");
    CHECK(sample_mask(50, 0.0, 10, rng).count() == 0);
    const MaskSpec full = sample_mask(10, 1.0, 10, rng);
    CHECK(full.count() == 10);
  }

  TEST_CASE("spans are clipped, in range and agree with the mask") {
    SeededRng rng(2, "mask/spans");
    for (int i = 0; i < 300; ++i) {
      const auto T = std::size_t(rng.uniform_int(1, 80));
      const MaskSpec m = sample_mask(T, rng.uniform(0.0, 0.3), 10, rng);
      REQUIRE(m.length() == T);
      std::vector<bool> covered(T, false);
      for (const auto& [start, len] : m.spans) {
        CHECK(start < T);
        CHECK(start + len <= T);
        CHECK(len == std::min<std::size_t>(10, T - start));
        for (std::size_t k = start; k < start + len; ++k) covered[k] = true;
      }
      CHECK(covered == m.masked);
      for (std::size_t t : m.indices()) CHECK(t < T);
    }
  }

  TEST_CASE("masked fraction matches an independent simulation of the sampling law") {
    const std::size_t T = 1000, span = 10;
    const double p = 0.065;
    double lib = 0.0, oracle = 0.0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
      SeededRng rng(s, "mask/fraction");
      lib += double(sample_mask(T, p, span, rng).count()) / double(T);
      SeededRng other(s, "mask/oracle");
      std::vector<bool> m(T, false);
      for (std::size_t t = 0; t < T; ++t) {
        if (other.uniform01() < p) {
          for (std::size_t k = t; k < std::min(T, t + span); ++k) m[k] = true;
        }
      }
      oracle += double(std::count(m.begin(), m.end(), true)) / double(T);
    }
    lib /= 1000.0;
    oracle /= 1000.0;
    CHECK(std::abs(lib - oracle) < 0.02);
    CHECK(std::abs(lib - (1.0 - std::pow(1.0 - p, 10.0))) < 0.02);
  }

  TEST_CASE("masked set grows with p under common random numbers") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      std::vector<bool> prev;
      for (double p = 0.0; p <= 1.0; p += 0.05) {
        SeededRng rng(s, "mask/monotone");
        const MaskSpec m = sample_mask(120, p, 10, rng);
        if (!prev.empty()) {
          for (std::size_t t = 0; t < 120; ++t) CHECK((!prev[t] || m.masked[t]));
        }
        prev = m.masked;
      }
    }
  }

  TEST_CASE("apply_mask replaces exactly the masked rows") {
    SeededRng rng(3, "apply");
    const Matrix f = random_matrix(6, 4, rng);
    const Matrix e = random_matrix(1, 4, rng);
    CHECK(apply_mask(f, MaskSpec::none(6), e.row(0)) == f);

    MaskSpec all = MaskSpec::none(6);
    all.masked.assign(6, true);
    const Matrix full = apply_mask(f, all, e.row(0));
    for (std::size_t t = 0; t < 6; ++t) {
      for (std::size_t d = 0; d < 4; ++d) CHECK(full(t, d) == e(0, d));
    }

    for (int i = 0; i < 100; ++i) {
      MaskSpec m = MaskSpec::none(6);
      for (std::size_t t = 0; t < 6; ++t) m.masked[t] = rng.bernoulli(0.4);
      const Matrix out = apply_mask(f, m, e.row(0));
      for (std::size_t t = 0; t < 6; ++t) {
        for (std::size_t d = 0; d < 4; ++d) CHECK(out(t, d) == (m.masked[t] ? e(0, d) : f(t, d)));
      }
    }
    CHECK_THROWS_AS(apply_mask(f, MaskSpec::none(5), e.row(0)), ShapeError);
  }
}

TEST_SUITE("transformer") {
  TEST_CASE("config validation") {
    TransformerConfig c{2, 30, 4, 64, 2, true};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {2, 32, 4, 64, 3, true};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {2, 32, 4, 64, 0, true};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {12, 768, 12, 3072, 8, true};
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("zero attention and feed-forward weights pass the input through") {
    const TransformerConfig cfg{3, 16, 4, 32, 2, true};
    ParameterSet p = context_params(cfg, 8, 1);
    for (auto& [name, m] : p) {
      if (name.find(".attn.") != std::string::npos || name.find(".ffn.") != std::string::npos) {
        m = Matrix(m.rows(), m.cols());
      }
    }
    SeededRng rng(2, "passthrough");
    const Matrix x = random_matrix(7, 16, rng);
    const LayerOutputs out = forward(cfg, p, x);
    REQUIRE(out.size() == 3);
    const Matrix expected = x + sinusoidal_positions(7, 16);
    for (const auto& layer : out) {
      CHECK(layer.all_finite());
      CHECK(max_abs_diff(layer, expected) <= 1e-12);
    }
  }

  TEST_CASE("without positions, permuting frames permutes outputs") {
    const TransformerConfig cfg{2, 16, 4, 32, 2, false};
    const ParameterSet p = context_params(cfg, 8, 3);
    SeededRng rng(4, "equivariance");
    for (int i = 0; i < 20; ++i) {
      const Matrix x = random_matrix(6, 16, rng);
      const std::size_t a = rng.below(6), b = (a + 1 + rng.below(5)) % 6;
      std::vector<std::size_t> order = {0, 1, 2, 3, 4, 5};
      std::swap(order[a], order[b]);
      const LayerOutputs base = forward(cfg, p, x);
      const LayerOutputs swapped = forward(cfg, p, gather_rows(x, order));
      for (std::size_t l = 0; l < base.size(); ++l) {
        CHECK(max_abs_diff(swapped[l], gather_rows(base[l], order)) <= 1e-12);
      }
    }
  }

  TEST_CASE("positions break permutation equivariance") {
    const TransformerConfig cfg{1, 16, 4, 32, 1, true};
    const ParameterSet p = context_params(cfg, 8, 5);
    SeededRng rng(6, "positions");
    const Matrix x = random_matrix(4, 16, rng);
    const std::vector<std::size_t> order = {1, 0, 2, 3};
    const Matrix base = forward(cfg, p, x).back();
    CHECK(max_abs_diff(forward(cfg, p, gather_rows(x, order)).back(), gather_rows(base, order)) >
          1e-6);
  }

  TEST_CASE("forward is deterministic and returns every layer") {
    const TransformerConfig cfg{4, 16, 2, 24, 3, true};
    const ParameterSet p = context_params(cfg, 8, 7);
    SeededRng rng(8, "det");
    const Matrix x = random_matrix(9, 16, rng);
    const LayerOutputs a = forward(cfg, p, x), b = forward(cfg, p, x);
    REQUIRE(a.size() == 4);
    for (std::size_t l = 0; l < 4; ++l) {
      CHECK(a[l] == b[l]);
      CHECK(a[l].rows() == 9);
      CHECK(a[l].cols() == 16);
    }
    CHECK_THROWS_AS(forward(cfg, p, random_matrix(9, 15, rng)), ShapeError);
  }

  TEST_CASE("mean of the last layer: attention weight gradients") {
    const TransformerConfig cfg{2, 8, 2, 12, 2, true};
    ParameterSet p = context_params(cfg, 8, 9);
    SeededRng rng(10, "attn/grad");
    for (auto& [_, m] : p) {
      for (auto& v : m.data()) v += 0.1 * rng.normal();
    }
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      const Matrix x = random_matrix(5, 8, rng);
      for (const char* name : {"transformer.layer0.attn.wq", "transformer.layer0.attn.wk",
                               "transformer.layer0.attn.wv", "transformer.layer0.attn.wo",
                               "transformer.layer1.attn.wq", "transformer.layer1.attn.wo"}) {
        worst = std::max(worst, gradient_error(p.at(name), [&](ad::Tape& t, ad::Var w) {
          const auto bound = bind_frozen(t, p).with(name, w);
          return ad::mean(forward(cfg, bound, t.constant(x)).back());
        }));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_SUITE("top-M averaging") {
  // Standardization written out directly.
  Matrix standardize(const Matrix& m) {
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      Real mean = 0.0, var = 0.0;
      for (Real v : m.row(r)) mean += v;
      mean /= Real(m.cols());
      for (Real v : m.row(r)) var += (v - mean) * (v - mean);
      var /= Real(m.cols());
      for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = (m(r, c) - mean) / std::sqrt(var + kFrameNormEps);
    }
    return out;
  }

  TEST_CASE("M = 1 gives the normalized last layer") {
    SeededRng rng(1, "topm");
    const LayerOutputs layers = {random_matrix(5, 6, rng), random_matrix(5, 6, rng)};
    CHECK(max_abs_diff(average_top_m(layers, 1), standardize(layers[1])) <= 1e-12);
  }

  TEST_CASE("identical layers average to their normalized value") {
    SeededRng rng(2, "topm/same");
    const Matrix l = random_matrix(4, 8, rng);
    const LayerOutputs layers(5, l);
    for (std::size_t M = 1; M <= 5; ++M) {
      CHECK(max_abs_diff(average_top_m(layers, M), standardize(l)) <= 1e-12);
    }
  }

  TEST_CASE("two normalized layers average to (u + v) / 2") {
    SeededRng rng(3, "topm/two");
    const Matrix u = standardize(random_matrix(4, 8, rng));
    const Matrix v = standardize(random_matrix(4, 8, rng));
    // Re-standardizing u and v moves them only by the variance floor.
    CHECK(max_abs_diff(average_top_m({u, v}, 2), 0.5 * (u + v)) <= 1e-11);
  }

  TEST_CASE("invariant to positive affine rescaling of a layer") {
    SeededRng rng(4, "topm/affine");
    for (int i = 0; i < 100; ++i) {
      LayerOutputs layers = {random_matrix(5, 6, rng), random_matrix(5, 6, rng),
                             random_matrix(5, 6, rng)};
      const Matrix base = average_top_m(layers, 2);
      const std::size_t which = 1 + rng.below(2);
      const Real a = std::exp(rng.uniform(-2, 2));
      for (std::size_t r = 0; r < 5; ++r) {
        const Real b = rng.uniform(-3, 3);
        for (auto& v : layers[which].row(r)) v = a * v + b;
      }
      CHECK(max_abs_diff(average_top_m(layers, 2), base) <= 1e-9);
    }
  }

  TEST_CASE("M out of range is a domain error") {
    const LayerOutputs layers(3, Matrix(2, 4, 1.0));
    CHECK_THROWS_AS(average_top_m(layers, 0), DomainError);
    CHECK_THROWS_AS(average_top_m(layers, 4), DomainError);
  }
}
