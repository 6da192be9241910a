#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "rd2v/errors.hpp"
#include "rd2v/signal.hpp"
#include "support.hpp"

using namespace rd2v;
using rd2v::test::TempDir;

namespace {

Waveform constant_wave(std::size_t n, Real v) { return Waveform{std::vector<Real>(n, v), 16000}; }

// Power computed without the library.
Real mean_square(std::span<const Real> x) {
  Real s = 0.0;
  for (Real v : x) s += v * v;
  return s / Real(x.size());
}

void put_u16(std::ofstream& o, std::uint16_t v) { o.write(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::ofstream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }

// Minimal RIFF writer so format-error cases don't depend on save_wav.
void write_raw_wav(const std::filesystem::path& p, std::uint16_t channels, std::uint16_t bits,
                   std::uint32_t frames) {
  std::ofstream o(p, std::ios::binary);
  const std::uint32_t data_len = frames * channels * (bits / 8);
  o.write("RIFF", 4);
  put_u32(o, 36 + data_len);
  o.write("WAVEfmt ", 8);
  put_u32(o, 16);
  put_u16(o, 1);
  put_u16(o, channels);
  put_u32(o, 16000);
  put_u32(o, 16000 * channels * (bits / 8));
  put_u16(o, std::uint16_t(channels * (bits / 8)));
  put_u16(o, bits);
  o.write("data", 4);
  put_u32(o, data_len);
  for (std::uint32_t i = 0; i < data_len; ++i) o.put(char(i & 0x7f));
}

} // namespace

TEST_CASE("power") {
  CHECK(power(constant_wave(10, 0.0)) == 0.0);
  CHECK(power(constant_wave(10, 0.5)) == 0.25);
  Waveform sine;
  for (int i = 0; i < 1600; ++i) sine.samples.push_back(std::sin(2 * std::numbers::pi * i / 160.0));
  CHECK(std::abs(power(sine) - 0.5) < 1e-9);
  CHECK_THROWS_AS(power(Waveform{}), DomainError);
}

TEST_CASE("mixing gain examples") {
  // Alternating +-sqrt(0.5) has power exactly 0.5.
  Waveform clean, noise;
  for (int i = 0; i < 64; ++i) {
    clean.samples.push_back(i % 2 ? std::sqrt(0.5) : -std::sqrt(0.5));
    noise.samples.push_back(i % 3 ? std::sqrt(0.5) : -std::sqrt(0.5));
  }
  SeededRng rng(1, "gain");
  CHECK(mix_at_snr_detailed(clean, noise, 0.0, rng).gain == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mix_at_snr_detailed(clean, noise, 20.0, rng).gain == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("mixing hits the requested SNR against the power oracle") {
  SeededRng rng(2, "snr");
  for (int i = 0; i < 100; ++i) {
    const Waveform clean = synth_utterance(rng.next_u64(), rng.uniform(0.1, 0.5));
    const Waveform noise = synth_noise(rng.next_u64(), 0.6,
                                       i % 2 ? NoiseKind::kWhite : NoiseKind::kBandLimited);
    const Real snr = rng.uniform(0.0, 25.0);
    SeededRng mix_rng = rng.child("mix", std::uint64_t(i));
    const MixResult r = mix_at_snr_detailed(clean, noise, snr, mix_rng);
    REQUIRE(r.mixed.size() == clean.size());
    std::vector<Real> scaled(clean.size());
    for (std::size_t k = 0; k < clean.size(); ++k) {
      scaled[k] = r.gain * noise.samples[r.noise_offset + k];
    }
    const Real measured = 10.0 * std::log10(mean_square(clean.samples) / mean_square(scaled));
    CHECK(std::abs(measured - snr) < 1e-6);
    CHECK(std::abs(measure_snr(clean, r.mixed) - snr) < 1e-6);
  }
}

TEST_CASE("mixing is additive and deterministic") {
  const Waveform clean = synth_utterance(5, 0.25);
  const Waveform noise = synth_noise(6, 0.5, NoiseKind::kWhite);
  SeededRng a(9, "mix"), b(9, "mix");
  const MixResult r = mix_at_snr_detailed(clean, noise, 7.5, a);
  CHECK(mix_at_snr(clean, noise, 7.5, b).samples == r.mixed.samples);
  for (std::size_t k = 0; k < clean.size(); ++k) {
    const Real diff = r.mixed.samples[k] - clean.samples[k];
    const Real expected = r.gain * noise.samples[r.noise_offset + k];
    CHECK(std::abs(diff - expected) <= 2 * std::numeric_limits<Real>::epsilon());
  }
  CHECK(r.noise_offset + clean.size() <= noise.size());
}

TEST_CASE("mixing errors") {
  SeededRng rng(3, "errors");
  const Waveform clean = synth_utterance(1, 0.1);
  CHECK_THROWS_AS(mix_at_snr(clean, synth_noise(1, 0.05, NoiseKind::kWhite), 5.0, rng),
                  LengthError);
  CHECK_THROWS_AS(mix_at_snr(constant_wave(100, 0.0), constant_wave(100, 0.1), 5.0, rng),
                  DomainError);
  CHECK_THROWS_AS(mix_at_snr(constant_wave(100, 0.1), constant_wave(100, 0.0), 5.0, rng),
                  DomainError);
}

TEST_CASE("synthetic utterances") {
  const Waveform a = synth_utterance(17, 1.0);
  const Waveform b = synth_utterance(17, 1.0);
  CHECK(a.samples == b.samples);
  CHECK(a.size() == 16000);
  Real peak = 0.0;
  for (Real v : a.samples) peak = std::max(peak, std::abs(v));
  CHECK(std::abs(peak - 0.9) < 1e-9);
  CHECK(synth_utterance(18, 1.0).samples != a.samples);
  CHECK_THROWS_AS(synth_utterance(1, 0.0), DomainError);
}

TEST_CASE("synthetic noise") {
  for (NoiseKind kind : {NoiseKind::kWhite, NoiseKind::kBandLimited}) {
    const Waveform a = synth_noise(4, 0.5, kind);
    CHECK(a.samples == synth_noise(4, 0.5, kind).samples);
    CHECK(std::abs(std::sqrt(power(a)) - 0.1) < 1e-6);
  }
  CHECK(parse_noise_kind("white") == NoiseKind::kWhite);
  CHECK(parse_noise_kind("band-limited") == NoiseKind::kBandLimited);
  CHECK_THROWS_AS(parse_noise_kind("pink"), ConfigError);
}

TEST_CASE("white noise has negligible lag-1 autocorrelation") {
  const Waveform w = synth_noise(21, 10.0, NoiseKind::kWhite);
  REQUIRE(w.size() == 160000);
  Real mean = 0.0;
  for (Real v : w.samples) mean += v;
  mean /= Real(w.size());
  Real num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    den += (w.samples[i] - mean) * (w.samples[i] - mean);
    if (i + 1 < w.size()) num += (w.samples[i] - mean) * (w.samples[i + 1] - mean);
  }
  CHECK(std::abs(num / den) < 0.02);
  // The band-limited kind is strongly correlated by design.
  const Waveform b = synth_noise(21, 1.0, NoiseKind::kBandLimited);
  Real bn = 0.0, bd = 0.0;
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    bn += b.samples[i] * b.samples[i + 1];
    bd += b.samples[i] * b.samples[i];
  }
  CHECK(bn / bd > 0.2);
}

TEST_CASE("wav round trip stays within one quantization step") {
  TempDir dir("wav");
  Waveform ramp;
  for (int i = 0; i < 100; ++i) ramp.samples.push_back(-0.99 + 1.98 * i / 99.0);
  save_wav(dir.path() / "ramp.wav", ramp);
  const Waveform back = load_wav(dir.path() / "ramp.wav");
  REQUIRE(back.size() == ramp.size());
  CHECK(back.sample_rate == 16000);
  for (std::size_t i = 0; i < ramp.size(); ++i) {
    CHECK(std::abs(back.samples[i] - ramp.samples[i]) <= 1.0 / 32768.0);
  }
}

TEST_CASE("wav sample rate is respected and out-of-range samples clip on save") {
  TempDir dir("wav_rate");
  Waveform w{{0.5, 1.7, -2.0}, 8000};
  save_wav(dir.path() / "w.wav", w);
  const Waveform back = load_wav(dir.path() / "w.wav");
  CHECK(back.sample_rate == 8000);
  CHECK(back.samples[1] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[2] == -1.0);
}

TEST_CASE("unsupported wav files are format errors") {
  TempDir dir("wav_bad");
  write_raw_wav(dir.path() / "stereo.wav", 2, 16, 10);
  CHECK_THROWS_AS(load_wav(dir.path() / "stereo.wav"), FormatError);
  write_raw_wav(dir.path() / "pcm8.wav", 1, 8, 10);
  CHECK_THROWS_AS(load_wav(dir.path() / "pcm8.wav"), FormatError);
  std::ofstream(dir.path() / "empty.wav").close();
  CHECK_THROWS_AS(load_wav(dir.path() / "empty.wav"), FormatError);
  CHECK_THROWS_AS(load_wav(dir.path() / "missing.wav"), FormatError);
  write_raw_wav(dir.path() / "ok.wav", 1, 16, 10);
  CHECK(load_wav(dir.path() / "ok.wav").size() == 10);
}

TEST_CASE("manifest paths resolve relative to the manifest") {
  TempDir dir("manifest");
  std::filesystem::create_directories(dir.path() / "audio");
  {
    std::ofstream m(dir.path() / "list.txt");
    m << "# corpus\n\naudio/a.wav\naudio/b.wav\n";
  }
  const auto paths = read_manifest(dir.path() / "list.txt");
  REQUIRE(paths.size() == 2);
  CHECK(paths[0] == dir.path() / "audio" / "a.wav");
  write_manifest(dir.path() / "copy.txt", paths);
  CHECK(read_manifest(dir.path() / "copy.txt") == paths);
}

TEST_CASE("waveform validation") {
  CHECK_THROWS_AS(Waveform{}.validate(), DomainError);
  CHECK_THROWS_AS((Waveform{{0.1}, 0}.validate()), DomainError);
  CHECK_THROWS_AS((Waveform{{std::nan("")}, 16000}.validate()), NumericError);
}
