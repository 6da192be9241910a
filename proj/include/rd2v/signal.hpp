#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rd2v/matrix.hpp"
#include "rd2v/rng.hpp"

namespace rd2v {

/// Mono audio. Samples are nominally in [-1, 1]; mixing can push a sum past
/// that range, which is clipped only when writing 16-bit PCM.
struct Waveform {
  std::vector<Real> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration() const { return double(samples.size()) / sample_rate; }
  /// Throws DomainError if empty, non-finite, or sample_rate <= 0.
  void validate() const;
};

enum class NoiseKind { kWhite, kBandLimited };

NoiseKind parse_noise_kind(std::string_view name);
std::string_view to_string(NoiseKind kind);

/// Mean squared amplitude.
Real power(const Waveform& w);

struct MixResult {
  Waveform mixed;
  Real gain = 0.0;
  std::size_t noise_offset = 0;
};

/// clean + g * noise[offset : offset + len(clean)], with g chosen so that the
/// clean-to-scaled-noise power ratio is exactly snr_db. The offset is drawn
/// uniformly from `rng`.
MixResult mix_at_snr_detailed(const Waveform& clean, const Waveform& noise, Real snr_db,
                              SeededRng& rng);
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, Real snr_db,
                    SeededRng& rng);

/// 10 log10(P(clean) / P(mixed - clean)).
Real measure_snr(const Waveform& clean, const Waveform& mixed);

/// Sum of 3-8 slowly modulated sinusoids, peak-normalized to 0.9.
Waveform synth_utterance(std::uint64_t seed, double duration_s, int sample_rate = 16000);

/// White or band-passed Gaussian noise, RMS-normalized to 0.1.
Waveform synth_noise(std::uint64_t seed, double duration_s, NoiseKind kind,
                     int sample_rate = 16000);

/// 16-bit PCM mono RIFF/WAVE.
Waveform load_wav(const std::filesystem::path& path);
void save_wav(const std::filesystem::path& path, const Waveform& w);

/// One path per line, relative to the manifest's directory. Blank lines and
/// lines starting with '#' are skipped.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::filesystem::path>& entries);

} // namespace rd2v
