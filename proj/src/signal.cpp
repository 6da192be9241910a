#include "rd2v/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "rd2v/errors.hpp"

namespace rd2v {

namespace fs = std::filesystem;

void Waveform::validate() const {
  if (samples.empty()) {
    throw DomainError("waveform is empty");
  }
  if (sample_rate <= 0) {
    throw DomainError("waveform sample rate must be positive");
  }
  for (Real s : samples) {
    if (!std::isfinite(s)) {
      throw NumericError("waveform contains non-finite samples");
    }
  }
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "white") return NoiseKind::kWhite;
  if (name == "band-limited" || name == "band_limited") return NoiseKind::kBandLimited;
  throw ConfigError("unknown noise kind '" + std::string(name) + "'");
}

std::string_view to_string(NoiseKind kind) {
  return kind == NoiseKind::kWhite ? "white" : "band-limited";
}

Real power(const Waveform& w) {
  if (w.samples.empty()) {
    throw DomainError("power of an empty waveform");
  }
  Real acc = 0.0;
  for (Real s : w.samples) acc += s * s;
  return acc / Real(w.samples.size());
}

MixResult mix_at_snr_detailed(const Waveform& clean, const Waveform& noise, Real snr_db,
                              SeededRng& rng) {
  clean.validate();
  noise.validate();
  if (noise.size() < clean.size()) {
    throw LengthError("noise has " + std::to_string(noise.size()) +
                      " samples, clean needs " + std::to_string(clean.size()));
  }
  const Real p_clean = power(clean);
  if (!(p_clean > 0.0)) {
    throw DomainError("clean waveform has zero power");
  }
  const std::size_t offset = rng.below(noise.size() - clean.size() + 1);
  Waveform segment{{noise.samples.begin() + std::ptrdiff_t(offset),
                    noise.samples.begin() + std::ptrdiff_t(offset + clean.size())},
                   noise.sample_rate};
  const Real p_noise = power(segment);
  if (!(p_noise > 0.0)) {
    throw DomainError("noise segment has zero power");
  }
  const Real gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  MixResult out;
  out.gain = gain;
  out.noise_offset = offset;
  out.mixed.sample_rate = clean.sample_rate;
  out.mixed.samples.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    out.mixed.samples[i] = clean.samples[i] + gain * segment.samples[i];
  }
  return out;
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, Real snr_db,
                    SeededRng& rng) {
  return mix_at_snr_detailed(clean, noise, snr_db, rng).mixed;
}

Real measure_snr(const Waveform& clean, const Waveform& mixed) {
  if (clean.size() != mixed.size()) {
    throw LengthError("measure_snr: clean and mixed lengths differ");
  }
  Waveform residual{std::vector<Real>(clean.size()), clean.sample_rate};
  for (std::size_t i = 0; i < clean.size(); ++i) {
    residual.samples[i] = mixed.samples[i] - clean.samples[i];
  }
  const Real pn = power(residual);
  if (!(pn > 0.0)) {
    throw DomainError("measure_snr: mixed signal equals clean signal");
  }
  return 10.0 * std::log10(power(clean) / pn);
}

namespace {

std::size_t sample_count(double duration_s, int sample_rate) {
  if (!(duration_s > 0.0)) {
    throw DomainError("duration must be positive");
  }
  if (sample_rate <= 0) {
    throw DomainError("sample rate must be positive");
  }
  return std::max<std::size_t>(1, std::size_t(std::llround(duration_s * sample_rate)));
}

} // namespace

Waveform synth_utterance(std::uint64_t seed, double duration_s, int sample_rate) {
  const std::size_t n = sample_count(duration_s, sample_rate);
  SeededRng rng(seed, "synth/utterance");
  const auto partials = rng.uniform_int(3, 8);
  struct Partial {
    Real freq, amp, phase, mod_freq, mod_phase;
  };
  std::vector<Partial> ps;
  for (std::int64_t i = 0; i < partials; ++i) {
    ps.push_back({rng.uniform(80.0, 0.35 * sample_rate), rng.uniform(0.2, 1.0),
                  rng.uniform(0.0, 2 * std::numbers::pi), rng.uniform(1.5, 8.0),
                  rng.uniform(0.0, 2 * std::numbers::pi)});
  }
  Waveform w{std::vector<Real>(n, 0.0), sample_rate};
  const Real fade = 0.01 * sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    const Real t = Real(i) / sample_rate;
    Real s = 0.0;
    for (const auto& p : ps) {
      const Real env = 0.5 * (1.0 + std::sin(2 * std::numbers::pi * p.mod_freq * t + p.mod_phase));
      s += p.amp * env * std::sin(2 * std::numbers::pi * p.freq * t + p.phase);
    }
    const Real edge = std::min(Real(i), Real(n - 1 - i));
    if (edge < fade) {
      s *= 0.5 * (1.0 - std::cos(std::numbers::pi * edge / fade));
    }
    w.samples[i] = s;
  }
  Real peak = 0.0;
  for (Real s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    for (auto& s : w.samples) s *= 0.9 / peak;
  }
  return w;
}

Waveform synth_noise(std::uint64_t seed, double duration_s, NoiseKind kind, int sample_rate) {
  const std::size_t n = sample_count(duration_s, sample_rate);
  SeededRng rng(seed, std::string("synth/noise/") + std::string(to_string(kind)));
  Waveform w{std::vector<Real>(n), sample_rate};
  for (auto& s : w.samples) s = rng.normal();
  if (kind == NoiseKind::kBandLimited) {
    // RBJ constant-peak-gain band-pass biquad.
    const Real f0 = rng.uniform(300.0, 0.2 * sample_rate);
    const Real q = rng.uniform(0.7, 2.0);
    const Real w0 = 2 * std::numbers::pi * f0 / sample_rate;
    const Real alpha = std::sin(w0) / (2 * q);
    const Real a0 = 1 + alpha;
    const Real b0 = alpha / a0, b2 = -alpha / a0;
    const Real a1 = -2 * std::cos(w0) / a0, a2 = (1 - alpha) / a0;
    Real x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (auto& s : w.samples) {
      const Real x = s;
      const Real y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x;
      y2 = y1;
      y1 = y;
      s = y;
    }
  }
  const Real rms = std::sqrt(power(w));
  for (auto& s : w.samples) s *= 0.1 / rms;
  return w;
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = char((std::uint64_t(v) >> (8 * i)) & 0xFF);
  }
  os.write(bytes.data(), bytes.size());
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint16_t get_u16(const unsigned char* p) {
  return std::uint16_t(p[0] | p[1] << 8);
}

} // namespace

Waveform load_wav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) {
    return FormatError(path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  int sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      throw fail("truncated chunk");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw fail("short fmt chunk");
      const auto format = get_u16(bytes.data() + body);
      const auto channels = get_u16(bytes.data() + body + 2);
      sample_rate = int(get_u32(bytes.data() + body + 4));
      const auto bits = get_u16(bytes.data() + body + 14);
      if (format != 1 || bits != 16) {
        throw fail("only 16-bit PCM is supported");
      }
      if (channels != 1) {
        throw fail("expected mono, found " + std::to_string(channels) + " channels");
      }
      if (sample_rate <= 0) throw fail("invalid sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      if (len < 2) throw fail("no samples");
      Waveform w{std::vector<Real>(len / 2), sample_rate};
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto raw = std::int16_t(get_u16(bytes.data() + body + 2 * i));
        w.samples[i] = Real(raw) / 32768.0;
      }
      return w;
    }
    pos = body + len + (len & 1);
  }
  throw fail("no data chunk");
}

void save_wav(const fs::path& path, const Waveform& w) {
  w.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot write " + path.string());
  }
  const auto data_bytes = std::uint32_t(w.samples.size() * 2);
  out.write("RIFF", 4);
  put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, 1);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, std::uint32_t(w.sample_rate));
  put<std::uint32_t>(out, std::uint32_t(w.sample_rate) * 2);
  put<std::uint16_t>(out, 2);
  put<std::uint16_t>(out, 16);
  out.write("data", 4);
  put<std::uint32_t>(out, data_bytes);
  for (Real s : w.samples) {
    const auto q = std::clamp<long>(std::lround(s * 32768.0), -32768, 32767);
    put<std::uint16_t>(out, std::uint16_t(std::int16_t(q)));
  }
  if (!out) {
    throw FormatError("write failed for " + path.string());
  }
}

std::vector<fs::path> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open manifest " + path.string());
  }
  const fs::path base = path.parent_path();
  std::vector<fs::path> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    entries.push_back(base / fs::path(line));
  }
  return entries;
}

void write_manifest(const fs::path& path, const std::vector<fs::path>& entries) {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot write manifest " + path.string());
  }
  for (const auto& e : entries) {
    out << e.generic_string() << '\n';
  }
}

} // namespace rd2v
