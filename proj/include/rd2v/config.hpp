#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rd2v/ema.hpp"
#include "rd2v/model.hpp"
#include "rd2v/objectives.hpp"
#include "rd2v/optimizer.hpp"

namespace rd2v {

/// Size presets. `paper` is the full-size architecture; `desk` and
/// `toy` shrink it for a single CPU.
enum class Profile { kPaper, kDesk, kToy };

Profile parse_profile(std::string_view name);
std::string_view to_string(Profile p);

struct MaskConfig {
  double prob = 0.065;
  std::size_t span = 10;
};

struct NegativeConfig {
  NegativeCounts counts;
  /// When > 0, k falls linearly from n_standard + n_non_semantic to k over
  /// this many steps.
  std::int64_t k_anneal_steps = 0;
  std::size_t patch_min = 3;
  std::size_t patch_max = 5;
};

struct DataConfig {
  int sample_rate = 16000;
  double min_duration = 1.0;
  double max_duration = 3.0;
  double snr_min = 0.0;
  double snr_max = 25.0;
  std::size_t corpus_size = 32;
  std::size_t noise_count = 8;
  std::string manifest;
  std::string noise_manifest;
  std::size_t probe_size = 48;
};

struct TrainConfig {
  Profile profile = Profile::kDesk;
  ModelConfig model;
  EmaSchedule ema;
  bool ema_transformer_only = false;
  LossConfig loss;
  MaskConfig mask;
  NegativeConfig negatives;
  AdamConfig optimizer;
  /// -1 resolves to 10% of `steps`.
  std::int64_t warmup_steps = -1;
  DataConfig data;
  std::int64_t steps = 1000;
  std::size_t batch_size = 4;
  std::uint64_t seed = 1;
  std::string output_dir = "rd2v_run";
  std::int64_t checkpoint_every = 0;

  static TrainConfig for_profile(Profile p);

  void validate() const;
  std::int64_t resolved_warmup() const;
  AdamConfig resolved_optimizer() const;
  /// k in effect at the given 1-based step, honoring k annealing.
  std::size_t k_at(std::int64_t step) const;
  PoolPlan pool_plan_at(std::int64_t step) const;

  /// FNV-1a over the canonical JSON of every field that influences the
  /// training trajectory (output location and step budget excluded).
  std::uint64_t digest() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Overlays `patch` onto the defaults of the profile it names (or `base`'s
/// profile). Unknown keys raise ConfigError.
TrainConfig config_from_json(const nlohmann::json& patch, const TrainConfig* base = nullptr);

/// TOML file with the same key layout as to_json().
TrainConfig load_config(const std::filesystem::path& path);
nlohmann::json toml_to_json(std::string_view toml_text);

} // namespace rd2v
