#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "rd2v/checkpoint.hpp"
#include "rd2v/config.hpp"
#include "rd2v/objectives.hpp"
#include "rd2v/optimizer.hpp"
#include "rd2v/signal.hpp"

namespace rd2v {

/// Clean utterances and noise clips that batches are drawn from.
struct Corpus {
  std::vector<Waveform> clean;
  std::vector<Waveform> noise;

  /// Manifests when configured, otherwise a seeded synthetic corpus.
  static Corpus from_config(const TrainConfig& cfg);
  /// `count` utterances with durations in [min_duration, max_duration] and
  /// `noise_count` clips long enough to cover any of them. Distinct labels
  /// give disjoint corpora under the same seed.
  static Corpus synthetic(std::uint64_t seed, std::string_view label, std::size_t count,
                          std::size_t noise_count, const DataConfig& data);
};

struct AudioPair {
  Waveform clean;
  Waveform noisy;
};

/// Draws clean/noise indices and an SNR for each batch slot from the stream
/// of the given step.
std::vector<AudioPair> make_batch(const TrainConfig& cfg, const Corpus& corpus,
                                  std::int64_t step);

struct TrainState {
  ParameterSet student;
  ParameterSet teacher;
  Adam adam;
  std::int64_t step = 0;
};

TrainState init_state(const TrainConfig& cfg);

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& cfg);
/// Throws ConfigError when the checkpoint was written under a different
/// training configuration.
TrainState restore_state(const Checkpoint& ckpt, const TrainConfig& cfg);

struct StepResult {
  StepLossReport report;
  double tau = 0.0;
  double learning_rate = 0.0;
  std::size_t pool_negatives = 0;
  std::size_t pool_standard = 0;
  std::size_t pool_non_semantic = 0;
};

/// Masks shorter than one step are topped up with a single span so every
/// utterance contributes to the loss.
MaskSpec training_mask(std::size_t T, const MaskConfig& cfg, SeededRng& rng);

/// Teacher targets from clean audio, negative pools from the targets and
/// their patch-shuffled copy, student prediction from masked noisy audio,
/// loss, Adam update of the student, EMA update of the teacher.
StepResult train_step(TrainState& state, std::span<const AudioPair> batch,
                      const TrainConfig& cfg);

nlohmann::json log_record(std::int64_t step, const StepResult& r);

struct RunOptions {
  bool write_checkpoints = true;
  /// Called after every step; return false to stop early.
  std::function<bool(std::int64_t, const StepResult&)> on_step;
};

/// Runs from state.step to cfg.steps, writing one JSON line per step to
/// `log`. Checkpoints go to cfg.output_dir every cfg.checkpoint_every steps
/// and at the final step; step 0 is saved when starting fresh.
void run_training(const TrainConfig& cfg, TrainState& state, const Corpus& corpus,
                  std::ostream& log, const RunOptions& options = {});

} // namespace rd2v
