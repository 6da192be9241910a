#include "rd2v/trainer.hpp"

#include <cmath>
#include <ostream>

#include "rd2v/errors.hpp"
#include "rd2v/model.hpp"

namespace rd2v {

namespace fs = std::filesystem;

namespace {

double draw_between(SeededRng& rng, double lo, double hi) {
  return lo < hi ? rng.uniform(lo, hi) : lo;
}

std::vector<Waveform> load_all(const std::string& manifest) {
  std::vector<Waveform> out;
  for (const auto& p : read_manifest(manifest)) out.push_back(load_wav(p));
  if (out.empty()) throw ConfigError("manifest " + manifest + " lists no files");
  return out;
}

} // namespace

Corpus Corpus::synthetic(std::uint64_t seed, std::string_view label, std::size_t count,
                         std::size_t noise_count, const DataConfig& data) {
  SeededRng rng = SeededRng(seed, "corpus").child(label);
  Corpus c;
  for (std::size_t i = 0; i < count; ++i) {
    SeededRng r = rng.child("utterance", i);
    const double dur = draw_between(r, data.min_duration, data.max_duration);
    c.clean.push_back(synth_utterance(r.next_u64(), dur, data.sample_rate));
  }
  for (std::size_t i = 0; i < noise_count; ++i) {
    SeededRng r = rng.child("noise", i);
    const auto kind = i % 2 == 0 ? NoiseKind::kWhite : NoiseKind::kBandLimited;
    c.noise.push_back(synth_noise(r.next_u64(), data.max_duration + 0.5, kind, data.sample_rate));
  }
  return c;
}

Corpus Corpus::from_config(const TrainConfig& cfg) {
  Corpus c = synthetic(cfg.seed, "train", cfg.data.manifest.empty() ? cfg.data.corpus_size : 0,
                       cfg.data.noise_manifest.empty() ? cfg.data.noise_count : 0, cfg.data);
  if (!cfg.data.manifest.empty()) c.clean = load_all(cfg.data.manifest);
  if (!cfg.data.noise_manifest.empty()) c.noise = load_all(cfg.data.noise_manifest);
  return c;
}

std::vector<AudioPair> make_batch(const TrainConfig& cfg, const Corpus& corpus,
                                  std::int64_t step) {
  if (corpus.clean.empty() || corpus.noise.empty()) {
    throw ConfigError("corpus has no clean utterances or no noise clips");
  }
  SeededRng rng = SeededRng(cfg.seed, "batch").child("step", std::uint64_t(step));
  std::vector<AudioPair> batch;
  for (std::size_t b = 0; b < cfg.batch_size; ++b) {
    SeededRng r = rng.child("slot", b);
    const Waveform& clean = corpus.clean[r.below(corpus.clean.size())];
    const Waveform& noise = corpus.noise[r.below(corpus.noise.size())];
    const double snr = draw_between(r, cfg.data.snr_min, cfg.data.snr_max);
    batch.push_back({clean, mix_at_snr(clean, noise, snr, r)});
  }
  return batch;
}

TrainState init_state(const TrainConfig& cfg) {
  cfg.validate();
  SeededRng rng(cfg.seed, "init");
  TrainState s;
  s.student = init_model(cfg.model, rng);
  s.teacher = init_teacher(s.student);
  s.adam = Adam(s.student);
  return s;
}

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& cfg) {
  Checkpoint c;
  c.student = state.student;
  c.teacher = state.teacher;
  c.adam_m = state.adam.first_moment();
  c.adam_v = state.adam.second_moment();
  c.step = state.step;
  c.seed = cfg.seed;
  c.config_digest = cfg.digest();
  c.config_json = to_json(cfg).dump();
  return c;
}

TrainState restore_state(const Checkpoint& ckpt, const TrainConfig& cfg) {
  if (ckpt.config_digest != cfg.digest() || ckpt.seed != cfg.seed) {
    throw ConfigError("checkpoint was written under a different training configuration");
  }
  TrainState s;
  s.student = ckpt.student;
  s.teacher = ckpt.teacher;
  s.adam = Adam::restore(ckpt.adam_m, ckpt.adam_v, ckpt.step);
  s.step = ckpt.step;
  require_matching(s.student, s.teacher);
  require_matching(s.student, s.adam.first_moment());
  return s;
}

MaskSpec training_mask(std::size_t T, const MaskConfig& cfg, SeededRng& rng) {
  MaskSpec m = sample_mask(T, cfg.prob, cfg.span, rng);
  if (m.count() == 0) {
    const std::size_t start = rng.below(T);
    const std::size_t len = std::min(cfg.span, T - start);
    m.spans.emplace_back(start, len);
    std::fill_n(m.masked.begin() + std::ptrdiff_t(start), len, true);
  }
  return m;
}

StepResult train_step(TrainState& state, std::span<const AudioPair> batch,
                      const TrainConfig& cfg) {
  const std::int64_t next = state.step + 1;
  SeededRng rng = SeededRng(cfg.seed, "train").child("step", std::uint64_t(next));
  const PoolPlan plan = cfg.pool_plan_at(next);

  ad::Tape tape;
  const BoundParameters student = bind_trainable(tape, state.student);

  std::vector<FeatureSequence> targets;
  std::vector<MaskSpec> masks;
  targets.reserve(batch.size());
  masks.reserve(batch.size());
  std::vector<ObjectiveInput> inputs;
  StepResult result;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const AudioPair& pair = batch[i];
    if (pair.clean.size() != pair.noisy.size()) {
      throw TrainingError(next, "clean and noisy waveforms differ in length");
    }
    targets.push_back(teacher_targets(cfg.model, state.teacher, pair.clean));
    const FeatureSequence& c_tar = targets.back();

    SeededRng mask_rng = rng.child("mask", i);
    masks.push_back(training_mask(c_tar.rows(), cfg.mask, mask_rng));
    const MaskSpec& mask = masks.back();

    ObjectiveInput in;
    in.c_pre = prediction(run_branch(cfg.model, student, pair.noisy, &mask));
    in.c_tar = &c_tar;
    in.mask = &mask;

    if (plan.enabled()) {
      SeededRng patch_rng = rng.child("patch", i);
      const PatchSpec patch =
          draw_patch_spec(cfg.negatives.patch_min, cfg.negatives.patch_max, patch_rng);
      const FeatureSequence shuffled = patch_shuffle(c_tar, patch, patch_rng);
      SeededRng pool_rng = rng.child("pool", i);
      for (const std::size_t t : mask.indices()) {
        SeededRng r = pool_rng.child("t", t);
        in.pools.push_back(build_pool(c_tar, shuffled, t, in.c_pre.value().row(t), plan, r));
        const auto& pool = in.pools.back();
        result.pool_negatives += pool.size();
        result.pool_standard += pool.count(Provenance::kStandard);
        result.pool_non_semantic += pool.count(Provenance::kNonSemantic);
      }
    }
    inputs.push_back(std::move(in));
  }

  StepObjective obj = step_objective(inputs, cfg.loss);
  if (!std::isfinite(obj.report.total)) {
    throw TrainingError(next, "non-finite loss");
  }
  tape.backward(obj.total);
  const ParameterSet grads = student.gradients();
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) throw TrainingError(next, "non-finite gradient for " + name);
  }

  const AdamConfig opt = cfg.resolved_optimizer();
  result.learning_rate = learning_rate_at(opt, next);
  state.adam.step(state.student, grads, opt, result.learning_rate);
  state.step = next;

  result.tau = tau_at(cfg.ema, next);
  if (cfg.ema_transformer_only) {
    ema_update(state.teacher, state.student, result.tau, is_transformer_parameter);
  } else {
    ema_update(state.teacher, state.student, result.tau);
  }
  result.report = std::move(obj.report);
  return result;
}

nlohmann::json log_record(std::int64_t step, const StepResult& r) {
  return {{"step", step},
          {"regression", r.report.regression},
          {"contrastive", r.report.contrastive},
          {"total", r.report.total},
          {"tau", r.tau},
          {"learning_rate", r.learning_rate},
          {"masked_count", r.report.masked_count}};
}

void run_training(const TrainConfig& cfg, TrainState& state, const Corpus& corpus,
                  std::ostream& log, const RunOptions& options) {
  const fs::path dir = cfg.output_dir;
  if (options.write_checkpoints) {
    fs::create_directories(dir);
    if (state.step == 0) save_checkpoint(checkpoint_path(dir, 0), make_checkpoint(state, cfg));
  }
  while (state.step < cfg.steps) {
    const auto batch = make_batch(cfg, corpus, state.step + 1);
    const StepResult r = train_step(state, batch, cfg);
    log << log_record(state.step, r).dump() << '\n';
    log.flush();
    const bool periodic = cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0;
    if (options.write_checkpoints && (periodic || state.step == cfg.steps)) {
      save_checkpoint(checkpoint_path(dir, state.step), make_checkpoint(state, cfg));
    }
    if (options.on_step && !options.on_step(state.step, r)) break;
  }
}

} // namespace rd2v
