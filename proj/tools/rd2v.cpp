// rd2v command line: pretrain, diagnose, mix, gradcheck, synth-corpus.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rd2v/checkpoint.hpp"
#include "rd2v/config.hpp"
#include "rd2v/diagnostics.hpp"
#include "rd2v/errors.hpp"
#include "rd2v/gradcheck.hpp"
#include "rd2v/signal.hpp"
#include "rd2v/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct PretrainArgs {
  std::string config;
  std::string profile;
  std::optional<std::int64_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> batch_size;
  std::optional<std::int64_t> checkpoint_every;
  std::string mode;
  std::string out;
  std::string log;
  std::string resume;
  std::optional<std::int64_t> stop_after;
};

struct DiagnoseArgs {
  std::string checkpoint;
  std::string config;
  std::string out;
  std::uint64_t probe_seed = 1234;
  std::optional<std::size_t> probe_size;
  std::size_t bins = 40;
  std::string clean;
  std::string mixed;
};

struct MixArgs {
  std::string clean, noise, out;
  double snr = 0.0;
  std::uint64_t seed = 0;
};

struct SynthArgs {
  std::string out;
  std::size_t count = 16;
  std::size_t noise_count = 4;
  std::uint64_t seed = 1;
  double min_duration = 1.0;
  double max_duration = 3.0;
};

rd2v::TrainConfig resolve_config(const PretrainArgs& a) {
  json patch = json::object();
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw rd2v::ConfigError("cannot open config '" + a.config + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    patch = rd2v::toml_to_json(text);
  }
  // Flags override file values.
  if (!a.profile.empty()) patch["profile"] = a.profile;
  if (a.steps) patch["steps"] = *a.steps;
  if (a.seed) patch["seed"] = *a.seed;
  if (a.batch_size) patch["batch_size"] = *a.batch_size;
  if (a.checkpoint_every) patch["checkpoint_every"] = *a.checkpoint_every;
  if (!a.mode.empty()) patch["loss"]["mode"] = a.mode;
  if (!a.out.empty()) patch["output_dir"] = a.out;
  rd2v::TrainConfig cfg = rd2v::config_from_json(patch);
  cfg.validate();
  return cfg;
}

int run_pretrain(const PretrainArgs& a) {
  const rd2v::TrainConfig cfg = resolve_config(a);
  fs::create_directories(cfg.output_dir);
  rd2v::TrainState state = a.resume.empty()
                               ? rd2v::init_state(cfg)
                               : rd2v::restore_state(rd2v::load_checkpoint(a.resume), cfg);
  const fs::path log_path = a.log.empty() ? fs::path(cfg.output_dir) / "train_log.jsonl" : fs::path(a.log);
  std::ofstream log(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw rd2v::ConfigError("cannot write log '" + log_path.string() + "'");
  {
    std::ofstream(fs::path(cfg.output_dir) / "config.json") << rd2v::to_json(cfg).dump(2) << "\n";
  }
  const rd2v::Corpus corpus = rd2v::Corpus::from_config(cfg);
  rd2v::RunOptions opts;
  if (a.stop_after) {
    const std::int64_t stop = *a.stop_after;
    opts.on_step = [stop](std::int64_t step, const rd2v::StepResult&) { return step < stop; };
  }
  rd2v::run_training(cfg, state, corpus, log, opts);
  if (state.step < cfg.steps) {
    rd2v::save_checkpoint(rd2v::checkpoint_path(cfg.output_dir, state.step),
                          rd2v::make_checkpoint(state, cfg));
  }
  std::cerr << "trained to step " << state.step << ", checkpoints in " << cfg.output_dir << "\n";
  return 0;
}

std::vector<fs::path> checkpoints_in(const fs::path& p) {
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.path().extension() == ".rd2v") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw rd2v::ConfigError("no checkpoints in '" + p.string() + "'");
  return out;
}

int run_diagnose(const DiagnoseArgs& a) {
  if (!a.clean.empty() || !a.mixed.empty()) {
    if (a.clean.empty() || a.mixed.empty()) {
      throw rd2v::ConfigError("--clean and --mixed must be given together");
    }
    const double snr = rd2v::measure_snr(rd2v::load_wav(a.clean), rd2v::load_wav(a.mixed));
    std::cout << json{{"snr_db", snr}}.dump() << "\n";
    return 0;
  }
  if (a.checkpoint.empty()) throw rd2v::ConfigError("--checkpoint is required");

  json reports = json::array();
  std::optional<rd2v::ProbeSet> probe;
  for (const auto& path : checkpoints_in(a.checkpoint)) {
    const rd2v::Checkpoint ckpt = rd2v::load_checkpoint(path);
    rd2v::TrainConfig cfg = a.config.empty() ? rd2v::config_from_json(json::parse(ckpt.config_json))
                                             : rd2v::load_config(a.config);
    if (a.probe_size) cfg.data.probe_size = *a.probe_size;
    if (!probe) probe = rd2v::make_probe_set(cfg, a.probe_seed, cfg.data.probe_size);
    const rd2v::CollapseReport r = rd2v::diagnose_checkpoint(cfg, ckpt, *probe, a.bins);
    json j = rd2v::to_json(r);
    j["checkpoint"] = path.filename().string();
    reports.push_back(j);
    if (!a.out.empty()) {
      fs::create_directories(a.out);
      std::ofstream csv(fs::path(a.out) / (path.stem().string() + "_histogram.csv"));
      rd2v::write_histogram_csv(csv, r.histogram);
    }
  }
  if (a.out.empty()) {
    std::cout << reports.dump(2) << "\n";
  } else {
    std::ofstream(fs::path(a.out) / "collapse_report.json") << reports.dump(2) << "\n";
  }
  return 0;
}

int run_mix(const MixArgs& a) {
  const rd2v::Waveform clean = rd2v::load_wav(a.clean);
  const rd2v::Waveform noise = rd2v::load_wav(a.noise);
  rd2v::SeededRng rng(a.seed, "mix");
  const rd2v::MixResult r = rd2v::mix_at_snr_detailed(clean, noise, a.snr, rng);
  rd2v::save_wav(a.out, r.mixed);
  // Samples past full scale are clipped by the 16-bit writer.
  const auto clipped = std::count_if(r.mixed.samples.begin(), r.mixed.samples.end(),
                                     [](rd2v::Real v) { return std::abs(v) > 1.0; });
  std::cout << json{{"snr_db", a.snr},
                    {"gain", r.gain},
                    {"noise_offset", r.noise_offset},
                    {"clipped_samples", clipped}}
                   .dump()
            << "\n";
  return 0;
}

int run_gradcheck(std::size_t instances, std::uint64_t seed) {
  double worst = 0.0;
  for (const auto& r : rd2v::run_gradcheck_suite(instances, seed)) {
    std::cout << std::left << std::setw(20) << r.name << " instances=" << r.instances
              << " max_rel_error=" << std::scientific << std::setprecision(3)
              << r.max_relative_error << std::defaultfloat << "\n";
    worst = std::max(worst, r.max_relative_error);
  }
  std::cout << "max_rel_error=" << std::scientific << worst << "\n";
  return worst < rd2v::kGradCheckTolerance ? 0 : kExitNumeric;
}

int run_synth(const SynthArgs& a) {
  rd2v::DataConfig data;
  data.min_duration = a.min_duration;
  data.max_duration = a.max_duration;
  const rd2v::Corpus corpus =
      rd2v::Corpus::synthetic(a.seed, "synth-corpus", a.count, a.noise_count, data);
  const fs::path dir(a.out);
  fs::create_directories(dir / "clean");
  fs::create_directories(dir / "noise");
  std::vector<fs::path> clean, noise;
  for (std::size_t i = 0; i < corpus.clean.size(); ++i) {
    clean.push_back(dir / "clean" / ("utt_" + std::to_string(i) + ".wav"));
    rd2v::save_wav(clean.back(), corpus.clean[i]);
  }
  for (std::size_t i = 0; i < corpus.noise.size(); ++i) {
    noise.push_back(dir / "noise" / ("noise_" + std::to_string(i) + ".wav"));
    rd2v::save_wav(noise.back(), corpus.noise[i]);
  }
  rd2v::write_manifest(dir / "clean.txt", clean);
  rd2v::write_manifest(dir / "noise.txt", noise);
  std::cerr << "wrote " << clean.size() << " utterances and " << noise.size() << " noise clips to "
            << dir << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-robust teacher-student speech pre-training"};
  app.require_subcommand(1);

  PretrainArgs pa;
  auto* pretrain = app.add_subcommand("pretrain", "Run the pre-training loop");
  pretrain->add_option("--config", pa.config, "TOML config file");
  pretrain->add_option("--profile", pa.profile, "paper, desk or toy");
  pretrain->add_option("--steps", pa.steps, "Total optimizer steps");
  pretrain->add_option("--seed", pa.seed, "Run seed");
  pretrain->add_option("--batch-size", pa.batch_size, "Utterances per step");
  pretrain->add_option("--checkpoint-every", pa.checkpoint_every, "Checkpoint interval (0: final only)");
  pretrain->add_option("--mode", pa.mode,
                       "regression_only, joint_standard, joint_nonsemantic or "
                       "joint_nonsemantic_removal");
  pretrain->add_option("--out", pa.out, "Output directory");
  pretrain->add_option("--log", pa.log, "Loss log path (default <out>/train_log.jsonl)");
  pretrain->add_option("--resume", pa.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  pretrain->add_option("--stop-after", pa.stop_after,
                       "Stop and checkpoint after this step; schedules still follow --steps")
      ->check(CLI::PositiveNumber);

  DiagnoseArgs da;
  auto* diagnose = app.add_subcommand("diagnose", "Similarity histograms and collapse metric");
  diagnose->add_option("--checkpoint", da.checkpoint, "Checkpoint file or directory")
      ->check(CLI::ExistingPath);
  diagnose->add_option("--config", da.config, "Override the config stored in the checkpoint");
  diagnose->add_option("--out", da.out, "Directory for JSON report and CSV histograms");
  diagnose->add_option("--probe-seed", da.probe_seed, "Probe corpus seed");
  diagnose->add_option("--probe-size", da.probe_size, "Probe utterance count");
  diagnose->add_option("--bins", da.bins, "Histogram bins")->check(CLI::PositiveNumber);
  diagnose->add_option("--clean", da.clean, "Clean WAV for SNR measurement")->check(CLI::ExistingFile);
  diagnose->add_option("--mixed", da.mixed, "Mixed WAV for SNR measurement")->check(CLI::ExistingFile);

  MixArgs ma;
  auto* mix = app.add_subcommand("mix", "Mix a clean and a noise WAV at a target SNR");
  mix->add_option("--clean", ma.clean)->required()->check(CLI::ExistingFile);
  mix->add_option("--noise", ma.noise)->required()->check(CLI::ExistingFile);
  mix->add_option("--snr", ma.snr, "Target SNR in dB")->required();
  mix->add_option("--out", ma.out)->required();
  mix->add_option("--seed", ma.seed, "Seed for the noise offset");

  std::size_t gc_instances = 100;
  std::uint64_t gc_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_option("--instances", gc_instances)->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", gc_seed);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth-corpus", "Write a seeded synthetic corpus");
  synth->add_option("--out", sa.out)->required();
  synth->add_option("--count", sa.count);
  synth->add_option("--noise-count", sa.noise_count);
  synth->add_option("--seed", sa.seed);
  synth->add_option("--min-duration", sa.min_duration);
  synth->add_option("--max-duration", sa.max_duration);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*pretrain) return run_pretrain(pa);
    if (*diagnose) return run_diagnose(da);
    if (*mix) return run_mix(ma);
    if (*gradcheck) return run_gradcheck(gc_instances, gc_seed);
    if (*synth) return run_synth(sa);
  } catch (const rd2v::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const rd2v::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const rd2v::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
