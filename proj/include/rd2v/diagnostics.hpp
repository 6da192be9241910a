#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "rd2v/config.hpp"
#include "rd2v/trainer.hpp"

namespace rd2v {

/// Held-out (clean, noisy) pairs drawn from a seed stream disjoint from the
/// training corpus, with fixed masks and negative draws per probe seed.
struct ProbeSet {
  std::vector<AudioPair> pairs;
  std::uint64_t seed = 0;
};

ProbeSet make_probe_set(const TrainConfig& cfg, std::uint64_t probe_seed, std::size_t count);

/// Equal-width bins over [-1, 1]; a similarity of exactly 1 lands in the top bin.
struct SimilarityHistogram {
  std::vector<std::uint64_t> positive;
  std::vector<std::uint64_t> negative;

  std::size_t bins() const { return positive.size(); }
  double bin_lo(std::size_t b) const { return -1.0 + 2.0 * double(b) / double(bins()); }
  double bin_hi(std::size_t b) const { return -1.0 + 2.0 * double(b + 1) / double(bins()); }
};

SimilarityHistogram histogram(std::span<const Real> positive, std::span<const Real> negative,
                              std::size_t bins);

struct CollapseReport {
  std::int64_t step = 0;
  double collapse = 0.0;
  double mean_positive = 0.0;
  double mean_negative = 0.0;
  std::uint64_t positive_pairs = 0;
  std::uint64_t negative_pairs = 0;
  SimilarityHistogram histogram;
};

/// Cosine similarities of student predictions at masked steps against their
/// teacher targets (positives) and against standard negatives drawn from the
/// same utterance, binned over [-1, 1].
CollapseReport similarity_histogram(const TrainConfig& cfg, const ParameterSet& student,
                                    const ParameterSet& teacher, const ProbeSet& probe,
                                    std::size_t bins);

/// Mean over dimensions of the per-dimension standard deviation across all
/// frames. Throws DomainError with fewer than two frames.
Real collapse_metric(std::span<const FeatureSequence> targets);
Real collapse_metric(const TrainConfig& cfg, const ParameterSet& teacher, const ProbeSet& probe);

/// Both diagnostics for one checkpoint.
CollapseReport diagnose_checkpoint(const TrainConfig& cfg, const Checkpoint& ckpt,
                                   const ProbeSet& probe, std::size_t bins);

nlohmann::json to_json(const CollapseReport& r);
/// Columns bin_lo, bin_hi, positive_count, negative_count.
void write_histogram_csv(std::ostream& os, const SimilarityHistogram& h);

} // namespace rd2v
