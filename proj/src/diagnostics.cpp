#include "rd2v/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rd2v/errors.hpp"
#include "rd2v/model.hpp"
#include "rd2v/numeric.hpp"

namespace rd2v {

ProbeSet make_probe_set(const TrainConfig& cfg, std::uint64_t probe_seed, std::size_t count) {
  if (count == 0) {
    throw DomainError("probe set must contain at least one utterance");
  }
  ProbeSet probe;
  probe.seed = probe_seed;
  const Corpus corpus =
      Corpus::synthetic(probe_seed, "probe", count, cfg.data.noise_count, cfg.data);
  SeededRng rng(probe_seed, "probe/mix");
  for (std::size_t i = 0; i < count; ++i) {
    SeededRng r = rng.child("pair", i);
    const Waveform& noise = corpus.noise[r.below(corpus.noise.size())];
    const double snr = cfg.data.snr_min < cfg.data.snr_max
                           ? r.uniform(cfg.data.snr_min, cfg.data.snr_max)
                           : cfg.data.snr_min;
    probe.pairs.push_back({corpus.clean[i], mix_at_snr(corpus.clean[i], noise, snr, r)});
  }
  return probe;
}

SimilarityHistogram histogram(std::span<const Real> positive, std::span<const Real> negative,
                              std::size_t bins) {
  if (bins == 0) {
    throw DomainError("histogram needs at least one bin");
  }
  SimilarityHistogram h;
  h.positive.assign(bins, 0);
  h.negative.assign(bins, 0);
  const auto bin_of = [bins](Real s) {
    const double x = std::clamp((s + 1.0) / 2.0, 0.0, 1.0);
    return std::min(bins - 1, std::size_t(x * double(bins)));
  };
  for (Real s : positive) ++h.positive[bin_of(s)];
  for (Real s : negative) ++h.negative[bin_of(s)];
  return h;
}

CollapseReport similarity_histogram(const TrainConfig& cfg, const ParameterSet& student,
                                    const ParameterSet& teacher, const ProbeSet& probe,
                                    std::size_t bins) {
  if (probe.pairs.empty()) {
    throw DomainError("similarity_histogram: empty probe set");
  }
  std::size_t n_neg = cfg.negatives.counts.n_standard + cfg.negatives.counts.n_non_semantic;
  if (n_neg == 0) n_neg = 100;

  ad::Tape tape(ad::GradMode::kDisabled);
  const BoundParameters bound = bind_frozen(tape, student);
  SeededRng rng(probe.seed, "probe/diagnose");
  std::vector<Real> pos, neg;
  std::vector<FeatureSequence> targets;
  for (std::size_t i = 0; i < probe.pairs.size(); ++i) {
    const auto& pair = probe.pairs[i];
    targets.push_back(teacher_targets(cfg.model, teacher, pair.clean));
    const FeatureSequence& c_tar = targets.back();
    SeededRng mask_rng = rng.child("mask", i);
    const MaskSpec mask = training_mask(c_tar.rows(), cfg.mask, mask_rng);
    const FeatureSequence c_pre =
        prediction(run_branch(cfg.model, bound, pair.noisy, &mask)).value();
    SeededRng neg_rng = rng.child("negatives", i);
    for (const std::size_t t : mask.indices()) {
      pos.push_back(cosine_similarity(c_pre.row(t), c_tar.row(t)));
      SeededRng r = neg_rng.child("t", t);
      const NegativePool pool = sample_standard_negatives(c_tar, n_neg, t, r);
      for (std::size_t j = 0; j < pool.size(); ++j) {
        neg.push_back(cosine_similarity(c_pre.row(t), pool.frames.row(j)));
      }
    }
  }
  CollapseReport r;
  r.collapse = collapse_metric(targets);
  r.positive_pairs = pos.size();
  r.negative_pairs = neg.size();
  const auto mean = [](const std::vector<Real>& v) {
    Real s = 0.0;
    for (Real x : v) s += x;
    return v.empty() ? 0.0 : s / Real(v.size());
  };
  r.mean_positive = mean(pos);
  r.mean_negative = mean(neg);
  r.histogram = histogram(pos, neg, bins);
  return r;
}

Real collapse_metric(std::span<const FeatureSequence> targets) {
  std::size_t frames = 0;
  std::size_t dim = 0;
  for (const auto& t : targets) {
    if (t.rows() == 0) continue;
    if (dim == 0) dim = t.cols();
    if (t.cols() != dim) throw ShapeError("collapse_metric: inconsistent feature dimensions");
    frames += t.rows();
  }
  if (frames < 2) {
    throw DomainError("collapse_metric needs at least two frames");
  }
  // Two-pass per-dimension mean, then sample standard deviation.
  std::vector<Real> mean(dim, 0.0), sq(dim, 0.0);
  for (const auto& t : targets) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t d = 0; d < dim; ++d) mean[d] += t(r, d);
    }
  }
  for (auto& m : mean) m /= Real(frames);
  for (const auto& t : targets) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t d = 0; d < dim; ++d) {
        const Real e = t(r, d) - mean[d];
        sq[d] += e * e;
      }
    }
  }
  Real acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) acc += std::sqrt(sq[d] / Real(frames - 1));
  return acc / Real(dim);
}

Real collapse_metric(const TrainConfig& cfg, const ParameterSet& teacher, const ProbeSet& probe) {
  std::vector<FeatureSequence> targets;
  for (const auto& pair : probe.pairs) {
    targets.push_back(teacher_targets(cfg.model, teacher, pair.clean));
  }
  return collapse_metric(targets);
}

CollapseReport diagnose_checkpoint(const TrainConfig& cfg, const Checkpoint& ckpt,
                                   const ProbeSet& probe, std::size_t bins) {
  CollapseReport r = similarity_histogram(cfg, ckpt.student, ckpt.teacher, probe, bins);
  r.step = ckpt.step;
  return r;
}

nlohmann::json to_json(const CollapseReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (std::size_t b = 0; b < r.histogram.bins(); ++b) {
    bins.push_back({{"bin_lo", r.histogram.bin_lo(b)},
                    {"bin_hi", r.histogram.bin_hi(b)},
                    {"positive_count", r.histogram.positive[b]},
                    {"negative_count", r.histogram.negative[b]}});
  }
  return {{"step", r.step},
          {"collapse_metric", r.collapse},
          {"mean_positive_similarity", r.mean_positive},
          {"mean_negative_similarity", r.mean_negative},
          {"positive_pairs", r.positive_pairs},
          {"negative_pairs", r.negative_pairs},
          {"histogram", bins}};
}

void write_histogram_csv(std::ostream& os, const SimilarityHistogram& h) {
  os << "bin_lo,bin_hi,positive_count,negative_count\n";
  for (std::size_t b = 0; b < h.bins(); ++b) {
    os << h.bin_lo(b) << ',' << h.bin_hi(b) << ',' << h.positive[b] << ',' << h.negative[b]
       << '\n';
  }
}

} // namespace rd2v
