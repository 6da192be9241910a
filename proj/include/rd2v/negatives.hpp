#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rd2v/feature_encoder.hpp"
#include "rd2v/rng.hpp"

namespace rd2v {

/// Tile extent: w time steps by h feature dimensions.
struct PatchSpec {
  std::size_t w = 1;
  std::size_t h = 1;
};

/// w and h independently uniform over the integers in [lo, hi].
PatchSpec draw_patch_spec(std::size_t lo, std::size_t hi, SeededRng& rng);

/// The tiles of a T x D grid grouped by shape. Full tiles, the ragged
/// bottom strip (last time tile), the ragged right strip (last feature tile)
/// and the corner each form their own class. Tiles inside a class are listed
/// in row-major tile order.
struct TileClass {
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// Top-left (time, dim) of each tile in the class.
  std::vector<std::pair<std::size_t, std::size_t>> origins;
};

std::vector<TileClass> tile_classes(std::size_t T, std::size_t D, PatchSpec spec);

/// Output tile k of each class receives input tile perm[k] of that class.
/// `perms` holds one permutation per class, in tile_classes() order.
FeatureSequence patch_shuffle_with(const FeatureSequence& f, PatchSpec spec,
                                   std::span<const std::vector<std::size_t>> perms);

/// Uniform random permutation within every tile class.
FeatureSequence patch_shuffle(const FeatureSequence& f, PatchSpec spec, SeededRng& rng);

enum class Provenance : std::uint8_t { kStandard = 0, kNonSemantic = 1 };

/// Negative frames with their provenance and source time index.
struct NegativePool {
  Matrix frames;  // n x D
  std::vector<Provenance> provenance;
  std::vector<std::size_t> source_index;

  std::size_t size() const { return provenance.size(); }
  bool empty() const { return provenance.empty(); }
  std::size_t count(Provenance p) const;
};

NegativePool concat(const NegativePool& a, const NegativePool& b);

/// N frames of `targets` at time indices other than positive_t. Without
/// replacement when N <= T-1, with replacement otherwise.
NegativePool sample_standard_negatives(const FeatureSequence& targets, std::size_t N,
                                       std::size_t positive_t, SeededRng& rng);

/// N frames from any time index of `shuffled`. Without replacement when
/// N <= T, with replacement otherwise.
NegativePool sample_nonsemantic_negatives(const FeatureSequence& shuffled, std::size_t N,
                                          SeededRng& rng);

/// The k frames most cosine-similar to `query`. Ties go to the lower source
/// index, then standard before non-semantic. Kept frames stay in pool order.
NegativePool filter_top_k(std::span<const Real> query, const NegativePool& pool, std::size_t k);

/// How many negatives of each provenance to draw per masked step; k = 0
/// disables hard-negative filtering.
struct PoolPlan {
  std::size_t n_standard = 0;
  std::size_t n_non_semantic = 0;
  std::size_t k = 0;

  bool enabled() const { return n_standard + n_non_semantic > 0; }
};

/// Draws standard negatives from `targets`, non-semantic negatives from
/// `shuffled`, then applies the top-k filter against `query` when planned.
NegativePool build_pool(const FeatureSequence& targets, const FeatureSequence& shuffled,
                        std::size_t positive_t, std::span<const Real> query,
                        const PoolPlan& plan, SeededRng& rng);

} // namespace rd2v
