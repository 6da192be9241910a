#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rd2v {

/// Deterministic random stream keyed by (seed, label).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; all distributions are implemented here rather than taken from
/// <random> so the drawn values are identical across standard libraries.
/// Child streams are derived from the label path alone, so drawing from one
/// child never shifts the sequence of a sibling.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::string label);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  SeededRng child(std::string_view name) const;
  SeededRng child(std::string_view name, std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform01() < p; }

  std::vector<std::size_t> permutation(std::size_t n);
  /// m distinct indices from [0, n) \ exclude, uniformly without replacement.
  std::vector<std::size_t> choice(std::size_t n, std::size_t m,
                                  const std::set<std::size_t>& exclude = {});

 private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view bytes);

} // namespace rd2v
