#include "rd2v/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "rd2v/errors.hpp"

namespace rd2v {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

} // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

SeededRng::SeededRng(std::uint64_t seed, std::string label)
    : seed_(seed),
      label_(std::move(label)),
      engine_(splitmix64(splitmix64(seed) ^ fnv1a64(label_))) {}

SeededRng SeededRng::child(std::string_view name) const {
  std::string path = label_;
  path += '/';
  path += name;
  return SeededRng(seed_, std::move(path));
}

SeededRng SeededRng::child(std::string_view name, std::uint64_t index) const {
  std::string n(name);
  n += '#';
  n += std::to_string(index);
  return child(n);
}

double SeededRng::uniform01() {
  return double(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  if (!(lo < hi)) {
    throw DomainError("uniform: requires lo < hi");
  }
  return lo + (hi - lo) * uniform01();
}

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) {
    throw DomainError("below: empty range");
  }
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::int64_t SeededRng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) {
    throw DomainError("uniform_int: requires lo <= hi");
  }
  return lo + std::int64_t(below(std::uint64_t(hi - lo) + 1));
}

double SeededRng::normal() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> SeededRng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(p[i - 1], p[below(i)]);
  }
  return p;
}

std::vector<std::size_t> SeededRng::choice(std::size_t n, std::size_t m,
                                           const std::set<std::size_t>& exclude) {
  std::vector<std::size_t> allowed;
  allowed.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!exclude.contains(i)) {
      allowed.push_back(i);
    }
  }
  if (m > allowed.size()) {
    throw DomainError("choice: requested " + std::to_string(m) + " of " +
                      std::to_string(allowed.size()) + " available indices");
  }
  // Partial Fisher-Yates over the allowed set.
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(allowed[i], allowed[i + below(allowed.size() - i)]);
  }
  allowed.resize(m);
  return allowed;
}

} // namespace rd2v
