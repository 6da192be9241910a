#include "rd2v/negatives.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "rd2v/errors.hpp"
#include "rd2v/numeric.hpp"

namespace rd2v {

PatchSpec draw_patch_spec(std::size_t lo, std::size_t hi, SeededRng& rng) {
  if (lo < 1 || hi < lo) {
    throw ConfigError("patch range must satisfy 1 <= lo <= hi");
  }
  PatchSpec s;
  s.w = std::size_t(rng.uniform_int(std::int64_t(lo), std::int64_t(hi)));
  s.h = std::size_t(rng.uniform_int(std::int64_t(lo), std::int64_t(hi)));
  return s;
}

std::vector<TileClass> tile_classes(std::size_t T, std::size_t D, PatchSpec spec) {
  if (spec.w < 1 || spec.h < 1) {
    throw DomainError("patch sizes must be >= 1");
  }
  std::vector<TileClass> classes;
  for (std::size_t t0 = 0; t0 < T; t0 += spec.w) {
    for (std::size_t d0 = 0; d0 < D; d0 += spec.h) {
      const std::size_t rows = std::min(spec.w, T - t0);
      const std::size_t cols = std::min(spec.h, D - d0);
      auto it = std::find_if(classes.begin(), classes.end(), [&](const TileClass& c) {
        return c.rows == rows && c.cols == cols;
      });
      if (it == classes.end()) {
        classes.push_back({rows, cols, {}});
        it = classes.end() - 1;
      }
      it->origins.emplace_back(t0, d0);
    }
  }
  return classes;
}

FeatureSequence patch_shuffle_with(const FeatureSequence& f, PatchSpec spec,
                                   std::span<const std::vector<std::size_t>> perms) {
  const auto classes = tile_classes(f.rows(), f.cols(), spec);
  if (perms.size() != classes.size()) {
    throw ShapeError("patch_shuffle_with: expected " + std::to_string(classes.size()) +
                     " permutations, got " + std::to_string(perms.size()));
  }
  FeatureSequence out(f.rows(), f.cols());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& cls = classes[c];
    const auto& perm = perms[c];
    if (perm.size() != cls.origins.size()) {
      throw ShapeError("patch_shuffle_with: permutation size mismatch in tile class " +
                       std::to_string(c));
    }
    for (std::size_t k = 0; k < perm.size(); ++k) {
      const auto [dst_t, dst_d] = cls.origins[k];
      const auto [src_t, src_d] = cls.origins.at(perm[k]);
      for (std::size_t r = 0; r < cls.rows; ++r) {
        for (std::size_t q = 0; q < cls.cols; ++q) {
          out(dst_t + r, dst_d + q) = f(src_t + r, src_d + q);
        }
      }
    }
  }
  return out;
}

FeatureSequence patch_shuffle(const FeatureSequence& f, PatchSpec spec, SeededRng& rng) {
  const auto classes = tile_classes(f.rows(), f.cols(), spec);
  std::vector<std::vector<std::size_t>> perms;
  for (const auto& cls : classes) perms.push_back(rng.permutation(cls.origins.size()));
  return patch_shuffle_with(f, spec, perms);
}

std::size_t NegativePool::count(Provenance p) const {
  return std::size_t(std::count(provenance.begin(), provenance.end(), p));
}

NegativePool concat(const NegativePool& a, const NegativePool& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.frames.cols() != b.frames.cols()) {
    throw ShapeError("concat: pools have different frame dimensions");
  }
  NegativePool out;
  out.frames = Matrix(a.size() + b.size(), a.frames.cols());
  out.frames.eigen().topRows(Eigen::Index(a.size())) = a.frames.eigen();
  out.frames.eigen().bottomRows(Eigen::Index(b.size())) = b.frames.eigen();
  out.provenance = a.provenance;
  out.provenance.insert(out.provenance.end(), b.provenance.begin(), b.provenance.end());
  out.source_index = a.source_index;
  out.source_index.insert(out.source_index.end(), b.source_index.begin(), b.source_index.end());
  return out;
}

namespace {

NegativePool pool_from(const FeatureSequence& f, std::vector<std::size_t> idx, Provenance p) {
  NegativePool pool;
  pool.frames = gather_rows(f, idx);
  pool.provenance.assign(idx.size(), p);
  pool.source_index = std::move(idx);
  return pool;
}

} // namespace

NegativePool sample_standard_negatives(const FeatureSequence& targets, std::size_t N,
                                       std::size_t positive_t, SeededRng& rng) {
  const std::size_t T = targets.rows();
  if (T < 2) {
    throw DomainError("standard negatives need at least two frames, got " + std::to_string(T));
  }
  if (positive_t >= T) {
    throw DomainError("positive index out of range");
  }
  if (N < 1) {
    throw DomainError("standard negatives: N must be >= 1");
  }
  std::vector<std::size_t> idx;
  if (N <= T - 1) {
    idx = rng.choice(T, N, {positive_t});
  } else {
    idx.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
      std::size_t j = rng.below(T - 1);
      idx.push_back(j >= positive_t ? j + 1 : j);
    }
  }
  return pool_from(targets, std::move(idx), Provenance::kStandard);
}

NegativePool sample_nonsemantic_negatives(const FeatureSequence& shuffled, std::size_t N,
                                          SeededRng& rng) {
  const std::size_t T = shuffled.rows();
  if (N < 1) {
    throw DomainError("non-semantic negatives: N must be >= 1");
  }
  if (T < 1) {
    throw DomainError("non-semantic negatives: empty sequence");
  }
  std::vector<std::size_t> idx;
  if (N <= T) {
    idx = rng.choice(T, N);
  } else {
    idx.reserve(N);
    for (std::size_t i = 0; i < N; ++i) idx.push_back(rng.below(T));
  }
  return pool_from(shuffled, std::move(idx), Provenance::kNonSemantic);
}

NegativePool filter_top_k(std::span<const Real> query, const NegativePool& pool, std::size_t k) {
  if (k < 1 || k > pool.size()) {
    throw DomainError("filter_top_k: k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(pool.size()) + "]");
  }
  std::vector<Real> sims(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    sims[i] = cosine_similarity(query, pool.frames.row(i));
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    if (pool.source_index[a] != pool.source_index[b]) {
      return pool.source_index[a] < pool.source_index[b];
    }
    return pool.provenance[a] < pool.provenance[b];
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  NegativePool out;
  out.frames = gather_rows(pool.frames, order);
  for (auto i : order) {
    out.provenance.push_back(pool.provenance[i]);
    out.source_index.push_back(pool.source_index[i]);
  }
  return out;
}

NegativePool build_pool(const FeatureSequence& targets, const FeatureSequence& shuffled,
                        std::size_t positive_t, std::span<const Real> query,
                        const PoolPlan& plan, SeededRng& rng) {
  NegativePool pool;
  if (plan.n_standard > 0) {
    SeededRng r = rng.child("standard");
    pool = sample_standard_negatives(targets, plan.n_standard, positive_t, r);
  }
  if (plan.n_non_semantic > 0) {
    SeededRng r = rng.child("non_semantic");
    pool = concat(pool, sample_nonsemantic_negatives(shuffled, plan.n_non_semantic, r));
  }
  if (plan.k > 0 && plan.k < pool.size()) {
    pool = filter_top_k(query, pool, plan.k);
  }
  return pool;
}

} // namespace rd2v
