#pragma once

#include <functional>
#include <span>

#include "rd2v/matrix.hpp"

namespace rd2v {

inline constexpr Real kCosineEps = 1e-8;

/// a.b / (max(|a|, eps) * max(|b|, eps)).
Real cosine_similarity(std::span<const Real> a, std::span<const Real> b,
                       Real eps = kCosineEps);

/// max(v) + log(sum(exp(v - max(v)))). Throws DomainError on empty input.
Real log_sum_exp(std::span<const Real> v);

/// Central differences (f(x + h e_ij) - f(x - h e_ij)) / 2h for every entry.
/// Throws NumericError if any evaluation is non-finite.
Matrix finite_difference_gradient(const std::function<Real(const Matrix&)>& f,
                                  const Matrix& x, Real h = 1e-5);

/// max |a - b| / max(max |a|, max |b|, floor): error relative to the
/// gradient's own scale, so entries that are exactly zero don't blow up.
Real relative_error(const Matrix& analytic, const Matrix& numeric, Real floor = 1e-8);

} // namespace rd2v
