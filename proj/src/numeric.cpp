#include "rd2v/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rd2v/errors.hpp"

namespace rd2v {

Real cosine_similarity(std::span<const Real> a, std::span<const Real> b, Real eps) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  if (a.empty()) {
    throw ShapeError("cosine_similarity: empty vectors");
  }
  Real dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::max(std::sqrt(na), eps) * std::max(std::sqrt(nb), eps));
}

Real log_sum_exp(std::span<const Real> v) {
  if (v.empty()) {
    throw DomainError("log_sum_exp of an empty vector");
  }
  const Real m = *std::max_element(v.begin(), v.end());
  Real z = 0.0;
  for (Real x : v) z += std::exp(x - m);
  return m + std::log(z);
}

Matrix finite_difference_gradient(const std::function<Real(const Matrix&)>& f,
                                  const Matrix& x, Real h) {
  if (!(h > 0.0)) {
    throw DomainError("finite_difference_gradient: step must be positive");
  }
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const Real up = f(probe);
    probe[i] = x[i] - h;
    const Real down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_difference_gradient: non-finite evaluation at entry " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

Real relative_error(const Matrix& analytic, const Matrix& numeric, Real floor) {
  const Real scale = std::max({max_abs(analytic), max_abs(numeric), floor});
  return max_abs_diff(analytic, numeric) / scale;
}

} // namespace rd2v
